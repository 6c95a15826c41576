//! Sequential, GLV-ordered registration and integration of all views.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::pose_refine::{refine_image_pose, RefineContext};
use super::RefineError;
use crate::geometry::PoseParams;
use crate::imaging::{sort_by_glv, warp_to_plane, ImageRaster, IntegralAccumulator, Roi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Refine and integrate every view.
    BruteForce,
    /// Stop once the normalized variance has fallen below its running maximum
    /// for `patience` consecutive steps; keep the state at the maximum.
    EarlyStopping,
    /// Refine every view, integrate only those that raise the normalized
    /// variance.
    Selection,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::BruteForce => "brute",
            StrategyKind::EarlyStopping => "early",
            StrategyKind::Selection => "select",
        })
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "brute" | "brute_force" | "brute-force" => Ok(StrategyKind::BruteForce),
            "early" | "early_stopping" | "early-stopping" => Ok(StrategyKind::EarlyStopping),
            "select" | "selection" => Ok(StrategyKind::Selection),
            other => Err(format!("unknown strategy `{other}` (expected brute, early or select)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub patience: usize,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, patience: usize) -> Result<Self, RefineError> {
        let cfg = Self { kind, patience };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn brute_force() -> Self {
        Self {
            kind: StrategyKind::BruteForce,
            patience: 1,
        }
    }

    pub fn early_stopping(patience: usize) -> Self {
        Self {
            kind: StrategyKind::EarlyStopping,
            patience,
        }
    }

    pub fn selection() -> Self {
        Self {
            kind: StrategyKind::Selection,
            patience: 1,
        }
    }

    pub fn validate(&self) -> Result<(), RefineError> {
        if self.patience == 0 {
            return Err(RefineError::InvalidConfig("patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// What to do with a refined view, given the objective it would produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDecision {
    Integrate,
    Skip,
    /// Stop and roll back to the best state seen.
    Stop,
}

/// Decision logic of the three strategies, separated from the imaging so it
/// can be driven by plain objective values.
#[derive(Debug, Clone)]
pub struct StrategyTracker {
    config: StrategyConfig,
    current: f64,
    best: f64,
    best_step: usize,
    step: usize,
    dips: usize,
}

impl StrategyTracker {
    /// `initial` is the objective of the integral holding only the first view.
    pub fn new(config: StrategyConfig, initial: f64) -> Self {
        Self {
            config,
            current: initial,
            best: initial,
            best_step: 0,
            step: 0,
            dips: 0,
        }
    }

    pub fn observe(&mut self, candidate: f64) -> StepDecision {
        self.step += 1;
        match self.config.kind {
            StrategyKind::BruteForce => {
                self.current = candidate;
                StepDecision::Integrate
            }
            StrategyKind::Selection => {
                if candidate > self.current {
                    self.current = candidate;
                    StepDecision::Integrate
                } else {
                    StepDecision::Skip
                }
            }
            StrategyKind::EarlyStopping => {
                if candidate > self.best {
                    self.best = candidate;
                    self.best_step = self.step;
                    self.dips = 0;
                } else {
                    self.dips += 1;
                    if self.dips >= self.config.patience {
                        return StepDecision::Stop;
                    }
                }
                self.current = candidate;
                StepDecision::Integrate
            }
        }
    }

    /// Step index (0 = first view) of the running maximum.
    pub fn best_step(&self) -> usize {
        self.best_step
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// One optimized view: objective with the view added at its initial and
/// at its refined pose, and what the strategy did with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub image: usize,
    pub initial_objective: f64,
    pub refined_objective: f64,
    pub evaluations: usize,
    pub decision: StepDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFailure {
    pub image: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RefinementResult {
    /// Views in processing (GLV) order.
    pub order: Vec<usize>,
    pub initial_poses: Vec<PoseParams>,
    /// Refined pose per view; views never processed keep their initial pose.
    pub corrected_poses: Vec<PoseParams>,
    /// Whether each view contributes to the final integral.
    pub included: Vec<bool>,
    /// Whether each view went through pose optimization.
    pub optimized: Vec<bool>,
    /// Normalized variance of the accumulator after each processed step,
    /// starting with the first view alone.
    pub objective_trace: Vec<f64>,
    /// Normalized variance each step would reach with its view integrated.
    pub candidate_trace: Vec<f64>,
    /// Number of views in the final integral.
    pub n_stop: usize,
    pub final_objective: f64,
    /// Normalized variance of all views integrated at their initial poses.
    pub unrefined_objective: f64,
    /// Sum of active parameter counts over optimized views.
    pub parameter_evaluations: usize,
    pub objective_evaluations: usize,
    pub steps: Vec<StepRecord>,
    pub failures: Vec<StepFailure>,
    pub integral: ImageRaster,
}

/// Integrates all views at their given poses in the given order and returns
/// the accumulator. Views that cannot be warped are skipped.
pub fn integrate_views(
    images: &[ImageRaster],
    poses: &[PoseParams],
    order: &[usize],
    ctx: &RefineContext,
) -> Result<IntegralAccumulator, RefineError> {
    let mut acc = IntegralAccumulator::new(ctx.plane.raster_resolution, ctx.roi)?;
    for &i in order {
        if let Ok(w) = warp_to_plane(&images[i], &ctx.intrinsics, &poses[i], &ctx.plane, ctx.interpolation) {
            acc.accumulate(i, &w)?;
        }
    }
    Ok(acc)
}

/// Processing order: views sorted by decreasing full-frame GLV.
pub fn glv_order(images: &[ImageRaster]) -> Result<Vec<usize>, RefineError> {
    let (w, h) = images[0].dims();
    if images.iter().any(|i| i.dims() != (w, h)) {
        return Err(RefineError::InvalidConfig("all views must share one image size".into()));
    }
    Ok(sort_by_glv(images, &Roi::full(w, h))?)
}

pub fn run_strategy(
    images: &[ImageRaster],
    initial_poses: &[PoseParams],
    ctx: &RefineContext,
    strategy: &StrategyConfig,
) -> Result<RefinementResult, RefineError> {
    strategy.validate()?;
    ctx.space.validate()?;
    if images.is_empty() {
        return Err(RefineError::NoImages);
    }
    if images.len() != initial_poses.len() {
        return Err(RefineError::LengthMismatch {
            images: images.len(),
            poses: initial_poses.len(),
        });
    }
    let order = glv_order(images)?;
    let m = images.len();
    let unrefined = integrate_views(images, initial_poses, &order, ctx)?;
    let unrefined_objective = unrefined.normalized_variance(&ctx.roi).unwrap_or(f64::NAN);

    let mut corrected = initial_poses.to_vec();
    let mut included = vec![false; m];
    let mut optimized = vec![false; m];
    let mut failures = Vec::new();
    let mut steps = Vec::new();
    let mut acc = IntegralAccumulator::new(ctx.plane.raster_resolution, ctx.roi)?;
    let mut objective_trace = Vec::new();
    let mut candidate_trace = Vec::new();
    let mut parameter_evaluations = 0;
    let mut objective_evaluations = 0;
    let mut tracker: Option<StrategyTracker> = None;
    let mut best_state: Option<(IntegralAccumulator, Vec<bool>)> = None;

    for &i in &order {
        let image = &images[i];
        let Some(tracker_ref) = tracker.as_mut() else {
            // The first view that warps defines the reference frame.
            let warped = match warp_to_plane(image, &ctx.intrinsics, &initial_poses[i], &ctx.plane, ctx.interpolation) {
                Ok(w) => w,
                Err(e) => {
                    failures.push(StepFailure {
                        image: i,
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            let nv = acc.accumulate(i, &warped)?;
            if !nv.is_finite() {
                // Not enough overlap with the region yet; try the next view.
                failures.push(StepFailure {
                    image: i,
                    message: "view does not cover the region of interest".into(),
                });
                acc = IntegralAccumulator::new(ctx.plane.raster_resolution, ctx.roi)?;
                continue;
            }
            included[i] = true;
            objective_trace.push(nv);
            candidate_trace.push(nv);
            tracker = Some(StrategyTracker::new(*strategy, nv));
            best_state = Some((acc.clone(), included.clone()));
            continue;
        };

        let refined = match refine_image_pose(&acc, image, &initial_poses[i], ctx) {
            Ok(r) => r,
            Err(e) => {
                failures.push(StepFailure {
                    image: i,
                    message: e.to_string(),
                });
                continue;
            }
        };
        optimized[i] = true;
        corrected[i] = refined.pose;
        parameter_evaluations += ctx.space.dim();
        objective_evaluations += refined.evaluations;

        let warped = warp_to_plane(image, &ctx.intrinsics, &refined.pose, &ctx.plane, ctx.interpolation)?;
        let mut trial = acc.clone();
        let candidate = trial.accumulate(i, &warped)?;
        candidate_trace.push(candidate);

        let decision = tracker_ref.observe(candidate);
        steps.push(StepRecord {
            image: i,
            initial_objective: refined.initial_objective,
            refined_objective: refined.objective,
            evaluations: refined.evaluations,
            decision,
        });
        match decision {
            StepDecision::Integrate => {
                acc = trial;
                included[i] = true;
                objective_trace.push(candidate);
                if strategy.kind == StrategyKind::EarlyStopping && tracker_ref.best_step() == candidate_trace.len() - 1
                {
                    best_state = Some((acc.clone(), included.clone()));
                }
            }
            StepDecision::Skip => objective_trace.push(acc.normalized_variance(&ctx.roi)?),
            StepDecision::Stop => {
                objective_trace.push(candidate);
                break;
            }
        }
    }

    let tracker = tracker.ok_or(RefineError::NoImages)?;
    if strategy.kind == StrategyKind::EarlyStopping {
        let (best_acc, best_included) = best_state.expect("set with the first view");
        acc = best_acc;
        included = best_included;
    }
    let final_objective = match strategy.kind {
        StrategyKind::EarlyStopping => tracker.best(),
        _ => acc.normalized_variance(&ctx.roi)?,
    };

    Ok(RefinementResult {
        order,
        initial_poses: initial_poses.to_vec(),
        corrected_poses: corrected,
        included,
        optimized,
        objective_trace,
        candidate_trace,
        n_stop: acc.len(),
        final_objective,
        unrefined_objective,
        parameter_evaluations,
        objective_evaluations,
        steps,
        failures,
        integral: acc.integral(),
    })
}
