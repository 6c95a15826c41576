use serde::{Deserialize, Serialize};

use super::nelder_mead::{nelder_mead, NelderMeadConfig, Sense};
use super::search_space::SearchSpace;
use super::RefineError;
use crate::geometry::{CameraIntrinsics, FocalPlane, PoseParams};
use crate::imaging::{ImageRaster, ImagingError, IntegralAccumulator, Interpolation, PlaneSampler, Roi};

/// Fixed inputs shared by every refinement step of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineContext {
    pub intrinsics: CameraIntrinsics,
    pub plane: FocalPlane,
    pub roi: Roi,
    pub space: SearchSpace,
    pub nelder_mead: NelderMeadConfig,
    pub interpolation: Interpolation,
}

impl RefineContext {
    pub fn new(intrinsics: CameraIntrinsics, plane: FocalPlane, roi: Roi, space: SearchSpace) -> Self {
        Self {
            intrinsics,
            plane,
            roi,
            space,
            nelder_mead: default_refine_config(),
            interpolation: Interpolation::Bicubic,
        }
    }
}

/// Nelder-Mead settings for pose refinement. Refinement works in units of
/// the search-space steps and on the objective relative to its start value,
/// so both tolerances are dimensionless there.
pub fn default_refine_config() -> NelderMeadConfig {
    NelderMeadConfig {
        f_tolerance: 1e-5,
        x_tolerance: 1e-2,
        max_iterations: 400,
        ..NelderMeadConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRefinement {
    pub pose: PoseParams,
    /// Normalized variance with the image integrated at `pose`.
    pub objective: f64,
    /// Normalized variance with the image integrated at the start pose.
    pub initial_objective: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// False when the accumulator was empty and nothing was optimized.
    pub optimized: bool,
}

/// Normalized variance of `acc` plus `image` warped at `pose`.
pub fn candidate_objective(
    acc: &IntegralAccumulator,
    image: &ImageRaster,
    pose: &PoseParams,
    ctx: &RefineContext,
) -> Result<f64, ImagingError> {
    let sampler = PlaneSampler::new(image, &ctx.intrinsics, pose, &ctx.plane, ctx.interpolation)?;
    acc.candidate_normalized_variance(&ctx.roi, |x, y| sampler.sample(x as f64, y as f64))
}

/// Searches the active parameters of `pose0` for the pose that maximizes the
/// normalized variance of the accumulator with `image` added. The
/// accumulator is only read. With an empty accumulator the start pose is
/// returned unchanged.
pub fn refine_image_pose(
    acc: &IntegralAccumulator,
    image: &ImageRaster,
    pose0: &PoseParams,
    ctx: &RefineContext,
) -> Result<PoseRefinement, RefineError> {
    let initial_objective = candidate_objective(acc, image, pose0, ctx)?;
    if !initial_objective.is_finite() {
        return Err(RefineError::NonFiniteObjective(initial_objective));
    }
    if acc.is_empty() {
        return Ok(PoseRefinement {
            pose: *pose0,
            objective: initial_objective,
            initial_objective,
            evaluations: 1,
            converged: true,
            optimized: false,
        });
    }

    let space = &ctx.space;
    let scale = if initial_objective.abs() > 0.0 {
        initial_objective.abs()
    } else {
        1.0
    };
    let objective = |z: &[f64]| -> f64 {
        if z.iter().all(|&v| v == 0.0) {
            return initial_objective / scale;
        }
        let Some(pose) = space.apply_scaled(pose0, z) else {
            return f64::NEG_INFINITY;
        };
        match candidate_objective(acc, image, &pose, ctx) {
            Ok(v) => v / scale,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let dim = space.dim();
    let steps = vec![1.0; dim];
    let best = nelder_mead(objective, &vec![0.0; dim], &steps, &ctx.nelder_mead, Sense::Maximize)?;
    let pose = space
        .apply_scaled(pose0, &best.x)
        .expect("best vertex is inside the bounds");
    Ok(PoseRefinement {
        pose,
        objective: best.f * scale,
        initial_objective,
        evaluations: best.evaluations,
        converged: best.converged,
        optimized: true,
    })
}
