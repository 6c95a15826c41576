use serde::{Deserialize, Serialize};

use super::SimulateError;
use crate::geometry::{normalize_angle, FocalPlane, PoseParam, PoseParams};
use crate::imaging::{ImageRaster, Roi};
use crate::refine::RefinementResult;

/// PSNR reported when the integral equals the reference.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamError {
    pub param: String,
    /// `m` or `deg`.
    pub unit: String,
    pub rmse_before: f64,
    pub rmse_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationMetrics {
    /// RMSE over all views, per parameter.
    pub pose_rmse: Vec<ParamError>,
    /// Views in the final integral.
    pub evaluated_views: usize,
    /// Mean absolute `t_x`/`t_y` error over the evaluated views after a
    /// rigid planar alignment (yaw and shift) to the true positions.
    pub aligned_mean_abs_txy_before: f64,
    pub aligned_mean_abs_txy_after: f64,
    pub normalized_variance_before: f64,
    pub normalized_variance_after: f64,
    pub normalized_variance_gain_percent: f64,
    pub parameter_evaluations: usize,
    pub baseline_parameter_evaluations: usize,
    pub parameter_reduction_percent: f64,
    pub psnr_db: f64,
}

pub fn gain_percent(before: f64, after: f64) -> f64 {
    if before == after {
        0.0
    } else {
        100.0 * (after / before - 1.0)
    }
}

fn param_diff(p: PoseParam, a: &PoseParams, b: &PoseParams) -> f64 {
    let d = a.get(p) - b.get(p);
    if p.is_rotation() {
        normalize_angle(d)
    } else {
        d
    }
}

/// Per-parameter RMSE of `estimated` against `truth` (angles in degrees).
pub fn pose_rmse(estimated: &[PoseParams], truth: &[PoseParams]) -> [f64; 6] {
    let mut out = [0.0; 6];
    if estimated.is_empty() {
        return out;
    }
    for p in PoseParam::ALL {
        let ss: f64 = estimated
            .iter()
            .zip(truth)
            .map(|(e, t)| param_diff(p, e, t).powi(2))
            .sum();
        let r = (ss / estimated.len() as f64).sqrt();
        out[p.index()] = if p.is_rotation() { r.to_degrees() } else { r };
    }
    out
}

/// Mean absolute `t_x`/`t_y` error after the rotation about z and planar
/// shift that best align `estimated` positions to `truth`.
pub fn aligned_planar_error(estimated: &[PoseParams], truth: &[PoseParams]) -> f64 {
    let n = estimated.len();
    if n == 0 {
        return 0.0;
    }
    let centroid = |ps: &[PoseParams]| {
        let (sx, sy) = ps.iter().fold((0.0, 0.0), |a, p| (a.0 + p.t_x, a.1 + p.t_y));
        (sx / n as f64, sy / n as f64)
    };
    let (ex, ey) = centroid(estimated);
    let (tx, ty) = centroid(truth);
    let (mut dot, mut cross) = (0.0, 0.0);
    for (e, t) in estimated.iter().zip(truth) {
        let (px, py) = (e.t_x - ex, e.t_y - ey);
        let (qx, qy) = (t.t_x - tx, t.t_y - ty);
        dot += px * qx + py * qy;
        cross += px * qy - py * qx;
    }
    let theta = if n > 1 { cross.atan2(dot) } else { 0.0 };
    let (s, c) = theta.sin_cos();
    let total: f64 = estimated
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let (px, py) = (e.t_x - ex, e.t_y - ey);
            let ax = c * px - s * py + tx;
            let ay = s * px + c * py + ty;
            (ax - t.t_x).abs() + (ay - t.t_y).abs()
        })
        .sum();
    total / (2 * n) as f64
}

/// PSNR of `image` against `reference` over the pixels of `roi` valid in
/// both, with the reference's dynamic range as peak.
pub fn psnr(image: &ImageRaster, reference: &ImageRaster, roi: &Roi) -> f64 {
    let (mut se, mut n) = (0.0, 0usize);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for y in roi.rows() {
        for x in roi.cols() {
            if let (Some(a), Some(r)) = (image.get(x, y), reference.get(x, y)) {
                se += (a as f64 - r as f64).powi(2);
                n += 1;
                lo = lo.min(r as f64);
                hi = hi.max(r as f64);
            }
        }
    }
    if n == 0 {
        return 0.0;
    }
    let mse = se / n as f64;
    if mse == 0.0 {
        return PSNR_CAP_DB;
    }
    let peak = (hi - lo).max(f64::MIN_POSITIVE);
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB)
}

pub fn evaluate(
    result: &RefinementResult,
    true_poses: &[PoseParams],
    reference: &ImageRaster,
    plane: &FocalPlane,
    roi: &Roi,
) -> Result<EvaluationMetrics, SimulateError> {
    let m = true_poses.len();
    if result.corrected_poses.len() != m || result.initial_poses.len() != m {
        return Err(SimulateError::LengthMismatch {
            expected: m,
            found: result.corrected_poses.len(),
        });
    }
    if reference.dims() != plane.raster_resolution || result.integral.dims() != plane.raster_resolution {
        return Err(SimulateError::LengthMismatch {
            expected: plane.raster_resolution.0 * plane.raster_resolution.1,
            found: reference.samples().len(),
        });
    }
    roi.check(plane.raster_resolution)?;
    let before = pose_rmse(&result.initial_poses, true_poses);
    let after = pose_rmse(&result.corrected_poses, true_poses);
    let pose_rmse = PoseParam::ALL
        .iter()
        .map(|p| ParamError {
            param: p.name().to_string(),
            unit: if p.is_rotation() { "deg" } else { "m" }.to_string(),
            rmse_before: before[p.index()],
            rmse_after: after[p.index()],
        })
        .collect();

    let pick = |poses: &[PoseParams]| -> Vec<PoseParams> {
        poses
            .iter()
            .zip(&result.included)
            .filter(|(_, &inc)| inc)
            .map(|(p, _)| *p)
            .collect()
    };
    let truth_in = pick(true_poses);
    let baseline = 6 * m;
    Ok(EvaluationMetrics {
        pose_rmse,
        evaluated_views: truth_in.len(),
        aligned_mean_abs_txy_before: aligned_planar_error(&pick(&result.initial_poses), &truth_in),
        aligned_mean_abs_txy_after: aligned_planar_error(&pick(&result.corrected_poses), &truth_in),
        normalized_variance_before: result.unrefined_objective,
        normalized_variance_after: result.final_objective,
        normalized_variance_gain_percent: gain_percent(result.unrefined_objective, result.final_objective),
        parameter_evaluations: result.parameter_evaluations,
        baseline_parameter_evaluations: baseline,
        parameter_reduction_percent: if baseline > 0 {
            100.0 * (1.0 - result.parameter_evaluations as f64 / baseline as f64)
        } else {
            0.0
        },
        psnr_db: psnr(&result.integral, reference, roi),
    })
}
