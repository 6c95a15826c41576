//! Coarse-to-fine search for the synthetic focal plane.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::nelder_mead::{nelder_mead, NelderMeadConfig, Sense};
use super::RefineError;
use crate::geometry::{rotation_from_euler, CameraIntrinsics, FocalPlane, PoseParams};
use crate::imaging::{glv, warp_to_plane, ImageRaster, IntegralAccumulator, Interpolation, Roi};

/// Maximum tilt explored when orientation refinement is enabled.
const MAX_TILT_DEG: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSearch {
    pub plane: FocalPlane,
    pub glv: f64,
    /// `(height, glv)` for every coarse grid sample.
    pub grid: Vec<(f64, f64)>,
    pub grid_best: f64,
}

/// GLV of the integral of all views on `plane` inside `roi`.
pub fn plane_glv(
    images: &[ImageRaster],
    poses: &[PoseParams],
    k: &CameraIntrinsics,
    plane: &FocalPlane,
    roi: &Roi,
    interpolation: Interpolation,
) -> Result<f64, RefineError> {
    let warped: Vec<_> = images
        .par_iter()
        .zip(poses)
        .map(|(img, pose)| warp_to_plane(img, k, pose, plane, interpolation).ok())
        .collect();
    let mut acc = IntegralAccumulator::new(plane.raster_resolution, *roi)?;
    for (i, w) in warped.iter().enumerate() {
        if let Some(w) = w {
            acc.accumulate(i, w)?;
        }
    }
    Ok(glv(&acc.integral(), roi)?)
}

/// Plane with the template's raster, centered over the template anchor's
/// `(x, y)` at `height`, tilted by `tilt_x`/`tilt_y` radians about the world
/// x and y axes.
pub fn plane_at(template: &FocalPlane, height: f64, tilt_x: f64, tilt_y: f64) -> FocalPlane {
    let a = template.anchor();
    let normal = rotation_from_euler(tilt_x, tilt_y, 0.0) * Vector3::z();
    template.with_pose(Vector3::new(a.x, a.y, height), normal)
}

/// Grid search over plane height in `z_range`, followed by Nelder-Mead over
/// height (and two tilt angles when `refine_orientation` is set). The result
/// scores at least as well as every grid sample.
#[allow(clippy::too_many_arguments)]
pub fn optimize_focal_plane(
    images: &[ImageRaster],
    poses: &[PoseParams],
    k: &CameraIntrinsics,
    template: &FocalPlane,
    roi: &Roi,
    z_range: (f64, f64),
    z_steps: usize,
    refine_orientation: bool,
    nm: &NelderMeadConfig,
) -> Result<PlaneSearch, RefineError> {
    if images.is_empty() {
        return Err(RefineError::NoImages);
    }
    if images.len() != poses.len() {
        return Err(RefineError::LengthMismatch {
            images: images.len(),
            poses: poses.len(),
        });
    }
    let (lo, hi) = z_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(RefineError::InvalidConfig(format!("invalid height range [{lo}, {hi}]")));
    }
    let interp = Interpolation::Bicubic;
    let score = |plane: &FocalPlane| plane_glv(images, poses, k, plane, roi, interp);

    if lo == hi {
        let plane = plane_at(template, lo, 0.0, 0.0);
        let g = score(&plane)?;
        return Ok(PlaneSearch {
            plane,
            glv: g,
            grid: vec![(lo, g)],
            grid_best: g,
        });
    }
    if z_steps < 2 {
        return Err(RefineError::InvalidConfig("z_steps must be at least 2".into()));
    }

    let step = (hi - lo) / (z_steps - 1) as f64;
    let mut grid = Vec::with_capacity(z_steps);
    for i in 0..z_steps {
        let z = lo + step * i as f64;
        let g = score(&plane_at(template, z, 0.0, 0.0)).unwrap_or(f64::NEG_INFINITY);
        grid.push((z, g));
    }
    let (z_best, grid_best) = grid
        .iter()
        .copied()
        .fold((lo, f64::NEG_INFINITY), |best, s| if s.1 > best.1 { s } else { best });
    if !grid_best.is_finite() {
        return Err(RefineError::NonFiniteObjective(grid_best));
    }

    let max_tilt = MAX_TILT_DEG.to_radians();
    let build = |x: &[f64]| -> Option<FocalPlane> {
        let z = z_best + x[0] * step;
        if (z - z_best).abs() > step {
            return None;
        }
        let (tx, ty) = if refine_orientation {
            (x[1].to_radians(), x[2].to_radians())
        } else {
            (0.0, 0.0)
        };
        if tx.abs() > max_tilt || ty.abs() > max_tilt {
            return None;
        }
        Some(plane_at(template, z, tx, ty))
    };
    let objective = |x: &[f64]| -> f64 {
        match build(x) {
            Some(p) => score(&p).unwrap_or(f64::NEG_INFINITY),
            None => f64::NEG_INFINITY,
        }
    };
    // Height in grid steps, tilts in degrees.
    let (x0, steps) = if refine_orientation {
        (vec![0.0; 3], vec![0.5, 1.0, 1.0])
    } else {
        (vec![0.0], vec![0.5])
    };
    let result = nelder_mead(objective, &x0, &steps, nm, Sense::Maximize)?;
    let plane = build(&result.x).expect("best vertex is feasible");
    Ok(PlaneSearch {
        plane,
        glv: result.f,
        grid,
        grid_best,
    })
}

/// Nelder-Mead settings for the plane search (height in grid steps, tilt in
/// degrees, objective in GLV units).
pub fn default_plane_config() -> NelderMeadConfig {
    NelderMeadConfig {
        f_tolerance: 1e-6,
        x_tolerance: 1e-3,
        max_iterations: 200,
        ..NelderMeadConfig::default()
    }
}
