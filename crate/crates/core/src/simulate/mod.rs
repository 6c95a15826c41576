//! Synthetic occluded scenes with known ground truth.
//!
//! A textured ground plane (plus disk-shaped targets) lies under a single
//! layer of opaque disks scattered as a Poisson process. Cameras on a
//! regular grid look straight down; each pixel's ray is traced exactly.

mod evaluate;
mod perturb;
mod render;
mod scene;

use thiserror::Error;

use crate::geometry::CameraIntrinsics;
use crate::imaging::ImagingError;

pub use evaluate::{
    aligned_planar_error, evaluate, gain_percent, pose_rmse, psnr, EvaluationMetrics, ParamError, PSNR_CAP_DB,
};
pub use perturb::{perturb_poses, PerturbationSpec};
pub use render::{reference_image, render_view, render_views, CaptureSpec, RenderedViews};
pub use scene::{
    density_for_coverage, occlusion_probability, value_noise, GroundTexture, OccluderField, OccluderLayer, SceneSpec,
    Target,
};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("invalid `{key}`: {message}")]
    InvalidSpec { key: String, message: String },
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// Derives an independent stream seed from a base seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Default for GroundTexture {
    fn default() -> Self {
        Self {
            base_intensity: 100.0,
            noise_variance: 400.0,
            cell_size: 0.6,
            seed: 7,
        }
    }
}

impl Default for SceneSpec {
    /// Benchmark scene: 60 m of textured ground with four targets near the
    /// center, and half-coverage occluders 12 m above it.
    fn default() -> Self {
        let radius = 0.4;
        Self {
            ground_extent: (60.0, 60.0),
            ground_texture: GroundTexture::default(),
            ground_tilt: (0.0, 0.0),
            targets: vec![
                Target {
                    center: (-3.0, 2.0),
                    radius: 1.0,
                    intensity: 220.0,
                },
                Target {
                    center: (2.5, -2.5),
                    radius: 0.8,
                    intensity: 30.0,
                },
                Target {
                    center: (3.0, 3.0),
                    radius: 0.6,
                    intensity: 200.0,
                },
                Target {
                    center: (-2.0, -3.0),
                    radius: 0.7,
                    intensity: 170.0,
                },
            ],
            occluder_layer: OccluderLayer {
                density: density_for_coverage(0.5, radius),
                radius,
                height: 12.0,
                intensity_mean: 60.0,
                intensity_variance: 100.0,
            },
            reference_extent: (20.0, 20.0),
            reference_resolution: (200, 200),
        }
    }
}

impl Default for CaptureSpec {
    /// 6 x 5 nadir views over a 30 m aperture at 30 m, 256 x 256 pixels.
    fn default() -> Self {
        Self {
            grid: (6, 5),
            aperture_extent: (30.0, 30.0),
            altitude: 30.0,
            intrinsics: CameraIntrinsics::centered(150.0, 256, 256).expect("valid intrinsics"),
            pixel_noise_sigma: 2.0,
            supersample: 1,
            psf_sigma: 0.0,
        }
    }
}
