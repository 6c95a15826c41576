use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::{OccluderField, SceneSpec};
use super::{mix_seed, SimulateError};
use crate::geometry::{CameraIntrinsics, FocalPlane, PoseParams};
use crate::imaging::ImageRaster;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureSpec {
    /// `(rows, cols)` of camera positions.
    pub grid: (usize, usize),
    /// Aperture size in meters along x and y; the outermost cameras sit on
    /// its border.
    pub aperture_extent: (f64, f64),
    pub altitude: f64,
    pub intrinsics: CameraIntrinsics,
    pub pixel_noise_sigma: f64,
    /// Rays per pixel along each axis, averaged with a box filter.
    #[serde(default = "default_supersample")]
    pub supersample: usize,
    /// Standard deviation of the Gaussian optical blur, pixels (0 for none).
    #[serde(default)]
    pub psf_sigma: f64,
}

fn default_supersample() -> usize {
    1
}

impl CaptureSpec {
    pub fn validate(&self, scene: &SceneSpec) -> Result<(), SimulateError> {
        let bad = |key: &str, msg: String| {
            Err(SimulateError::InvalidSpec {
                key: key.into(),
                message: msg,
            })
        };
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return bad("capture.grid", "needs at least one row and one column".into());
        }
        if !(self.aperture_extent.0 >= 0.0 && self.aperture_extent.1 >= 0.0) {
            return bad("capture.aperture_extent", "must be non-negative".into());
        }
        if !(self.altitude > scene.occluder_layer.height) || !self.altitude.is_finite() {
            return bad(
                "capture.altitude",
                format!(
                    "must lie above the occluder layer ({} <= {})",
                    self.altitude, scene.occluder_layer.height
                ),
            );
        }
        if self.supersample == 0 {
            return bad("capture.supersample", "must be at least 1".into());
        }
        if !(self.psf_sigma >= 0.0 && self.psf_sigma.is_finite()) {
            return bad("capture.psf_sigma", format!("must be >= 0, got {}", self.psf_sigma));
        }
        if !(self.pixel_noise_sigma >= 0.0) {
            return bad(
                "capture.pixel_noise_sigma",
                format!("must be >= 0, got {}", self.pixel_noise_sigma),
            );
        }
        self.intrinsics.validate().map_err(|e| SimulateError::InvalidSpec {
            key: "capture.intrinsics".into(),
            message: e.to_string(),
        })
    }

    pub fn num_views(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    /// Nadir poses on the grid, row-major, rows along y and columns along x.
    pub fn camera_poses(&self) -> Vec<PoseParams> {
        let (rows, cols) = self.grid;
        let coord = |i: usize, n: usize, extent: f64| {
            if n == 1 {
                0.0
            } else {
                -extent / 2.0 + extent * i as f64 / (n - 1) as f64
            }
        };
        let mut poses = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                poses.push(PoseParams::nadir(
                    coord(c, cols, self.aperture_extent.0),
                    coord(r, rows, self.aperture_extent.1),
                    self.altitude,
                ));
            }
        }
        poses
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedViews {
    pub images: Vec<ImageRaster>,
    pub true_poses: Vec<PoseParams>,
    /// Occlusion-free ground on the scene's reference plane.
    pub reference: ImageRaster,
}

/// Renders one view per grid position. Each pixel's ray is tested against
/// the occluder disks first and the ground plane second.
pub fn render_views(scene: &SceneSpec, capture: &CaptureSpec, seed: u64) -> Result<RenderedViews, SimulateError> {
    scene.validate()?;
    capture.validate(scene)?;
    let poses = capture.camera_poses();
    let field = OccluderField::sample(
        &scene.occluder_layer,
        occluder_bounds(scene, capture, &poses),
        mix_seed(seed, 1),
    );
    let images = poses
        .par_iter()
        .enumerate()
        .map(|(i, pose)| render_view(scene, &field, capture, pose, mix_seed(seed, 100 + i as u64)))
        .collect();
    Ok(RenderedViews {
        images,
        true_poses: poses,
        reference: reference_image(scene, &scene.reference_plane()),
    })
}

/// Ground intensity sampled at every raster point of `plane`.
pub fn reference_image(scene: &SceneSpec, plane: &FocalPlane) -> ImageRaster {
    let (w, h) = plane.raster_resolution;
    ImageRaster::from_fn(w, h, |u, v| {
        let p = plane.world_point(u as f64, v as f64);
        scene.ground_intensity(p.x, p.y) as f32
    })
}

/// Renders a single view with the sensor model of `capture`; exposed so
/// tests can render arbitrary poses.
pub fn render_view(
    scene: &SceneSpec,
    field: &OccluderField,
    capture: &CaptureSpec,
    pose: &PoseParams,
    seed: u64,
) -> ImageRaster {
    let k = &capture.intrinsics;
    let (w, h) = k.image_size;
    let rt = pose.world_to_camera().transpose();
    let c = pose.center();
    let n = scene.ground_normal();
    let (cx, cy) = k.principal_point;
    let f = k.focal_length_px;
    let ss = capture.supersample.max(1);
    let offsets: Vec<f64> = (0..ss).map(|i| (i as f64 + 0.5) / ss as f64 - 0.5).collect();
    let mut samples = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let mut sum = 0.0;
            for &dv in &offsets {
                for &du in &offsets {
                    let d = rt * Vector3::new((u as f64 + du - cx) / f, (v as f64 + dv - cy) / f, 1.0);
                    sum += trace(scene, field, &c, &d, &n);
                }
            }
            samples.push((sum / (ss * ss) as f64) as f32);
        }
    }
    if capture.psf_sigma > 0.0 {
        gaussian_blur(&mut samples, w, h, capture.psf_sigma);
    }
    if capture.pixel_noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, capture.pixel_noise_sigma).expect("validated sigma");
        for s in &mut samples {
            *s += noise.sample(&mut rng) as f32;
        }
    }
    ImageRaster::new(w, h, samples).expect("dimensions match")
}

/// Separable Gaussian blur with edge replication.
fn gaussian_blur(samples: &mut [f32], w: usize, h: usize, sigma: f64) {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0f32; samples.len()];
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = kernel
                .iter()
                .zip(-radius..=radius)
                .map(|(k, d)| k * samples[y * w + clamp(x as i64 + d, w)] as f64)
                .sum();
            tmp[y * w + x] = acc as f32;
        }
    }
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = kernel
                .iter()
                .zip(-radius..=radius)
                .map(|(k, d)| k * tmp[clamp(y as i64 + d, h) * w + x] as f64)
                .sum();
            samples[y * w + x] = acc as f32;
        }
    }
}

fn trace(scene: &SceneSpec, field: &OccluderField, c: &Vector3<f64>, d: &Vector3<f64>, n: &Vector3<f64>) -> f64 {
    if d.z != 0.0 && !field.is_empty() {
        let s = (field.height() - c.z) / d.z;
        if s > 0.0 {
            if let Some(i) = field.hit(c.x + s * d.x, c.y + s * d.y) {
                return i;
            }
        }
    }
    let denom = n.dot(d);
    if denom != 0.0 {
        let s = -n.dot(c) / denom;
        if s > 0.0 {
            return scene.ground_intensity(c.x + s * d.x, c.y + s * d.y);
        }
    }
    scene.ground_texture.base_intensity
}

/// Bounding box of every view's footprint on the occluder plane.
fn occluder_bounds(scene: &SceneSpec, capture: &CaptureSpec, poses: &[PoseParams]) -> ((f64, f64), (f64, f64)) {
    let k = &capture.intrinsics;
    let h = scene.occluder_layer.height;
    let limit = 0.5
        * scene
            .ground_extent
            .0
            .max(scene.ground_extent.1)
            .max(capture.aperture_extent.0)
            .max(capture.aperture_extent.1)
        + 10.0 * (capture.altitude - h);
    let (w, hh) = (k.image_size.0 as f64, k.image_size.1 as f64);
    let corners = [(-0.5, -0.5), (w - 0.5, -0.5), (-0.5, hh - 0.5), (w - 0.5, hh - 0.5)];
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for pose in poses {
        let rt = pose.world_to_camera().transpose();
        let c = pose.center();
        for &(u, v) in &corners {
            let d = rt
                * Vector3::new(
                    (u - k.principal_point.0) / k.focal_length_px,
                    (v - k.principal_point.1) / k.focal_length_px,
                    1.0,
                );
            let s = (h - c.z) / d.z;
            let (px, py) = if d.z < 0.0 && s.is_finite() {
                (c.x + s * d.x, c.y + s * d.y)
            } else {
                (c.x + d.x.signum() * limit, c.y + d.y.signum() * limit)
            };
            x0 = x0.min(px);
            x1 = x1.max(px);
            y0 = y0.min(py);
            y1 = y1.max(py);
        }
    }
    ((x0.max(-limit), x1.min(limit)), (y0.max(-limit), y1.min(limit)))
}
