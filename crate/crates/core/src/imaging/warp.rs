use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ImageRaster, ImagingError};
use crate::geometry::{homography_to_plane, CameraIntrinsics, FocalPlane, PlaneHomography, PoseParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Bilinear,
    /// Keys cubic convolution (a = -0.5) with edge replication.
    Bicubic,
    Nearest,
}

impl std::str::FromStr for Interpolation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bilinear" => Ok(Interpolation::Bilinear),
            "bicubic" => Ok(Interpolation::Bicubic),
            "nearest" => Ok(Interpolation::Nearest),
            other => Err(format!(
                "unknown interpolation `{other}` (expected bicubic, bilinear or nearest)"
            )),
        }
    }
}

/// Samples a source image at plane raster coordinates through a fixed
/// homography.
#[derive(Debug, Clone, Copy)]
pub struct PlaneSampler<'a> {
    image: &'a ImageRaster,
    homography: PlaneHomography,
    interpolation: Interpolation,
}

impl<'a> PlaneSampler<'a> {
    pub fn new(
        image: &'a ImageRaster,
        k: &CameraIntrinsics,
        pose: &PoseParams,
        plane: &FocalPlane,
        interpolation: Interpolation,
    ) -> Result<Self, ImagingError> {
        Ok(Self {
            image,
            homography: homography_to_plane(k, pose, plane)?,
            interpolation,
        })
    }

    /// Value at plane raster coordinate `(u, v)`, or `None` when it maps
    /// behind the camera, outside the image or onto invalid source pixels.
    #[inline]
    pub fn sample(&self, u: f64, v: f64) -> Option<f32> {
        let (x, y) = self.homography.map(u, v)?;
        match self.interpolation {
            Interpolation::Bilinear => bilinear(self.image, x, y),
            Interpolation::Bicubic => bicubic(self.image, x, y),
            Interpolation::Nearest => nearest(self.image, x, y),
        }
    }
}

#[inline]
fn bilinear(img: &ImageRaster, x: f64, y: f64) -> Option<f32> {
    let (w, h) = img.dims();
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return None;
    }
    let x0 = (x.floor() as usize).min(w.saturating_sub(2));
    let y0 = (y.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = (x - x0 as f64) as f32;
    let fy = (y - y0 as f64) as f32;
    let a = img.get(x0, y0)?;
    let b = img.get(x1, y0)?;
    let c = img.get(x0, y1)?;
    let d = img.get(x1, y1)?;
    let top = a + (b - a) * fx;
    let bottom = c + (d - c) * fx;
    Some(top + (bottom - top) * fy)
}

#[inline]
fn keys_weights(t: f64) -> [f64; 4] {
    const A: f64 = -0.5;
    let near = |d: f64| ((A + 2.0) * d - (A + 3.0)) * d * d + 1.0;
    let far = |d: f64| ((A * d - 5.0 * A) * d + 8.0 * A) * d - 4.0 * A;
    [far(1.0 + t), near(t), near(1.0 - t), far(2.0 - t)]
}

/// Same footprint as `bilinear`; the 4 x 4 neighbourhood is clamped at the
/// image border and must be valid.
#[inline]
fn bicubic(img: &ImageRaster, x: f64, y: f64) -> Option<f32> {
    let (w, h) = img.dims();
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return None;
    }
    let (xf, yf) = (x.floor(), y.floor());
    let wx = keys_weights(x - xf);
    let wy = keys_weights(y - yf);
    let (xi, yi) = (xf as i64, yf as i64);
    let mut acc = 0.0;
    for (j, wyj) in wy.iter().enumerate() {
        let yy = (yi + j as i64 - 1).clamp(0, h as i64 - 1) as usize;
        let mut row = 0.0;
        for (i, wxi) in wx.iter().enumerate() {
            let xx = (xi + i as i64 - 1).clamp(0, w as i64 - 1) as usize;
            row += wxi * img.get(xx, yy)? as f64;
        }
        acc += wyj * row;
    }
    Some(acc as f32)
}

#[inline]
fn nearest(img: &ImageRaster, x: f64, y: f64) -> Option<f32> {
    let (w, h) = img.dims();
    let xr = x.round();
    let yr = y.round();
    if !(xr >= 0.0 && yr >= 0.0 && xr <= (w - 1) as f64 && yr <= (h - 1) as f64) {
        return None;
    }
    img.get(xr as usize, yr as usize)
}

/// Resamples `image` onto the plane raster grid.
pub fn warp_to_plane(
    image: &ImageRaster,
    k: &CameraIntrinsics,
    pose: &PoseParams,
    plane: &FocalPlane,
    interpolation: Interpolation,
) -> Result<ImageRaster, ImagingError> {
    let sampler = PlaneSampler::new(image, k, pose, plane, interpolation)?;
    let (w, h) = plane.raster_resolution;
    let mut samples = vec![0f32; w * h];
    let mut valid = vec![false; w * h];
    samples
        .par_chunks_mut(w)
        .zip(valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(v, (row, row_valid))| {
            for u in 0..w {
                if let Some(s) = sampler.sample(u as f64, v as f64) {
                    row[u] = s;
                    row_valid[u] = true;
                }
            }
        });
    ImageRaster::with_mask(w, h, samples, valid)
}
