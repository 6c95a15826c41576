//! Rasters, focal-plane warping, integral accumulation and focus metrics.

mod accumulate;
mod metrics;
pub mod pnm;
mod raster;
mod warp;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use accumulate::IntegralAccumulator;
pub use metrics::{glv, order_by_value, sort_by_glv};
pub use raster::{ImageRaster, Roi};
pub use warp::{warp_to_plane, Interpolation, PlaneSampler};

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("need at least 2 valid pixels{}, found {found}", index.map(|i| format!(" in image {i}")).unwrap_or_default())]
    InsufficientPixels { index: Option<usize>, found: usize },
    #[error("raster grid mismatch: expected {expected:?}, found {found:?}")]
    GridMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("region {roi:?} does not fit a {dims:?} raster")]
    InvalidRoi { roi: Roi, dims: (usize, usize) },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("malformed image: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `N * GLV` of the accumulator's integral inside `roi`.
pub fn normalized_variance(acc: &IntegralAccumulator, roi: &Roi) -> Result<f64, ImagingError> {
    acc.normalized_variance(roi)
}
