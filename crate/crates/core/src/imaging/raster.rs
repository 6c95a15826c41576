use serde::{Deserialize, Serialize};

use super::ImagingError;

/// Single-channel floating-point image with a per-pixel validity mask.
///
/// Equality compares dimensions, masks and the valid samples only.
#[derive(Debug, Clone)]
pub struct ImageRaster {
    width: usize,
    height: usize,
    samples: Vec<f32>,
    valid: Vec<bool>,
}

impl ImageRaster {
    /// Fully valid raster. Non-finite samples are marked invalid.
    pub fn new(width: usize, height: usize, samples: Vec<f32>) -> Result<Self, ImagingError> {
        let valid = samples.iter().map(|v| v.is_finite()).collect();
        Self::with_mask(width, height, samples, valid)
    }

    pub fn with_mask(
        width: usize,
        height: usize,
        samples: Vec<f32>,
        mut valid: Vec<bool>,
    ) -> Result<Self, ImagingError> {
        if samples.len() != width * height || valid.len() != width * height {
            return Err(ImagingError::GridMismatch {
                expected: (width, height),
                found: (samples.len(), valid.len()),
            });
        }
        for (v, s) in valid.iter_mut().zip(&samples) {
            *v &= s.is_finite();
        }
        Ok(Self {
            width,
            height,
            samples,
            valid,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            samples: vec![value; width * height],
            valid: vec![value.is_finite(); width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        let valid = samples.iter().map(|v| v.is_finite()).collect();
        Self {
            width,
            height,
            samples,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Sample at `(x, y)` if valid.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let i = self.index(x, y);
        self.valid[i].then_some(self.samples[i])
    }

    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        let i = self.index(x, y);
        self.samples[i] = value;
        self.valid[i] = value.is_finite();
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        let i = self.index(x, y);
        self.valid[i] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Intersects the validity mask with `mask`.
    pub fn apply_mask(&mut self, mask: &[bool]) -> Result<(), ImagingError> {
        if mask.len() != self.valid.len() {
            return Err(ImagingError::GridMismatch {
                expected: self.dims(),
                found: (mask.len(), 1),
            });
        }
        for (v, m) in self.valid.iter_mut().zip(mask) {
            *v &= *m;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        let samples: Vec<f32> = self.samples.iter().map(|&v| f(v)).collect();
        let valid = self
            .valid
            .iter()
            .zip(&samples)
            .map(|(&v, s)| v && s.is_finite())
            .collect();
        Self {
            width: self.width,
            height: self.height,
            samples,
            valid,
        }
    }

    /// Minimum and maximum over valid samples.
    pub fn valid_range(&self) -> Option<(f32, f32)> {
        self.samples
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .fold(None, |acc, (&s, _)| match acc {
                None => Some((s, s)),
                Some((lo, hi)) => Some((lo.min(s), hi.max(s))),
            })
    }
}

impl PartialEq for ImageRaster {
    fn eq(&self, other: &Self) -> bool {
        self.dims() == other.dims()
            && self.valid == other.valid
            && self
                .samples
                .iter()
                .zip(&other.samples)
                .zip(&self.valid)
                .all(|((a, b), &v)| !v || a == b)
    }
}

/// Axis-aligned rectangle in raster coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self { x, y, width, height }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    /// Centered rectangle of the given size.
    pub fn centered(raster: (usize, usize), size: (usize, usize)) -> Self {
        let w = size.0.min(raster.0);
        let h = size.1.min(raster.1);
        Self::new((raster.0 - w) / 2, (raster.1 - h) / 2, w, h)
    }

    pub fn check(&self, dims: (usize, usize)) -> Result<(), ImagingError> {
        if self.width == 0 || self.height == 0 || self.x + self.width > dims.0 || self.y + self.height > dims.1 {
            return Err(ImagingError::InvalidRoi { roi: *self, dims });
        }
        Ok(())
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn rows(&self) -> std::ops::Range<usize> {
        self.y..self.y + self.height
    }

    pub fn cols(&self) -> std::ops::Range<usize> {
        self.x..self.x + self.width
    }
}

impl std::str::FromStr for Roi {
    type Err = String;

    /// Parses `x,y,w,h`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
        match parts.as_slice() {
            [Ok(x), Ok(y), Ok(w), Ok(h)] => Ok(Roi::new(*x, *y, *w, *h)),
            _ => Err(format!("expected x,y,w,h with non-negative integers, got `{s}`")),
        }
    }
}
