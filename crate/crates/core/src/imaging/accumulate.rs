use super::metrics::RunningVariance;
use super::{ImageRaster, ImagingError, Roi};

/// Running per-pixel sum and count of warped images on a focal-plane grid.
///
/// Every call to [`accumulate`](Self::accumulate) appends the source index to
/// `order` and the resulting normalized variance over the accumulator's ROI
/// to `objective_trace` (NaN while fewer than two pixels are defined).
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralAccumulator {
    width: usize,
    height: usize,
    roi: Roi,
    sum: Vec<f64>,
    count: Vec<u32>,
    n: usize,
    order: Vec<usize>,
    objective_trace: Vec<f64>,
}

impl IntegralAccumulator {
    pub fn new(dims: (usize, usize), roi: Roi) -> Result<Self, ImagingError> {
        roi.check(dims)?;
        let len = dims.0 * dims.1;
        Ok(Self {
            width: dims.0,
            height: dims.1,
            roi,
            sum: vec![0.0; len],
            count: vec![0; len],
            n: 0,
            order: Vec::new(),
            objective_trace: Vec::new(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn roi(&self) -> &Roi {
        &self.roi
    }

    /// Number of integrated images.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    pub fn count_at(&self, x: usize, y: usize) -> u32 {
        self.count[y * self.width + x]
    }

    pub fn accumulate(&mut self, source: usize, warped: &ImageRaster) -> Result<f64, ImagingError> {
        if warped.dims() != self.dims() {
            return Err(ImagingError::GridMismatch {
                expected: self.dims(),
                found: warped.dims(),
            });
        }
        for ((s, c), (&v, &ok)) in self
            .sum
            .iter_mut()
            .zip(self.count.iter_mut())
            .zip(warped.samples().iter().zip(warped.valid_mask()))
        {
            if ok {
                *s += v as f64;
                *c += 1;
            }
        }
        self.n += 1;
        self.order.push(source);
        let roi = self.roi;
        let objective = self.normalized_variance(&roi).unwrap_or(f64::NAN);
        self.objective_trace.push(objective);
        Ok(objective)
    }

    /// Per-pixel mean where at least one image contributed.
    pub fn integral(&self) -> ImageRaster {
        let samples = self
            .sum
            .iter()
            .zip(&self.count)
            .map(|(&s, &c)| if c > 0 { (s / c as f64) as f32 } else { 0.0 })
            .collect();
        let valid = self.count.iter().map(|&c| c > 0).collect();
        ImageRaster::with_mask(self.width, self.height, samples, valid).expect("consistent grid")
    }

    /// `N * GLV` of the integral inside `roi`.
    pub fn normalized_variance(&self, roi: &Roi) -> Result<f64, ImagingError> {
        self.normalized_variance_with(roi, |_, _| None, self.n)
    }

    /// Normalized variance the accumulator would have after integrating one
    /// more image whose plane samples are given by `candidate`. The
    /// accumulator itself is left untouched.
    pub fn candidate_normalized_variance(
        &self,
        roi: &Roi,
        candidate: impl Fn(usize, usize) -> Option<f32>,
    ) -> Result<f64, ImagingError> {
        self.normalized_variance_with(roi, candidate, self.n + 1)
    }

    fn normalized_variance_with(
        &self,
        roi: &Roi,
        candidate: impl Fn(usize, usize) -> Option<f32>,
        n: usize,
    ) -> Result<f64, ImagingError> {
        roi.check(self.dims())?;
        let mut acc = RunningVariance::default();
        for y in roi.rows() {
            let row = y * self.width;
            for x in roi.cols() {
                let i = row + x;
                let (s, c) = (self.sum[i], self.count[i]);
                let value = match candidate(x, y) {
                    Some(v) => (s + v as f64) / (c + 1) as f64,
                    None if c > 0 => s / c as f64,
                    None => continue,
                };
                acc.push(value);
            }
        }
        let var = acc.population_variance().ok_or(ImagingError::InsufficientPixels {
            index: None,
            found: acc.count(),
        })?;
        Ok(n as f64 * var)
    }
}
