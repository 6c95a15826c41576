use super::{ImageRaster, ImagingError, Roi};

/// Running population variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RunningVariance {
    n: usize,
    mean: f64,
    m2: f64,
}

impl RunningVariance {
    #[inline]
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub(crate) fn count(&self) -> usize {
        self.n
    }

    pub(crate) fn population_variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.m2 / self.n as f64)
    }
}

/// Gray-level variance: population variance of the valid samples in `roi`.
pub fn glv(image: &ImageRaster, roi: &Roi) -> Result<f64, ImagingError> {
    roi.check(image.dims())?;
    let mut acc = RunningVariance::default();
    for y in roi.rows() {
        for x in roi.cols() {
            if let Some(v) = image.get(x, y) {
                acc.push(v as f64);
            }
        }
    }
    acc.population_variance().ok_or(ImagingError::InsufficientPixels {
        index: None,
        found: acc.count(),
    })
}

/// Indices ordered by non-increasing GLV; ties keep the input order.
pub fn sort_by_glv(images: &[ImageRaster], roi: &Roi) -> Result<Vec<usize>, ImagingError> {
    let values = images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            glv(img, roi).map_err(|e| match e {
                ImagingError::InsufficientPixels { found, .. } => {
                    ImagingError::InsufficientPixels { index: Some(i), found }
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(order_by_value(&values))
}

/// Indices of `values` sorted descending, stable.
pub fn order_by_value(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}
