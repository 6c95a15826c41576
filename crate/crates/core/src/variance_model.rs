//! Closed-form occlusion statistics of single and integral images.
//!
//! A single-image pixel is `X_i = Z_i * O_i + (1 - Z_i) * S` where `Z_i` is a
//! Bernoulli occlusion indicator with success probability `D`, `O_i` is the
//! occluder value seen by view `i` and `S` is the occlusion-free signal, shared
//! by every view of the same pixel. The integral pixel is the mean of `N`
//! such views.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("occlusion probability must lie in [0, 1], got {0}")]
    Probability(f64),
    #[error("{name} must be a non-negative finite variance, got {value}")]
    Variance { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("image count must be at least 1")]
    ZeroImages,
    #[error("at least 2 pixels are required, got {0}")]
    TooFewPixels(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionStats {
    /// Occlusion probability `D`.
    pub d: f64,
    pub mu_o: f64,
    pub sigma2_o: f64,
    pub mu_s: f64,
    pub sigma2_s: f64,
}

impl OcclusionStats {
    pub fn new(d: f64, mu_o: f64, sigma2_o: f64, mu_s: f64, sigma2_s: f64) -> Result<Self, ModelError> {
        let s = Self {
            d,
            mu_o,
            sigma2_o,
            mu_s,
            sigma2_s,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.d) {
            return Err(ModelError::Probability(self.d));
        }
        for (name, value) in [("mu_o", self.mu_o), ("mu_s", self.mu_s)] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { name, value });
            }
        }
        for (name, value) in [("sigma2_o", self.sigma2_o), ("sigma2_s", self.sigma2_s)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::Variance { name, value });
            }
        }
        Ok(())
    }
}

/// First and second moments of a pixel distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

/// `Var[X_i] = D(1-D)(mu_o - mu_s)^2 + D sigma2_o + (1-D) sigma2_s`.
pub fn var_single(s: &OcclusionStats) -> f64 {
    let d = s.d;
    let dm = s.mu_o - s.mu_s;
    d * (1.0 - d) * dm * dm + d * s.sigma2_o + (1.0 - d) * s.sigma2_s
}

/// `Var[X] = Var[X_i] / N + (1-D)^2 (1 - 1/N) sigma2_s`.
pub fn var_integral(s: &OcclusionStats, n: usize) -> Result<f64, ModelError> {
    if n == 0 {
        return Err(ModelError::ZeroImages);
    }
    let nf = n as f64;
    let od = 1.0 - s.d;
    Ok(var_single(s) / nf + od * od * (1.0 - 1.0 / nf) * s.sigma2_s)
}

/// Moments of the integral pixel, from the raw first and second moments
/// rather than the variance shortcut.
pub fn model_moments(s: &OcclusionStats, n: usize) -> Result<ModelMoments, ModelError> {
    if n == 0 {
        return Err(ModelError::ZeroImages);
    }
    let nf = n as f64;
    let d = s.d;
    let od = 1.0 - d;
    let mean = d * s.mu_o + od * s.mu_s;
    // E[X_i^2]
    let own = d * (s.sigma2_o + s.mu_o * s.mu_o) + od * (s.sigma2_s + s.mu_s * s.mu_s);
    // E[X_i X_j] for i != j; the signal is shared, the occluders are not.
    let cross = d * d * s.mu_o * s.mu_o + 2.0 * d * od * s.mu_s * s.mu_o + od * od * (s.sigma2_s + s.mu_s * s.mu_s);
    let second_moment = (nf * own + nf * (nf - 1.0) * cross) / (nf * nf);
    Ok(ModelMoments {
        mean,
        second_moment,
        variance: second_moment - mean * mean,
    })
}

/// Empirical moments of simulated integral pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub moments: ModelMoments,
    /// Standard error of the empirical mean.
    pub mean_std_error: f64,
    /// Standard error of the empirical variance.
    pub variance_std_error: f64,
    pub num_pixels: usize,
}

const MC_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, Default)]
struct Moments4 {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments4 {
    fn push(&mut self, x: f64) {
        let n1 = self.n;
        self.n += 1.0;
        let n = self.n;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2 - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    fn merge(a: Self, b: Self) -> Self {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let delta = b.mean - a.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let mean = a.mean + delta * b.n / n;
        let m2 = a.m2 + b.m2 + d2 * a.n * b.n / n;
        let m3 = a.m3 + b.m3 + d3 * a.n * b.n * (a.n - b.n) / (n * n) + 3.0 * delta * (a.n * b.m2 - b.n * a.m2) / n;
        let m4 = a.m4
            + b.m4
            + d4 * a.n * b.n * (a.n * a.n - a.n * b.n + b.n * b.n) / (n * n * n)
            + 6.0 * d2 * (a.n * a.n * b.m2 + b.n * b.n * a.m2) / (n * n)
            + 4.0 * delta * (a.n * b.m3 - b.n * a.m3) / n;
        Self { n, mean, m2, m3, m4 }
    }
}

fn chunk_seed(seed: u64, chunk: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ chunk.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples `num_pixels` integral pixels of `n` views each and returns their
/// empirical moments. Pixels are generated in fixed-size chunks with
/// per-chunk seeds, so the result does not depend on the thread count.
pub fn monte_carlo_integral(
    s: &OcclusionStats,
    n: usize,
    num_pixels: usize,
    seed: u64,
) -> Result<MonteCarloEstimate, ModelError> {
    s.validate()?;
    if n == 0 {
        return Err(ModelError::ZeroImages);
    }
    if num_pixels < 2 {
        return Err(ModelError::TooFewPixels(num_pixels));
    }
    let occluder = Normal::new(s.mu_o, s.sigma2_o.sqrt()).expect("validated variance");
    let signal = Normal::new(s.mu_s, s.sigma2_s.sqrt()).expect("validated variance");
    let chunks = num_pixels.div_ceil(MC_CHUNK);

    let partials: Vec<Moments4> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(seed, c as u64));
            let len = MC_CHUNK.min(num_pixels - c * MC_CHUNK);
            let mut acc = Moments4::default();
            for _ in 0..len {
                let sig = signal.sample(&mut rng);
                let mut sum = 0.0;
                for _ in 0..n {
                    let occluded = rng.random::<f64>() < s.d;
                    sum += if occluded { occluder.sample(&mut rng) } else { sig };
                }
                acc.push(sum / n as f64);
            }
            acc
        })
        .collect();
    let total = partials.into_iter().fold(Moments4::default(), Moments4::merge);

    let np = total.n;
    let variance = total.m2 / np;
    let m4 = total.m4 / np;
    let moments = ModelMoments {
        mean: total.mean,
        second_moment: variance + total.mean * total.mean,
        variance,
    };
    Ok(MonteCarloEstimate {
        moments,
        mean_std_error: (variance / np).sqrt(),
        variance_std_error: ((m4 - variance * variance).max(0.0) / np).sqrt(),
        num_pixels,
    })
}
