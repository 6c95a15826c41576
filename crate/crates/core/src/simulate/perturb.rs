use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimulateError;
use crate::geometry::{PoseParam, PoseParams};

/// Zero-mean Gaussian pose noise, one standard deviation per parameter in
/// `PoseParam` order (meters, radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub sigma: [f64; 6],
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(sigma: [f64; 6], seed: u64) -> Result<Self, SimulateError> {
        let spec = Self { sigma, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none() -> Self {
        Self {
            sigma: [0.0; 6],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        for p in PoseParam::ALL {
            let s = self.sigma[p.index()];
            if !(s >= 0.0 && s.is_finite()) {
                return Err(SimulateError::InvalidSpec {
                    key: format!("perturbation.sigma_{}", p.name()),
                    message: format!("must be >= 0, got {s}"),
                });
            }
        }
        Ok(())
    }
}

impl Default for PerturbationSpec {
    /// 0.3 m in `t_x`/`t_y` and 0.5 degrees in `gamma`.
    fn default() -> Self {
        Self {
            sigma: [0.3, 0.3, 0.0, 0.0, 0.0, 0.5f64.to_radians()],
            seed: 1,
        }
    }
}

/// Adds independent noise to every parameter with a positive sigma. Poses
/// are processed in order from a single stream seeded by `spec.seed`.
pub fn perturb_poses(poses: &[PoseParams], spec: &PerturbationSpec) -> Result<Vec<PoseParams>, SimulateError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dists: Vec<Option<Normal<f64>>> = spec
        .sigma
        .iter()
        .map(|&s| (s > 0.0).then(|| Normal::new(0.0, s).expect("validated sigma")))
        .collect();
    Ok(poses
        .iter()
        .map(|pose| {
            let mut v = pose.to_array();
            for (x, d) in v.iter_mut().zip(&dists) {
                if let Some(d) = d {
                    *x += d.sample(&mut rng);
                }
            }
            PoseParams::from_array(v)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_identity() {
        let poses: Vec<_> = (0..5)
            .map(|i| PoseParams::new(i as f64, 1.0, 30.0, 0.1, -0.2, 0.3))
            .collect();
        assert_eq!(perturb_poses(&poses, &PerturbationSpec::none()).unwrap(), poses);
    }

    #[test]
    fn seeded_and_unbiased() {
        let poses = vec![PoseParams::nadir(0.0, 0.0, 30.0); 10_000];
        let spec = PerturbationSpec::default();
        let a = perturb_poses(&poses, &spec).unwrap();
        assert_eq!(a, perturb_poses(&poses, &spec).unwrap());
        let mean = a.iter().map(|p| p.t_x).sum::<f64>() / a.len() as f64;
        let se = 0.3 / (a.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "{mean}");
        assert!(a.iter().all(|p| p.t_z == 30.0 && p.alpha == 0.0));
    }

    #[test]
    fn negative_sigma_names_parameter() {
        let err = PerturbationSpec::new([0.0, -1.0, 0.0, 0.0, 0.0, 0.0], 0).unwrap_err();
        assert!(err.to_string().contains("sigma_t_y"), "{err}");
    }
}
