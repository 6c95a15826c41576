//! Downhill simplex search.

use serde::{Deserialize, Serialize};

use super::RefineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Terminate once the objective spread over the simplex is at most this...
    pub f_tolerance: f64,
    /// ...and every vertex lies within this max-norm distance of the best one.
    pub x_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            f_tolerance: 1e-12,
            x_tolerance: 1e-9,
            max_iterations: 5000,
        }
    }
}

impl NelderMeadConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        let ok = self.reflection > 0.0
            && self.expansion > self.reflection
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.f_tolerance >= 0.0
            && self.x_tolerance >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(RefineError::InvalidConfig(format!(
                "Nelder-Mead coefficients out of range: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

struct Vertex {
    x: Vec<f64>,
    /// Objective in minimization form; NaN mapped to +inf.
    g: f64,
}

/// Optimizes `objective` starting from `x0` with an axis-aligned initial
/// simplex of edge lengths `steps`.
///
/// The returned point is the best one evaluated, `x0` included, so its value
/// is never worse than `objective(x0)`.
pub fn nelder_mead(
    mut objective: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    config: &NelderMeadConfig,
    sense: Sense,
) -> Result<NelderMeadResult, RefineError> {
    config.validate()?;
    let k = x0.len();
    if k == 0 || steps.len() != k {
        return Err(RefineError::InvalidConfig(format!(
            "need a nonempty start point with one step per coordinate (got {} and {})",
            k,
            steps.len()
        )));
    }
    let sign = match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| -> f64 {
        evaluations += 1;
        let g = sign * objective(x);
        if g.is_nan() {
            f64::INFINITY
        } else {
            g
        }
    };

    let f0 = sign * eval(x0);
    if !f0.is_finite() {
        return Err(RefineError::NonFiniteObjective(f0));
    }
    let mut best = Vertex {
        x: x0.to_vec(),
        g: sign * f0,
    };
    let finish = |best: Vertex, converged, iterations, evaluations| NelderMeadResult {
        x: best.x,
        f: sign * best.g,
        converged,
        iterations,
        evaluations,
    };
    if config.max_iterations == 0 {
        return Ok(finish(best, false, 0, evaluations));
    }

    let mut simplex = Vec::with_capacity(k + 1);
    simplex.push(Vertex {
        x: x0.to_vec(),
        g: best.g,
    });
    for i in 0..k {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let g = eval(&x);
        simplex.push(Vertex { x, g });
    }

    let mut converged = false;
    let mut iterations = 0;
    let point = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect() };

    loop {
        simplex.sort_by(|a, b| a.g.total_cmp(&b.g));
        if simplex[0].g < best.g {
            best = Vertex {
                x: simplex[0].x.clone(),
                g: simplex[0].g,
            };
        }
        let spread_f = simplex[k].g - simplex[0].g;
        let spread_x = simplex[1..]
            .iter()
            .flat_map(|v| v.x.iter().zip(&simplex[0].x).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if spread_f <= config.f_tolerance && spread_x <= config.x_tolerance {
            converged = true;
            break;
        }
        if iterations >= config.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; k];
        for v in &simplex[..k] {
            for (c, x) in centroid.iter_mut().zip(&v.x) {
                *c += x / k as f64;
            }
        }
        let worst = &simplex[k];
        // x_r = c + rho (c - x_w)
        let xr = point(&centroid, &worst.x, -config.reflection);
        let gr = eval(&xr);

        if gr < simplex[0].g {
            let xe = point(&centroid, &worst.x, -config.reflection * config.expansion);
            let ge = eval(&xe);
            simplex[k] = if ge < gr {
                Vertex { x: xe, g: ge }
            } else {
                Vertex { x: xr, g: gr }
            };
            continue;
        }
        if gr < simplex[k - 1].g {
            simplex[k] = Vertex { x: xr, g: gr };
            continue;
        }
        let accepted = if gr < simplex[k].g {
            let xc = point(&centroid, &xr, config.contraction);
            let gc = eval(&xc);
            (gc <= gr).then_some(Vertex { x: xc, g: gc })
        } else {
            let xc = point(&centroid, &simplex[k].x, config.contraction);
            let gc = eval(&xc);
            (gc < simplex[k].g).then_some(Vertex { x: xc, g: gc })
        };
        match accepted {
            Some(v) => simplex[k] = v,
            None => {
                let anchor = simplex[0].x.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.x = point(&anchor, &v.x, config.shrink);
                    v.g = eval(&v.x);
                }
            }
        }
    }
    Ok(finish(best, converged, iterations, evaluations))
}
