use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RefineError;
use crate::geometry::{PoseParam, PoseParams};

pub const DEFAULT_TRANSLATION_STEP: f64 = 0.5;
pub const DEFAULT_ROTATION_STEP_DEG: f64 = 1.0;
pub const DEFAULT_TRANSLATION_BOUND: f64 = 3.0;
pub const DEFAULT_ROTATION_BOUND_DEG: f64 = 5.0;

/// Named parameter subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacePreset {
    /// `t_x, t_y, t_z, alpha, beta, gamma`
    Six,
    /// `t_x, t_y, t_z, gamma`
    Four,
    /// `t_x, t_y, gamma`
    Three,
    /// `t_x, t_y`
    Two,
}

impl SpacePreset {
    pub fn params(self) -> &'static [PoseParam] {
        use PoseParam::*;
        match self {
            SpacePreset::Six => &[Tx, Ty, Tz, Alpha, Beta, Gamma],
            SpacePreset::Four => &[Tx, Ty, Tz, Gamma],
            SpacePreset::Three => &[Tx, Ty, Gamma],
            SpacePreset::Two => &[Tx, Ty],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpacePreset::Six => "six",
            SpacePreset::Four => "four",
            SpacePreset::Three => "three",
            SpacePreset::Two => "two",
        }
    }
}

impl fmt::Display for SpacePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpacePreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "six" | "6" => Ok(SpacePreset::Six),
            "four" | "4" => Ok(SpacePreset::Four),
            "three" | "3" => Ok(SpacePreset::Three),
            "two" | "2" => Ok(SpacePreset::Two),
            other => Err(format!(
                "unknown search space `{other}` (expected six, four, three or two)"
            )),
        }
    }
}

/// Which pose parameters a refinement may change, with the initial simplex
/// step and the symmetric search bound for each (meters or radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub active_params: Vec<PoseParam>,
    pub initial_step: [f64; 6],
    pub bounds: [f64; 6],
}

impl SearchSpace {
    pub fn new(active_params: Vec<PoseParam>) -> Result<Self, RefineError> {
        let t_step = DEFAULT_TRANSLATION_STEP;
        let r_step = DEFAULT_ROTATION_STEP_DEG.to_radians();
        let t_bound = DEFAULT_TRANSLATION_BOUND;
        let r_bound = DEFAULT_ROTATION_BOUND_DEG.to_radians();
        let space = Self {
            active_params,
            initial_step: [t_step, t_step, t_step, r_step, r_step, r_step],
            bounds: [t_bound, t_bound, t_bound, r_bound, r_bound, r_bound],
        };
        space.validate()?;
        Ok(space)
    }

    pub fn preset(preset: SpacePreset) -> Self {
        Self::new(preset.params().to_vec()).expect("presets are valid")
    }

    pub fn six() -> Self {
        Self::preset(SpacePreset::Six)
    }

    pub fn four() -> Self {
        Self::preset(SpacePreset::Four)
    }

    pub fn three() -> Self {
        Self::preset(SpacePreset::Three)
    }

    pub fn two() -> Self {
        Self::preset(SpacePreset::Two)
    }

    pub fn validate(&self) -> Result<(), RefineError> {
        if self.active_params.is_empty() {
            return Err(RefineError::InvalidConfig(
                "search space must contain a parameter".into(),
            ));
        }
        for (i, p) in self.active_params.iter().enumerate() {
            if self.active_params[..i].contains(p) {
                return Err(RefineError::InvalidConfig(format!("parameter {p} listed twice")));
            }
            let (step, bound) = (self.initial_step[p.index()], self.bounds[p.index()]);
            if !(step > 0.0 && step.is_finite()) || !(bound > 0.0) {
                return Err(RefineError::InvalidConfig(format!(
                    "parameter {p} needs a positive step and bound (got {step}, {bound})"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.active_params.len()
    }

    /// Pose obtained by moving the active parameters of `base` by
    /// `scaled[i] * initial_step`. `None` if any offset exceeds its bound.
    pub fn apply_scaled(&self, base: &PoseParams, scaled: &[f64]) -> Option<PoseParams> {
        let mut v = base.to_array();
        for (p, z) in self.active_params.iter().zip(scaled) {
            let offset = z * self.initial_step[p.index()];
            if !(offset.abs() <= self.bounds[p.index()]) {
                return None;
            }
            v[p.index()] += offset;
        }
        Some(PoseParams::from_array(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        assert_eq!(SearchSpace::six().dim(), 6);
        assert_eq!(SearchSpace::four().dim(), 4);
        assert_eq!(
            SearchSpace::three().active_params,
            vec![PoseParam::Tx, PoseParam::Ty, PoseParam::Gamma]
        );
        assert_eq!(SearchSpace::two().dim(), 2);
        assert_eq!("three".parse::<SpacePreset>().unwrap(), SpacePreset::Three);
        assert!("seven".parse::<SpacePreset>().is_err());
    }

    #[test]
    fn validation() {
        assert!(SearchSpace::new(vec![]).is_err());
        assert!(SearchSpace::new(vec![PoseParam::Tx, PoseParam::Tx]).is_err());
        let mut s = SearchSpace::two();
        s.initial_step[0] = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn scaled_offsets_respect_bounds() {
        let s = SearchSpace::three();
        let base = PoseParams::nadir(1.0, 2.0, 30.0);
        let moved = s.apply_scaled(&base, &[1.0, -2.0, 1.0]).unwrap();
        assert!((moved.t_x - 1.5).abs() < 1e-12);
        assert!((moved.t_y - 1.0).abs() < 1e-12);
        assert!((moved.gamma - 1f64.to_radians()).abs() < 1e-12);
        assert_eq!(moved.t_z, 30.0);
        // 7 steps of 0.5 m exceed the 3 m bound.
        assert!(s.apply_scaled(&base, &[7.0, 0.0, 0.0]).is_none());
    }
}
