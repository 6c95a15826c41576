//! Simulation config file: TOML with `[scene]`, `[capture]` and
//! `[perturbation]` sections. Every field is optional and falls back to the
//! default benchmark. Angles are given in degrees.

use aperture_core::simulate::{density_for_coverage, GroundTexture, OccluderLayer, SimulateError, Target};
use aperture_core::{CameraIntrinsics, CaptureSpec, PerturbationSpec, SceneSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    pub scene: SceneSection,
    pub capture: CaptureSection,
    pub perturbation: PerturbationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub ground_extent: [f64; 2],
    pub ground_tilt_deg: [f64; 2],
    pub ground: GroundTexture,
    pub targets: Vec<TargetEntry>,
    pub occluders: OccluderSection,
    pub reference: ReferenceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    pub center: [f64; 2],
    pub radius: f64,
    pub intensity: f64,
}

/// Occluder disks. `coverage` sets the density that occludes that fraction
/// of the ground and excludes `density`; with neither, half the ground is
/// covered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccluderSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    pub radius: f64,
    pub height: f64,
    pub intensity_mean: f64,
    pub intensity_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub extent: [f64; 2],
    pub resolution: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureSection {
    pub grid: [usize; 2],
    pub aperture_extent: [f64; 2],
    pub altitude: f64,
    pub focal_length_px: f64,
    pub image_size: [usize; 2],
    pub pixel_noise_sigma: f64,
    pub supersample: usize,
    pub psf_sigma: f64,
}

/// Standard deviations in meters and degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSection {
    pub sigma_t_x: f64,
    pub sigma_t_y: f64,
    pub sigma_t_z: f64,
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
    pub sigma_gamma: f64,
    /// Defaults to the top-level seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scene: SceneSection::default(),
            capture: CaptureSection::default(),
            perturbation: PerturbationSection::default(),
        }
    }
}

impl Default for SceneSection {
    fn default() -> Self {
        let s = SceneSpec::default();
        Self {
            ground_extent: s.ground_extent.into(),
            ground_tilt_deg: [s.ground_tilt.0.to_degrees(), s.ground_tilt.1.to_degrees()],
            ground: s.ground_texture,
            targets: s
                .targets
                .iter()
                .map(|t| TargetEntry {
                    center: t.center.into(),
                    radius: t.radius,
                    intensity: t.intensity,
                })
                .collect(),
            occluders: OccluderSection::default(),
            reference: ReferenceSection::default(),
        }
    }
}

impl Default for OccluderSection {
    fn default() -> Self {
        let o = SceneSpec::default().occluder_layer;
        Self {
            density: None,
            coverage: None,
            radius: o.radius,
            height: o.height,
            intensity_mean: o.intensity_mean,
            intensity_variance: o.intensity_variance,
        }
    }
}

impl Default for ReferenceSection {
    fn default() -> Self {
        let s = SceneSpec::default();
        Self {
            extent: s.reference_extent.into(),
            resolution: s.reference_resolution.into(),
        }
    }
}

impl Default for CaptureSection {
    fn default() -> Self {
        let c = CaptureSpec::default();
        Self {
            grid: c.grid.into(),
            aperture_extent: c.aperture_extent.into(),
            altitude: c.altitude,
            focal_length_px: c.intrinsics.focal_length_px,
            image_size: c.intrinsics.image_size.into(),
            pixel_noise_sigma: c.pixel_noise_sigma,
            supersample: c.supersample,
            psf_sigma: c.psf_sigma,
        }
    }
}

impl Default for PerturbationSection {
    fn default() -> Self {
        let p = PerturbationSpec::default();
        Self {
            sigma_t_x: p.sigma[0],
            sigma_t_y: p.sigma[1],
            sigma_t_z: p.sigma[2],
            sigma_alpha: p.sigma[3].to_degrees(),
            sigma_beta: p.sigma[4].to_degrees(),
            sigma_gamma: p.sigma[5].to_degrees(),
            seed: None,
        }
    }
}

/// Validated core specs built from a config.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub seed: u64,
    pub scene: SceneSpec,
    pub capture: CaptureSpec,
    pub perturbation: PerturbationSpec,
}

impl SimulationConfig {
    /// Parses and validates `text`; `origin` names the source in messages.
    pub fn parse(text: &str, origin: &str) -> Result<(Self, ResolvedConfig), CliError> {
        let config: SimulationConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        let resolved = config.resolve().map_err(|(key, message)| {
            let at = key_line(text, &key).map(|l| format!(":{l}")).unwrap_or_default();
            CliError::Config(format!("{origin}{at}: invalid `{key}`: {message}"))
        })?;
        Ok((config, resolved))
    }

    pub fn resolve(&self) -> Result<ResolvedConfig, (String, String)> {
        let o = &self.scene.occluders;
        let density = match (o.density, o.coverage) {
            (Some(_), Some(_)) => {
                return Err((
                    "scene.occluders.coverage".into(),
                    "give either `density` or `coverage`, not both".into(),
                ))
            }
            (None, Some(c)) => {
                if !(0.0..1.0).contains(&c) {
                    return Err((
                        "scene.occluders.coverage".into(),
                        format!("must lie in [0, 1), got {c}"),
                    ));
                }
                density_for_coverage(c, o.radius)
            }
            (Some(d), None) => d,
            (None, None) => density_for_coverage(0.5, o.radius),
        };
        let s = &self.scene;
        let scene = SceneSpec {
            ground_extent: (s.ground_extent[0], s.ground_extent[1]),
            ground_texture: s.ground.clone(),
            ground_tilt: (s.ground_tilt_deg[0].to_radians(), s.ground_tilt_deg[1].to_radians()),
            targets: s
                .targets
                .iter()
                .map(|t| Target {
                    center: (t.center[0], t.center[1]),
                    radius: t.radius,
                    intensity: t.intensity,
                })
                .collect(),
            occluder_layer: OccluderLayer {
                density,
                radius: o.radius,
                height: o.height,
                intensity_mean: o.intensity_mean,
                intensity_variance: o.intensity_variance,
            },
            reference_extent: (s.reference.extent[0], s.reference.extent[1]),
            reference_resolution: (s.reference.resolution[0], s.reference.resolution[1]),
        };
        scene.validate().map_err(spec_error)?;

        let c = &self.capture;
        let intrinsics = CameraIntrinsics::centered(c.focal_length_px, c.image_size[0], c.image_size[1])
            .map_err(|e| ("capture.focal_length_px".to_string(), e.to_string()))?;
        let capture = CaptureSpec {
            grid: (c.grid[0], c.grid[1]),
            aperture_extent: (c.aperture_extent[0], c.aperture_extent[1]),
            altitude: c.altitude,
            intrinsics,
            pixel_noise_sigma: c.pixel_noise_sigma,
            supersample: c.supersample,
            psf_sigma: c.psf_sigma,
        };
        capture.validate(&scene).map_err(spec_error)?;

        let p = &self.perturbation;
        let perturbation = PerturbationSpec {
            sigma: [
                p.sigma_t_x,
                p.sigma_t_y,
                p.sigma_t_z,
                p.sigma_alpha.to_radians(),
                p.sigma_beta.to_radians(),
                p.sigma_gamma.to_radians(),
            ],
            seed: p.seed.unwrap_or(self.seed),
        };
        perturbation.validate().map_err(spec_error)?;
        Ok(ResolvedConfig {
            seed: self.seed,
            scene,
            capture,
            perturbation,
        })
    }
}

fn spec_error(e: SimulateError) -> (String, String) {
    match e {
        SimulateError::InvalidSpec { key, message } => (key, message),
        other => ("config".into(), other.to_string()),
    }
}

/// 1-based line on which the dotted `key` is assigned, following `[table]`
/// headers.
pub fn key_line(text: &str, key: &str) -> Option<usize> {
    let mut table = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(h) = line.strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
            table = h.trim().to_string();
            if table == key {
                return Some(i + 1);
            }
        } else if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = h.trim().to_string();
        } else if let Some((k, _)) = line.split_once('=') {
            let k = k.trim();
            let full = if table.is_empty() {
                k.to_string()
            } else {
                format!("{table}.{k}")
            };
            if full == key {
                return Some(i + 1);
            }
        }
    }
    None
}
