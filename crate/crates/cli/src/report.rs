use std::fs;
use std::path::Path;

use aperture_core::refine::{StepFailure, StepRecord};
use aperture_core::simulate::EvaluationMetrics;
use aperture_core::{FocalPlane, Roi, StrategyKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Settings a refinement ran with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineSettings {
    pub dataset: String,
    pub poses: String,
    pub space: String,
    pub active_params: Vec<String>,
    pub strategy: StrategyKind,
    pub patience: usize,
    pub roi: Roi,
    pub plane: FocalPlane,
    pub auto_plane: bool,
    pub interpolation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneReport {
    pub height: f64,
    pub normal: [f64; 3],
    pub glv: f64,
    /// `(height, glv)` per coarse sample.
    pub grid: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_s: f64,
    pub plane_s: f64,
    pub refine_s: f64,
    pub write_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: usize,
    pub image: String,
    pub loaded: bool,
    pub optimized: bool,
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub settings: RefineSettings,
    pub plane_search: Option<PlaneReport>,
    pub images: Vec<ImageEntry>,
    /// Image ids in processing order.
    pub order: Vec<usize>,
    pub objective_trace: Vec<f64>,
    pub candidate_trace: Vec<f64>,
    pub n_stop: usize,
    pub unrefined_objective: Option<f64>,
    pub final_objective: f64,
    pub parameter_evaluations: usize,
    pub baseline_parameter_evaluations: usize,
    pub objective_evaluations: usize,
    pub steps: Vec<StepRecord>,
    /// Images that could not be loaded, warped or refined.
    pub failures: Vec<StepFailure>,
    /// Present when the dataset carries true poses and a reference image.
    pub metrics: Option<EvaluationMetrics>,
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("run report: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }
}
