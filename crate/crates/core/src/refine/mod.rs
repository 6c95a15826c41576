//! Focus-driven pose refinement.
//!
//! Views are processed in order of decreasing gray-level variance. The first
//! one fixes the reference frame; every later view has its active pose
//! parameters optimized with Nelder-Mead to maximize the normalized variance
//! `N * Var[X]` of the integral it joins, while the previously integrated
//! views stay frozen.

mod focal_plane;
mod nelder_mead;
mod pose_refine;
mod search_space;
mod strategy;

use thiserror::Error;

use crate::imaging::ImagingError;

pub use focal_plane::{default_plane_config, optimize_focal_plane, plane_at, plane_glv, PlaneSearch};
pub use nelder_mead::{nelder_mead, NelderMeadConfig, NelderMeadResult, Sense};
pub use pose_refine::{candidate_objective, default_refine_config, refine_image_pose, PoseRefinement, RefineContext};
pub use search_space::{
    SearchSpace, SpacePreset, DEFAULT_ROTATION_BOUND_DEG, DEFAULT_ROTATION_STEP_DEG, DEFAULT_TRANSLATION_BOUND,
    DEFAULT_TRANSLATION_STEP,
};
pub use strategy::{
    glv_order, integrate_views, run_strategy, RefinementResult, StepDecision, StepFailure, StepRecord, StrategyConfig,
    StrategyKind, StrategyTracker,
};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("objective is not finite at the start point ({0})")]
    NonFiniteObjective(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no usable images")]
    NoImages,
    #[error("{images} images but {poses} poses")]
    LengthMismatch { images: usize, poses: usize },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

impl From<crate::geometry::GeometryError> for RefineError {
    fn from(e: crate::geometry::GeometryError) -> Self {
        RefineError::Imaging(e.into())
    }
}
