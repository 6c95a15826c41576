//! Synthetic-aperture integration with focus-driven pose refinement.
//!
//! Single views are warped onto a synthetic focal plane and averaged into an
//! integral image. Residual pose errors defocus that integral; they are
//! reduced by maximizing its normalized gray-level variance one view at a
//! time, over a reduced set of pose parameters.
//!
//! * [`geometry`]: pinhole model, poses, plane homographies, pose-error analysis.
//! * [`variance_model`]: closed-form occlusion statistics and a Monte-Carlo check.
//! * [`imaging`]: rasters, PFM/PGM I/O, warping, accumulation, GLV.
//! * [`refine`]: Nelder-Mead, per-view refinement, integration strategies.
//! * [`simulate`]: synthetic occluded scenes, pose noise and evaluation.

pub mod geometry;
pub mod imaging;
pub mod refine;
pub mod simulate;
pub mod variance_model;

pub use geometry::{CameraIntrinsics, FocalPlane, GeometryError, PoseParam, PoseParams};
pub use imaging::{ImageRaster, ImagingError, IntegralAccumulator, Interpolation, Roi};
pub use refine::{NelderMeadConfig, RefineError, RefinementResult, SearchSpace, StrategyConfig, StrategyKind};
pub use simulate::{CaptureSpec, PerturbationSpec, SceneSpec};
pub use variance_model::{ModelMoments, OcclusionStats};
