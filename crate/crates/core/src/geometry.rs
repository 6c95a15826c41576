//! Pinhole camera model, pose parameterization and plane-induced homographies.
//!
//! Conventions used throughout the crate:
//!
//! * The world frame is right-handed with `z` pointing up; ground is `z = 0`.
//! * The camera frame has `x` right, `y` down and `z` forward along the optical
//!   axis. At zero angles the camera looks straight down (nadir, world `-z`)
//!   with image `x` along world `+x` and image `y` along world `-y`.
//! * The world-to-camera rotation is `B * R(alpha, beta, gamma)` where
//!   `R = Rx(alpha) * Ry(beta) * Rz(gamma)` and `B = diag(1, -1, -1)` is the
//!   fixed nadir mount. The translation column is derived from the stored
//!   camera center as `t = -W * C`.
//! * With this mount a positive `beta` tilts the view towards world `+x` and a
//!   positive `alpha` tilts it towards world `-y`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point lies behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("no sample point is visible from both poses")]
    NoVisiblePoints,
    #[error("focal plane is degenerate for this view: {0}")]
    DegenerateView(&'static str),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid focal plane: {0}")]
    InvalidPlane(String),
}

/// Pinhole intrinsics with square pixels and no skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal_length_px: f64,
    pub principal_point: (f64, f64),
    pub image_size: (usize, usize),
}

impl CameraIntrinsics {
    pub fn new(
        focal_length_px: f64,
        principal_point: (f64, f64),
        image_size: (usize, usize),
    ) -> Result<Self, GeometryError> {
        let k = Self {
            focal_length_px,
            principal_point,
            image_size,
        };
        k.validate()?;
        Ok(k)
    }

    /// Intrinsics with the principal point at the image center.
    pub fn centered(focal_length_px: f64, width: usize, height: usize) -> Result<Self, GeometryError> {
        Self::new(
            focal_length_px,
            ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0),
            (width, height),
        )
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.focal_length_px.is_finite() && self.focal_length_px > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal length must be positive, got {}",
                self.focal_length_px
            )));
        }
        let (w, h) = self.image_size;
        let (cx, cy) = self.principal_point;
        if w == 0 || h == 0 {
            return Err(GeometryError::InvalidIntrinsics("image size must be nonzero".into()));
        }
        if !(cx >= 0.0 && cx <= w as f64 && cy >= 0.0 && cy <= h as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {w}x{h} image"
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let f = self.focal_length_px;
        let (cx, cy) = self.principal_point;
        Matrix3::new(f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0)
    }
}

/// One of the six extrinsic parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseParam {
    Tx,
    Ty,
    Tz,
    Alpha,
    Beta,
    Gamma,
}

impl PoseParam {
    pub const ALL: [PoseParam; 6] = [
        PoseParam::Tx,
        PoseParam::Ty,
        PoseParam::Tz,
        PoseParam::Alpha,
        PoseParam::Beta,
        PoseParam::Gamma,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, PoseParam::Alpha | PoseParam::Beta | PoseParam::Gamma)
    }

    pub fn name(self) -> &'static str {
        match self {
            PoseParam::Tx => "t_x",
            PoseParam::Ty => "t_y",
            PoseParam::Tz => "t_z",
            PoseParam::Alpha => "alpha",
            PoseParam::Beta => "beta",
            PoseParam::Gamma => "gamma",
        }
    }
}

impl fmt::Display for PoseParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoseParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "t_x" | "tx" => Ok(PoseParam::Tx),
            "t_y" | "ty" => Ok(PoseParam::Ty),
            "t_z" | "tz" => Ok(PoseParam::Tz),
            "alpha" => Ok(PoseParam::Alpha),
            "beta" => Ok(PoseParam::Beta),
            "gamma" => Ok(PoseParam::Gamma),
            other => Err(format!("unknown pose parameter `{other}`")),
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Camera pose: the camera center in world coordinates plus three Euler angles
/// in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseParams {
    pub t_x: f64,
    pub t_y: f64,
    pub t_z: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl PoseParams {
    pub fn new(t_x: f64, t_y: f64, t_z: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            t_x,
            t_y,
            t_z,
            alpha: normalize_angle(alpha),
            beta: normalize_angle(beta),
            gamma: normalize_angle(gamma),
        }
    }

    /// Nadir-looking camera at the given center.
    pub fn nadir(t_x: f64, t_y: f64, t_z: f64) -> Self {
        Self::new(t_x, t_y, t_z, 0.0, 0.0, 0.0)
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.t_x, self.t_y, self.t_z, self.alpha, self.beta, self.gamma]
    }

    pub fn get(&self, p: PoseParam) -> f64 {
        self.to_array()[p.index()]
    }

    pub fn set(&mut self, p: PoseParam, value: f64) {
        let mut v = self.to_array();
        v[p.index()] = value;
        *self = Self::from_array(v);
    }

    pub fn with_offset(&self, p: PoseParam, delta: f64) -> Self {
        let mut out = *self;
        out.set(p, self.get(p) + delta);
        out
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(self.t_x, self.t_y, self.t_z)
    }

    /// World-to-camera rotation `W`.
    pub fn world_to_camera(&self) -> Matrix3<f64> {
        nadir_mount() * rotation_from_euler(self.alpha, self.beta, self.gamma)
    }

    /// Translation column `t = -W C` of the extrinsic matrix.
    pub fn translation(&self) -> Vector3<f64> {
        -(self.world_to_camera() * self.center())
    }

    /// Optical axis direction in world coordinates.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.world_to_camera().transpose() * Vector3::z()
    }
}

fn nadir_mount() -> Matrix3<f64> {
    Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0)
}

/// `R = Rx(alpha) * Ry(beta) * Rz(gamma)` (active rotations, applied z first).
pub fn rotation_from_euler(alpha: f64, beta: f64, gamma: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, ca, -sa, 0.0, sa, ca);
    let ry = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
    let rz = Matrix3::new(cg, -sg, 0.0, sg, cg, 0.0, 0.0, 0.0, 1.0);
    rx * ry * rz
}

/// Projects a world point to pixel coordinates.
pub fn project_point(
    k: &CameraIntrinsics,
    pose: &PoseParams,
    point: &Vector3<f64>,
) -> Result<Vector2<f64>, GeometryError> {
    let cam = pose.world_to_camera() * (point - pose.center());
    if !(cam.z > 0.0) {
        return Err(GeometryError::BehindCamera { depth: cam.z });
    }
    let f = k.focal_length_px;
    Ok(Vector2::new(
        f * cam.x / cam.z + k.principal_point.0,
        f * cam.y / cam.z + k.principal_point.1,
    ))
}

/// Intersects the viewing ray through `pixel` with the plane through
/// `plane_point` with normal `plane_normal`. Returns `None` if the ray is
/// parallel to the plane or the intersection is behind the camera.
pub fn backproject_to_plane(
    k: &CameraIntrinsics,
    pose: &PoseParams,
    pixel: Vector2<f64>,
    plane_point: &Vector3<f64>,
    plane_normal: &Vector3<f64>,
) -> Option<Vector3<f64>> {
    let f = k.focal_length_px;
    let dir_cam = Vector3::new(
        (pixel.x - k.principal_point.0) / f,
        (pixel.y - k.principal_point.1) / f,
        1.0,
    );
    let dir = pose.world_to_camera().transpose() * dir_cam;
    let c = pose.center();
    let denom = plane_normal.dot(&dir);
    if denom.abs() < 1e-12 {
        return None;
    }
    let s = plane_normal.dot(&(plane_point - c)) / denom;
    (s > 0.0).then(|| c + dir * s)
}

/// Mean pixel displacement of `points` when `param` is perturbed by `delta`.
/// Points that fail to project under either pose are ignored.
pub fn image_plane_error(
    k: &CameraIntrinsics,
    pose: &PoseParams,
    param: PoseParam,
    delta: f64,
    points: &[Vector3<f64>],
) -> Result<f64, GeometryError> {
    pose_displacement(k, pose, &pose.with_offset(param, delta), points)
}

/// Mean pixel displacement of `points` between two poses.
pub fn pose_displacement(
    k: &CameraIntrinsics,
    a: &PoseParams,
    b: &PoseParams,
    points: &[Vector3<f64>],
) -> Result<f64, GeometryError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for p in points {
        if let (Ok(pa), Ok(pb)) = (project_point(k, a, p), project_point(k, b, p)) {
            sum += (pa - pb).norm();
            n += 1;
        }
    }
    if n == 0 {
        return Err(GeometryError::NoVisiblePoints);
    }
    Ok(sum / n as f64)
}

/// Tilt axis whose error can be traded for a horizontal translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltAxis {
    /// Rotation about x, traded against `t_y`.
    Alpha,
    /// Rotation about y, traded against `t_x`.
    Beta,
}

impl TiltAxis {
    pub fn rotation_param(self) -> PoseParam {
        match self {
            TiltAxis::Alpha => PoseParam::Alpha,
            TiltAxis::Beta => PoseParam::Beta,
        }
    }

    pub fn translation_param(self) -> PoseParam {
        match self {
            TiltAxis::Alpha => PoseParam::Ty,
            TiltAxis::Beta => PoseParam::Tx,
        }
    }
}

/// Translation (along `t_x` for beta, `t_y` for alpha) that moves the central
/// image point by the same amount as a tilt of `delta_angle`. Subtracting it
/// from the tilted pose cancels the tilt near the image center.
pub fn compensating_translation(delta_angle: f64, axis: TiltAxis, t_z: f64) -> f64 {
    let shift = t_z * delta_angle.tan();
    match axis {
        TiltAxis::Beta => shift,
        TiltAxis::Alpha => -shift,
    }
}

/// Per-point pixel residuals after fitting the single horizontal translation
/// `(dt_x, dt_y)` that best maps `perturbed` back onto `reference` in the
/// least-squares sense.
pub fn translation_fit_residuals(
    k: &CameraIntrinsics,
    reference: &PoseParams,
    perturbed: &PoseParams,
    points: &[Vector3<f64>],
) -> Result<Vec<f64>, GeometryError> {
    let targets = points
        .iter()
        .map(|p| project_point(k, reference, p))
        .collect::<Result<Vec<_>, _>>()?;
    let residual_vec = |d: &Vector2<f64>| -> Result<Vec<Vector2<f64>>, GeometryError> {
        let mut pose = *perturbed;
        pose.t_x += d.x;
        pose.t_y += d.y;
        points
            .iter()
            .zip(&targets)
            .map(|(p, t)| Ok(project_point(k, &pose, p)? - t))
            .collect()
    };

    let mut d = Vector2::zeros();
    let h = 1e-6;
    for _ in 0..10 {
        let r0 = residual_vec(&d)?;
        let rx = residual_vec(&(d + Vector2::new(h, 0.0)))?;
        let ry = residual_vec(&(d + Vector2::new(0.0, h)))?;
        let mut jtj = nalgebra::Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for i in 0..r0.len() {
            let jx = (rx[i] - r0[i]) / h;
            let jy = (ry[i] - r0[i]) / h;
            jtj[(0, 0)] += jx.dot(&jx);
            jtj[(0, 1)] += jx.dot(&jy);
            jtj[(1, 1)] += jy.dot(&jy);
            jtr.x += jx.dot(&r0[i]);
            jtr.y += jy.dot(&r0[i]);
        }
        jtj[(1, 0)] = jtj[(0, 1)];
        let Some(inv) = jtj.try_inverse() else { break };
        let step = inv * jtr;
        d -= step;
        if step.norm() < 1e-12 {
            break;
        }
    }
    Ok(residual_vec(&d)?.iter().map(|r| r.norm()).collect())
}

/// A planar raster in world space onto which images are integrated.
///
/// Raster sample `(u, v)` has its center at integer coordinates; `u` runs
/// along the first in-plane axis and `v` runs against the second one, so a
/// horizontal plane renders with world `+y` up, like a nadir image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalPlane {
    /// World point at the center of the raster.
    pub anchor_point: [f64; 3],
    pub unit_normal: [f64; 3],
    /// Size of the raster in meters (along u, along v).
    pub raster_extent: (f64, f64),
    /// Raster size in samples (width, height).
    pub raster_resolution: (usize, usize),
}

impl FocalPlane {
    pub fn new(
        anchor_point: [f64; 3],
        unit_normal: [f64; 3],
        raster_extent: (f64, f64),
        raster_resolution: (usize, usize),
    ) -> Result<Self, GeometryError> {
        let plane = Self {
            anchor_point,
            unit_normal,
            raster_extent,
            raster_resolution,
        };
        plane.validate()?;
        Ok(plane)
    }

    /// Horizontal plane at height `z` centered over `(x, y)`.
    pub fn horizontal(
        center: (f64, f64),
        z: f64,
        raster_extent: (f64, f64),
        raster_resolution: (usize, usize),
    ) -> Result<Self, GeometryError> {
        Self::new(
            [center.0, center.1, z],
            [0.0, 0.0, 1.0],
            raster_extent,
            raster_resolution,
        )
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let n = self.normal();
        if !n.iter().all(|c| c.is_finite()) || (n.norm() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidPlane(format!(
                "normal must have unit length, got {:.12}",
                n.norm()
            )));
        }
        if self.raster_resolution.0 < 1 || self.raster_resolution.1 < 1 {
            return Err(GeometryError::InvalidPlane(
                "raster resolution must be at least 1x1".into(),
            ));
        }
        if !(self.raster_extent.0 > 0.0 && self.raster_extent.1 > 0.0) {
            return Err(GeometryError::InvalidPlane("raster extent must be positive".into()));
        }
        if !self.anchor_point.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidPlane("anchor point must be finite".into()));
        }
        Ok(())
    }

    pub fn anchor(&self) -> Vector3<f64> {
        Vector3::from(self.anchor_point)
    }

    pub fn normal(&self) -> Vector3<f64> {
        Vector3::from(self.unit_normal)
    }

    /// Same raster with a different anchor and normal. The normal is
    /// renormalized.
    pub fn with_pose(&self, anchor: Vector3<f64>, normal: Vector3<f64>) -> Self {
        let n = normal.normalize();
        Self {
            anchor_point: [anchor.x, anchor.y, anchor.z],
            unit_normal: [n.x, n.y, n.z],
            ..*self
        }
    }

    /// In-plane axes `(e1, e2)`; `e1` is world `x` projected into the plane.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.normal();
        let mut e1 = Vector3::x() - n * n.x;
        if e1.norm() < 1e-6 {
            e1 = Vector3::y() - n * n.y;
        }
        let e1 = e1.normalize();
        let e2 = n.cross(&e1);
        (e1, e2)
    }

    /// Meters per raster sample (along u, along v).
    pub fn sample_spacing(&self) -> (f64, f64) {
        (
            self.raster_extent.0 / self.raster_resolution.0 as f64,
            self.raster_extent.1 / self.raster_resolution.1 as f64,
        )
    }

    /// World point of raster coordinate `(u, v)`.
    pub fn world_point(&self, u: f64, v: f64) -> Vector3<f64> {
        let (e1, e2) = self.basis();
        let (sx, sy) = self.sample_spacing();
        let (w, h) = self.raster_resolution;
        self.anchor() + e1 * ((u - (w as f64 - 1.0) / 2.0) * sx) - e2 * ((v - (h as f64 - 1.0) / 2.0) * sy)
    }
}

/// Homography from focal-plane raster coordinates to image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneHomography(pub Matrix3<f64>);

impl PlaneHomography {
    /// Maps a raster coordinate to a pixel. `None` if the plane point is
    /// behind the camera.
    #[inline]
    pub fn map(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let m = &self.0;
        let w = m[(2, 0)] * u + m[(2, 1)] * v + m[(2, 2)];
        if !(w > 0.0) {
            return None;
        }
        let x = m[(0, 0)] * u + m[(0, 1)] * v + m[(0, 2)];
        let y = m[(1, 0)] * u + m[(1, 1)] * v + m[(1, 2)];
        Some((x / w, y / w))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }
}

/// Builds the mapping from plane raster coordinates to image pixels.
///
/// The third homogeneous coordinate of the result equals the camera-frame
/// depth of the plane point, so its sign tells visibility.
pub fn homography_to_plane(
    k: &CameraIntrinsics,
    pose: &PoseParams,
    plane: &FocalPlane,
) -> Result<PlaneHomography, GeometryError> {
    let n = plane.normal();
    let c = pose.center();
    let distance = n.dot(&(c - plane.anchor()));
    if distance.abs() < 1e-9 {
        return Err(GeometryError::DegenerateView("camera center lies on the plane"));
    }
    if n.dot(&pose.optical_axis()).abs() < 1e-9 {
        return Err(GeometryError::DegenerateView("plane is edge-on to the optical axis"));
    }

    let (e1, e2) = plane.basis();
    let (sx, sy) = plane.sample_spacing();
    let (w, h) = plane.raster_resolution;
    let origin = plane.anchor() - e1 * ((w as f64 - 1.0) / 2.0 * sx) + e2 * ((h as f64 - 1.0) / 2.0 * sy);
    let kw = k.matrix() * pose.world_to_camera();
    let mut m = Matrix3::zeros();
    m.set_column(0, &(kw * (e1 * sx)));
    m.set_column(1, &(kw * (-e2 * sy)));
    m.set_column(2, &(kw * (origin - c)));

    // Scale-free conditioning check: compare against the column norms.
    let scale = m.column(0).norm() * m.column(1).norm() * m.column(2).norm();
    if !(m.determinant().abs() > 1e-12 * scale) {
        return Err(GeometryError::DegenerateView("homography is singular"));
    }
    Ok(PlaneHomography(m))
}
