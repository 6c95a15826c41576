use std::io::{self, Write};

use aperture_core::geometry::{
    backproject_to_plane, compensating_translation, pose_displacement, translation_fit_residuals, TiltAxis,
};
use aperture_core::{CameraIntrinsics, PoseParam, PoseParams};
use nalgebra::{Vector2, Vector3};
use serde::Serialize;

use crate::{CliError, CurveArgs};

/// Translation sweep, meters.
pub const TRANSLATION_SWEEP: (f64, f64, usize) = (-1.0, 1.0, 41);
/// Rotation sweep, degrees.
pub const ROTATION_SWEEP: (f64, f64, usize) = (-2.0, 2.0, 41);
/// Sample points per image side.
const GRID: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub curve: String,
    pub delta: f64,
    pub unit: &'static str,
    /// Error at the ground point under the camera.
    pub center_px: f64,
    pub mean_px: f64,
    pub max_px: f64,
}

fn sweep((lo, hi, n): (f64, f64, usize)) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Ground points (z = 0) seen by a nadir camera on a regular pixel grid;
/// the first one lies under the camera.
pub fn sample_points(k: &CameraIntrinsics, pose: &PoseParams) -> Vec<Vector3<f64>> {
    let (w, h) = k.image_size;
    let mut pixels = vec![Vector2::new(k.principal_point.0, k.principal_point.1)];
    for j in 0..GRID {
        for i in 0..GRID {
            pixels.push(Vector2::new(
                (w - 1) as f64 * i as f64 / (GRID - 1) as f64,
                (h - 1) as f64 * j as f64 / (GRID - 1) as f64,
            ));
        }
    }
    pixels
        .into_iter()
        .filter_map(|px| backproject_to_plane(k, pose, px, &Vector3::zeros(), &Vector3::z()))
        .collect()
}

fn displacements(
    k: &CameraIntrinsics,
    a: &PoseParams,
    b: &PoseParams,
    points: &[Vector3<f64>],
) -> Result<Vec<f64>, CliError> {
    points
        .iter()
        .map(|p| {
            let d = pose_displacement(k, a, b, std::slice::from_ref(p));
            d.map_err(|e| CliError::Config(e.to_string()))
        })
        .collect()
}

fn row(curve: &str, delta: f64, unit: &'static str, errors: &[f64]) -> CurveRow {
    CurveRow {
        curve: curve.to_string(),
        delta,
        unit,
        center_px: errors[0],
        mean_px: errors.iter().sum::<f64>() / errors.len() as f64,
        max_px: errors.iter().cloned().fold(0.0, f64::max),
    }
}

pub fn curves(args: &CurveArgs) -> Result<Vec<CurveRow>, CliError> {
    if !(args.tz > 0.0 && args.f > 0.0 && args.size >= 2) {
        return Err(CliError::Config(
            "--tz and --f must be positive and --size at least 2".into(),
        ));
    }
    let k = CameraIntrinsics::centered(args.f, args.size, args.size).map_err(|e| CliError::Config(e.to_string()))?;
    let pose = PoseParams::nadir(0.0, 0.0, args.tz);
    let points = sample_points(&k, &pose);
    let mut rows = Vec::new();

    for p in PoseParam::ALL {
        let (range, unit) = if p.is_rotation() {
            (ROTATION_SWEEP, "deg")
        } else {
            (TRANSLATION_SWEEP, "m")
        };
        for d in sweep(range) {
            let delta = if p.is_rotation() { d.to_radians() } else { d };
            let e = displacements(&k, &pose, &pose.with_offset(p, delta), &points)?;
            rows.push(row(p.name(), d, unit, &e));
        }
    }
    for axis in [TiltAxis::Beta, TiltAxis::Alpha] {
        let name = format!("{}_compensated", axis.rotation_param().name());
        for d in sweep(ROTATION_SWEEP) {
            let a = d.to_radians();
            let shift = compensating_translation(a, axis, args.tz);
            let fixed = pose
                .with_offset(axis.rotation_param(), a)
                .with_offset(axis.translation_param(), -shift);
            rows.push(row(&name, d, "deg", &displacements(&k, &pose, &fixed, &points)?));
        }
    }
    for d in sweep(ROTATION_SWEEP) {
        let turned = pose.with_offset(PoseParam::Gamma, d.to_radians());
        let r = translation_fit_residuals(&k, &pose, &turned, &points).map_err(|e| CliError::Config(e.to_string()))?;
        rows.push(row("gamma_best_translation", d, "deg", &r));
    }
    Ok(rows)
}

pub fn write_csv(rows: &[CurveRow], out: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: &CurveArgs) -> Result<(), CliError> {
    let rows = curves(args)?;
    let to_io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    };
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            write_csv(&rows, io::BufWriter::new(file)).map_err(|e| CliError::io(path, to_io(e)))
        }
        None => write_csv(&rows, io::stdout().lock()).map_err(|e| CliError::io("<stdout>".as_ref(), to_io(e))),
    }
}
