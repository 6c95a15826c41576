//! On-disk datasets: PFM views, pose record files and a JSON manifest.
//!
//! A pose record file holds one view per line as named fields in a fixed
//! order, with translations in meters and angles in degrees:
//!
//! ```text
//! # aperture poses: id image t_x[m] t_y[m] t_z[m] alpha[deg] beta[deg] gamma[deg]
//! id=0 image=views/view_000.pfm t_x=-15 t_y=-12.5 t_z=30 alpha=0 beta=0 gamma=0
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use aperture_core::{CameraIntrinsics, FocalPlane, PoseParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const POSE_HEADER: &str = "# aperture poses: id image t_x[m] t_y[m] t_z[m] alpha[deg] beta[deg] gamma[deg]";
const FIELDS: [&str; 8] = ["id", "image", "t_x", "t_y", "t_z", "alpha", "beta", "gamma"];

pub const MANIFEST: &str = "manifest.json";
pub const POSES_TRUE: &str = "poses_true.txt";
pub const POSES_INITIAL: &str = "poses_initial.txt";
pub const REFERENCE: &str = "reference.pfm";

#[derive(Debug, Clone, PartialEq)]
pub struct PoseRecord {
    pub id: usize,
    /// Relative to the dataset directory.
    pub image: String,
    pub pose: PoseParams,
}

pub fn format_pose_records(records: &[PoseRecord]) -> String {
    let mut out = String::from(POSE_HEADER);
    out.push('\n');
    for r in records {
        let p = &r.pose;
        out.push_str(&format!(
            "id={} image={} t_x={} t_y={} t_z={} alpha={} beta={} gamma={}\n",
            r.id,
            r.image,
            p.t_x,
            p.t_y,
            p.t_z,
            p.alpha.to_degrees(),
            p.beta.to_degrees(),
            p.gamma.to_degrees()
        ));
    }
    out
}

pub fn parse_pose_records(text: &str, origin: &str) -> Result<Vec<PoseRecord>, CliError> {
    let bad = |line: usize, msg: String| CliError::Config(format!("{origin}:{line}: {msg}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == POSE_HEADER => {}
        _ => return Err(bad(1, format!("expected header `{POSE_HEADER}`"))),
    }
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != FIELDS.len() {
            return Err(bad(
                n,
                format!("expected {} fields, found {}", FIELDS.len(), tokens.len()),
            ));
        }
        let mut values = [""; 8];
        for ((slot, tok), name) in values.iter_mut().zip(&tokens).zip(FIELDS) {
            *slot = tok
                .strip_prefix(name)
                .and_then(|t| t.strip_prefix('='))
                .ok_or_else(|| bad(n, format!("expected `{name}=...`, found `{tok}`")))?;
        }
        let id: usize = values[0]
            .parse()
            .map_err(|_| bad(n, format!("invalid id `{}`", values[0])))?;
        if !ids.insert(id) {
            return Err(bad(n, format!("duplicate id {id}")));
        }
        let mut v = [0.0; 6];
        for (k, slot) in v.iter_mut().enumerate() {
            let raw = values[k + 2];
            let x: f64 = raw
                .parse()
                .map_err(|_| bad(n, format!("invalid {} `{raw}`", FIELDS[k + 2])))?;
            if !x.is_finite() {
                return Err(bad(n, format!("{} must be finite", FIELDS[k + 2])));
            }
            *slot = if k >= 3 { x.to_radians() } else { x };
        }
        records.push(PoseRecord {
            id,
            image: values[1].to_string(),
            pose: PoseParams::from_array(v),
        });
    }
    Ok(records)
}

pub fn read_pose_records(path: &Path) -> Result<Vec<PoseRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_pose_records(&text, &path.display().to_string())
}

pub fn write_pose_records(path: &Path, records: &[PoseRecord]) -> Result<(), CliError> {
    fs::write(path, format_pose_records(records)).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub intrinsics: CameraIntrinsics,
    /// Default focal plane, matching the reference image.
    pub plane: FocalPlane,
    pub images: Vec<String>,
    pub poses_true: Option<String>,
    pub poses_initial: String,
    pub reference: Option<String>,
    /// The simulation config that produced the dataset.
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

pub fn view_file(index: usize) -> String {
    format!("views/view_{index:03}.pfm")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records() -> Vec<PoseRecord> {
        vec![
            PoseRecord {
                id: 0,
                image: view_file(0),
                pose: PoseParams::new(-1.25, 0.1 + 0.2, 30.0, 0.001, -0.02, 0.3),
            },
            PoseRecord {
                id: 7,
                image: view_file(7),
                pose: PoseParams::nadir(4.0, -2.5, 29.75),
            },
        ]
    }

    #[test]
    fn format_parse_format_is_stable() {
        let text = format_pose_records(&records());
        let parsed = parse_pose_records(&text, "p").unwrap();
        assert_eq!(format_pose_records(&parsed), text);
        assert_eq!(parsed[0].pose.t_y, 0.1 + 0.2);
        assert!((parsed[0].pose.gamma - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_duplicates_and_bad_fields() {
        let text = format_pose_records(&records()).replace("id=7", "id=0");
        let err = parse_pose_records(&text, "p").unwrap_err().to_string();
        assert!(err.contains("p:3") && err.contains("duplicate"), "{err}");
        let text = format_pose_records(&records()).replace("t_z=30 ", "tz=30 ");
        let err = parse_pose_records(&text, "p").unwrap_err().to_string();
        assert!(err.contains("t_z"), "{err}");
        assert!(parse_pose_records("id=0\n", "p").is_err());
    }
}
