use std::fs;

use aperture_core::imaging::pnm::write_pfm;
use aperture_core::simulate::{perturb_poses, render_views};
use aperture_core::PoseParams;

use crate::config::SimulationConfig;
use crate::dataset::{self, Manifest, PoseRecord};
use crate::{CliError, SimulateArgs};

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let (mut config, mut resolved) = SimulationConfig::parse(&text, &args.config.display().to_string())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
        if config.perturbation.seed.is_none() {
            resolved.perturbation.seed = seed;
        }
        resolved.seed = seed;
    }
    let views =
        render_views(&resolved.scene, &resolved.capture, resolved.seed).map_err(|e| CliError::Config(e.to_string()))?;
    let initial =
        perturb_poses(&views.true_poses, &resolved.perturbation).map_err(|e| CliError::Config(e.to_string()))?;

    let out = &args.out;
    let views_dir = out.join("views");
    fs::create_dir_all(&views_dir).map_err(|e| CliError::io(&views_dir, e))?;
    let names: Vec<String> = (0..views.images.len()).map(dataset::view_file).collect();
    for (name, img) in names.iter().zip(&views.images) {
        let path = out.join(name);
        write_pfm(&path, img).map_err(|e| CliError::imaging(&path, e))?;
    }
    let reference = out.join(dataset::REFERENCE);
    write_pfm(&reference, &views.reference).map_err(|e| CliError::imaging(&reference, e))?;
    let records = |poses: &[PoseParams]| -> Vec<PoseRecord> {
        names
            .iter()
            .zip(poses)
            .enumerate()
            .map(|(id, (image, pose))| PoseRecord {
                id,
                image: image.clone(),
                pose: *pose,
            })
            .collect()
    };
    dataset::write_pose_records(&out.join(dataset::POSES_TRUE), &records(&views.true_poses))?;
    dataset::write_pose_records(&out.join(dataset::POSES_INITIAL), &records(&initial))?;

    let manifest = Manifest {
        seed: resolved.seed,
        intrinsics: resolved.capture.intrinsics,
        plane: resolved.scene.reference_plane(),
        images: names,
        poses_true: Some(dataset::POSES_TRUE.into()),
        poses_initial: dataset::POSES_INITIAL.into(),
        reference: Some(dataset::REFERENCE.into()),
        config: serde_json::to_value(&config).expect("config serializes"),
    };
    manifest.write(out)?;
    eprintln!(
        "wrote {} views to {} (occlusion probability {:.3})",
        manifest.images.len(),
        out.display(),
        resolved.scene.occlusion_probability()
    );
    Ok(())
}
