use std::fs;
use std::path::Path;
use std::time::Instant;

use aperture_core::imaging::pnm::{read_image, read_pfm, write_mask, write_pfm, write_preview};
use aperture_core::refine::{
    default_plane_config, optimize_focal_plane, plane_at, run_strategy, RefineContext, StepFailure,
};
use aperture_core::simulate::evaluate;
use aperture_core::{ImageRaster, PoseParams, Roi, SearchSpace, StrategyConfig};

use crate::dataset::{self, Manifest, PoseRecord};
use crate::report::{ImageEntry, PlaneReport, RefineSettings, RunReport, Timings};
use crate::{CliError, RefineArgs};

pub const INTEGRAL: &str = "integral.pfm";
pub const INTEGRAL_MASK: &str = "integral_mask.pgm";
pub const INTEGRAL_PREVIEW: &str = "integral_preview.pgm";
pub const POSES_REFINED: &str = "poses_refined.txt";
pub const REPORT: &str = "report.json";

pub fn run(args: &RefineArgs) -> Result<RunReport, CliError> {
    let t_load = Instant::now();
    let dir = &args.dataset;
    let manifest = Manifest::read(dir)?;
    let pose_path = args.poses.clone().unwrap_or_else(|| dir.join(&manifest.poses_initial));
    let records = dataset::read_pose_records(&pose_path)?;
    let strategy = StrategyConfig::new(args.strategy, args.patience).map_err(|e| CliError::Config(e.to_string()))?;
    let k = manifest.intrinsics;

    let mut failures = Vec::new();
    let mut loaded: Vec<(usize, ImageRaster)> = Vec::new();
    for (slot, r) in records.iter().enumerate() {
        match read_image(dir.join(&r.image)) {
            Ok(img) if img.dims() == k.image_size => loaded.push((slot, img)),
            Ok(img) => failures.push(StepFailure {
                image: r.id,
                message: format!("size {:?} does not match the camera {:?}", img.dims(), k.image_size),
            }),
            Err(e) => failures.push(StepFailure {
                image: r.id,
                message: format!("{}: {e}", r.image),
            }),
        }
    }
    if loaded.len() < 2 {
        return Err(CliError::Insufficient(format!(
            "only {} of {} images could be loaded",
            loaded.len(),
            records.len()
        )));
    }
    let images: Vec<ImageRaster> = loaded.iter().map(|(_, img)| img.clone()).collect();
    let poses: Vec<PoseParams> = loaded.iter().map(|(s, _)| records[*s].pose).collect();
    let load_s = t_load.elapsed().as_secs_f64();

    let t_plane = Instant::now();
    let mut plane = match args.plane_z {
        Some(z) => plane_at(&manifest.plane, z, 0.0, 0.0),
        None => manifest.plane,
    };
    let roi = match args.roi {
        Some([x, y, w, h]) => Roi::new(x, y, w, h),
        None => Roi::full(plane.raster_resolution.0, plane.raster_resolution.1),
    };
    roi.check(plane.raster_resolution)
        .map_err(|e| CliError::Config(format!("--roi: {e}")))?;
    let mut plane_search = None;
    if args.auto_plane {
        let found = optimize_focal_plane(
            &images,
            &poses,
            &k,
            &plane,
            &roi,
            args.z_range,
            args.z_steps,
            args.plane_tilt,
            &default_plane_config(),
        )?;
        plane = found.plane;
        let n = plane.normal();
        plane_search = Some(PlaneReport {
            height: plane.anchor().z,
            normal: [n.x, n.y, n.z],
            glv: found.glv,
            grid: found.grid,
        });
    }
    let plane_s = t_plane.elapsed().as_secs_f64();

    let t_refine = Instant::now();
    let space = SearchSpace::preset(args.space);
    let mut ctx = RefineContext::new(k, plane, roi, space.clone());
    ctx.interpolation = args.interpolation;
    let result = run_strategy(&images, &poses, &ctx, &strategy)?;
    let refine_s = t_refine.elapsed().as_secs_f64();

    let t_write = Instant::now();
    let id_of = |i: usize| records[loaded[i].0].id;
    failures.extend(result.failures.iter().map(|f| StepFailure {
        image: id_of(f.image),
        message: f.message.clone(),
    }));
    let metrics = evaluation(dir, &manifest, &records, &loaded, &result, &plane, &roi)?;

    let mut refined = records.clone();
    let mut entries: Vec<ImageEntry> = records
        .iter()
        .map(|r| ImageEntry {
            id: r.id,
            image: r.image.clone(),
            loaded: false,
            optimized: false,
            included: false,
        })
        .collect();
    for (i, (slot, _)) in loaded.iter().enumerate() {
        refined[*slot].pose = result.corrected_poses[i];
        let e = &mut entries[*slot];
        e.loaded = true;
        e.optimized = result.optimized[i];
        e.included = result.included[i];
    }
    let steps = result
        .steps
        .iter()
        .map(|s| {
            let mut s = *s;
            s.image = id_of(s.image);
            s
        })
        .collect();

    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_outputs(out, &result.integral, &refined)?;
    let m = images.len();
    let mut report = RunReport {
        settings: RefineSettings {
            dataset: dir.display().to_string(),
            poses: pose_path.display().to_string(),
            space: args.space.to_string(),
            active_params: space.active_params.iter().map(|p| p.name().to_string()).collect(),
            strategy: args.strategy,
            patience: args.patience,
            roi,
            plane,
            auto_plane: args.auto_plane,
            interpolation: format!("{:?}", ctx.interpolation).to_lowercase(),
        },
        plane_search,
        images: entries,
        order: result.order.iter().map(|&i| id_of(i)).collect(),
        objective_trace: result.objective_trace.clone(),
        candidate_trace: result.candidate_trace.clone(),
        n_stop: result.n_stop,
        unrefined_objective: Some(result.unrefined_objective).filter(|v| v.is_finite()),
        final_objective: result.final_objective,
        parameter_evaluations: result.parameter_evaluations,
        baseline_parameter_evaluations: 6 * m,
        objective_evaluations: result.objective_evaluations,
        steps,
        failures,
        metrics,
        timings: None,
    };
    if args.timings {
        report.timings = Some(Timings {
            load_s,
            plane_s,
            refine_s,
            write_s: t_write.elapsed().as_secs_f64(),
        });
    }
    report.write(&out.join(REPORT))?;
    print_summary(&report);
    Ok(report)
}

fn write_outputs(out: &Path, integral: &ImageRaster, refined: &[PoseRecord]) -> Result<(), CliError> {
    let path = out.join(INTEGRAL);
    write_pfm(&path, integral).map_err(|e| CliError::imaging(&path, e))?;
    let path = out.join(INTEGRAL_MASK);
    write_mask(&path, integral).map_err(|e| CliError::imaging(&path, e))?;
    let path = out.join(INTEGRAL_PREVIEW);
    write_preview(&path, integral).map_err(|e| CliError::imaging(&path, e))?;
    dataset::write_pose_records(&out.join(POSES_REFINED), refined)
}

/// Metrics against the dataset's true poses, when it has them and the
/// integral lies on the reference image's plane.
fn evaluation(
    dir: &Path,
    manifest: &Manifest,
    records: &[PoseRecord],
    loaded: &[(usize, ImageRaster)],
    result: &aperture_core::RefinementResult,
    plane: &aperture_core::FocalPlane,
    roi: &Roi,
) -> Result<Option<aperture_core::simulate::EvaluationMetrics>, CliError> {
    let (Some(truth_file), Some(reference_file)) = (&manifest.poses_true, &manifest.reference) else {
        return Ok(None);
    };
    if *plane != manifest.plane || !result.unrefined_objective.is_finite() {
        return Ok(None);
    }
    let truth = dataset::read_pose_records(&dir.join(truth_file))?;
    let mut true_poses = Vec::with_capacity(loaded.len());
    for (slot, _) in loaded {
        let id = records[*slot].id;
        match truth.iter().find(|t| t.id == id) {
            Some(t) => true_poses.push(t.pose),
            None => return Ok(None),
        }
    }
    let path = dir.join(reference_file);
    let reference = read_pfm(&path).map_err(|e| CliError::imaging(&path, e))?;
    evaluate(result, &true_poses, &reference, plane, roi)
        .map(Some)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn print_summary(r: &RunReport) {
    let before = r.unrefined_objective.unwrap_or(f64::NAN);
    println!(
        "n_stop {} of {}, normalized variance {:.4} -> {:.4}, parameter evaluations {} (baseline {})",
        r.n_stop,
        r.images.iter().filter(|e| e.loaded).count(),
        before,
        r.final_objective,
        r.parameter_evaluations,
        r.baseline_parameter_evaluations
    );
    if let Some(m) = &r.metrics {
        println!(
            "gain {:.2}%, aligned t_x/t_y error {:.4} m -> {:.4} m, PSNR {:.2} dB",
            m.normalized_variance_gain_percent, m.aligned_mean_abs_txy_before, m.aligned_mean_abs_txy_after, m.psnr_db
        );
    }
    for f in &r.failures {
        eprintln!("warning: image {}: {}", f.image, f.message);
    }
}
