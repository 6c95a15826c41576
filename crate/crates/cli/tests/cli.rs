use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aperture_cli::dataset::{format_pose_records, read_pose_records, Manifest};
use aperture_cli::report::RunReport;
use aperture_core::imaging::pnm::read_pfm;
use aperture_core::refine::glv_order;
use aperture_core::PoseParam;
use tempfile::TempDir;

const SMALL: &str = r#"
seed = 5

[scene.reference]
extent = [8.0, 8.0]
resolution = [80, 80]

[capture]
grid = [3, 3]
aperture_extent = [10.0, 10.0]
image_size = [128, 128]
pixel_noise_sigma = 0.0
"#;

const CLEAN: &str = r#"
[scene]
targets = []

[scene.occluders]
density = 0.0

[perturbation]
sigma_t_x = 0.0
sigma_t_y = 0.0
sigma_gamma = 0.0
"#;

const STILL: &str = r#"
[scene.occluders]
density = 0.0

[perturbation]
sigma_t_x = 0.0
sigma_t_y = 0.0
sigma_gamma = 0.0
"#;

fn aperture(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aperture"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(tmp: &TempDir, name: &str, config: &str) -> PathBuf {
    let cfg = tmp.path().join(format!("{name}.toml"));
    fs::write(&cfg, config).unwrap();
    let out = tmp.path().join(name);
    let o = aperture(&["simulate", path(&cfg), "-o", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn refine(dataset: &Path, out: &Path, extra: &[&str]) -> RunReport {
    let mut args = vec!["refine", path(dataset), "-o", path(out)];
    args.extend_from_slice(extra);
    let o = aperture(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    RunReport::read(&out.join("report.json")).unwrap()
}

#[test]
fn simulate_writes_one_view_per_grid_cell() {
    let tmp = TempDir::new().unwrap();
    let ds = simulate(&tmp, "ds", SMALL);
    let m = Manifest::read(&ds).unwrap();
    assert_eq!(m.images.len(), 9);
    for img in &m.images {
        assert_eq!(read_pfm(ds.join(img)).unwrap().dims(), (128, 128));
    }
    assert_eq!(read_pose_records(&ds.join("poses_true.txt")).unwrap().len(), 9);
    assert_eq!(read_pose_records(&ds.join("poses_initial.txt")).unwrap().len(), 9);
}

#[test]
fn negative_density_exits_2_naming_the_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[scene.occluders]\ndensity = -0.5\n").unwrap();
    let o = aperture(&["simulate", path(&cfg), "-o", path(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("scene.occluders.density") && err.contains(":2:"), "{err}");

    fs::write(&cfg, "[capture\ngrid = 1\n").unwrap();
    let o = aperture(&["simulate", path(&cfg), "-o", path(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, SMALL).unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = aperture(&["simulate", path(&cfg), "-o", path(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(3));
    let o = aperture(&[
        "simulate",
        path(&tmp.path().join("missing.toml")),
        "-o",
        path(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn clean_dataset_gains_less_than_one_percent() {
    let tmp = TempDir::new().unwrap();
    let ds = simulate(&tmp, "ds", &format!("{SMALL}{CLEAN}"));
    for space in ["three", "six"] {
        let r = refine(&ds, &tmp.path().join(space), &["--space", space, "--strategy", "brute"]);
        let m = r.metrics.unwrap();
        assert!(m.normalized_variance_gain_percent.abs() < 1.0, "{space}: {m:?}");
    }
}

#[test]
fn three_space_needs_half_the_parameters_of_six() {
    let tmp = TempDir::new().unwrap();
    let ds = simulate(&tmp, "ds", SMALL);
    let three = refine(
        &ds,
        &tmp.path().join("three"),
        &["--space", "three", "--strategy", "brute"],
    );
    let six = refine(&ds, &tmp.path().join("six"), &["--space", "six", "--strategy", "brute"]);
    assert_eq!(2 * three.parameter_evaluations, six.parameter_evaluations);
    let early = refine(&ds, &tmp.path().join("early"), &["--space", "three"]);
    assert!(2 * early.parameter_evaluations <= six.parameter_evaluations);
    assert_eq!(three.baseline_parameter_evaluations, 54);
}

#[test]
fn misposed_view_at_step_k_stops_there() {
    let tmp = TempDir::new().unwrap();
    let ds = simulate(&tmp, "ds", &format!("{SMALL}{STILL}"));
    let records = read_pose_records(&ds.join("poses_true.txt")).unwrap();
    let images: Vec<_> = records.iter().map(|r| read_pfm(ds.join(&r.image)).unwrap()).collect();
    let order = glv_order(&images).unwrap();
    for k in [3usize, 6] {
        let mut bad = records.clone();
        let i = order[k];
        bad[i].pose = bad[i]
            .pose
            .with_offset(PoseParam::Tx, 4.5)
            .with_offset(PoseParam::Gamma, 90f64.to_radians());
        let poses = tmp.path().join(format!("bad{k}.txt"));
        fs::write(&poses, format_pose_records(&bad)).unwrap();
        let out = tmp.path().join(format!("out{k}"));
        let r = refine(
            &ds,
            &out,
            &["--strategy", "early", "--patience", "1", "--poses", path(&poses)],
        );
        assert_eq!(r.n_stop, k);
        assert!(!r.images[i].included);
    }
}

#[test]
fn report_round_trips_byte_identically() {
    let tmp = TempDir::new().unwrap();
    let ds = simulate(&tmp, "ds", SMALL);
    let out = tmp.path().join("out");
    refine(
        &ds,
        &out,
        &["--timings", "--roi", "10,10,60,60", "--interpolation", "bilinear"],
    );
    let text = fs::read_to_string(out.join("report.json")).unwrap();
    let report = RunReport::from_json(&text).unwrap();
    assert_eq!(report.to_json(), text);
    assert!(report.timings.is_some());
    assert_eq!(report.settings.roi.width, 60);
    assert_eq!(report.settings.interpolation, "bilinear");
}

#[test]
fn refined_outputs_are_written() {
    let tmp = TempDir::new().unwrap();
    let ds = simulate(&tmp, "ds", SMALL);
    let out = tmp.path().join("out");
    let r = refine(&ds, &out, &["--auto-plane", "--z-range", "-1,1", "--z-steps", "5"]);
    for f in [
        "integral.pfm",
        "integral_mask.pgm",
        "integral_preview.pgm",
        "poses_refined.txt",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let refined = read_pose_records(&out.join("poses_refined.txt")).unwrap();
    assert_eq!(refined.len(), 9);
    let search = r.plane_search.unwrap();
    assert!(search.height.abs() <= 0.5, "{}", search.height);
}

#[test]
fn too_few_images_exits_4() {
    let tmp = TempDir::new().unwrap();
    let ds = simulate(&tmp, "ds", SMALL);
    let m = Manifest::read(&ds).unwrap();
    for img in &m.images[1..] {
        fs::remove_file(ds.join(img)).unwrap();
    }
    let o = aperture(&["refine", path(&ds), "-o", path(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn missing_images_are_reported_not_fatal() {
    let tmp = TempDir::new().unwrap();
    let ds = simulate(&tmp, "ds", SMALL);
    fs::remove_file(ds.join("views/view_003.pfm")).unwrap();
    let r = refine(&ds, &tmp.path().join("out"), &["--strategy", "brute"]);
    assert!(r.failures.iter().any(|f| f.image == 3));
    assert!(!r.images[3].loaded && !r.images[3].included);
    assert_eq!(r.images.iter().filter(|e| e.included).count(), 8);
}

#[test]
fn variance_model_reports_pass_and_rejects_zero_views() {
    let o = aperture(&["variance-model", "--n", "10", "--mc-pixels", "200000"]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("3.650000"), "{out}");
    assert_eq!(out.lines().last(), Some("PASS"));

    let o = aperture(&["variance-model", "--d", "0", "--mc-pixels", "100000"]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("var_integral         4.000000"), "{out}");
    assert_eq!(out.lines().last(), Some("PASS"));

    assert_eq!(aperture(&["variance-model", "--n", "0"]).status.code(), Some(2));
    assert_eq!(aperture(&["variance-model", "--d", "1.5"]).status.code(), Some(2));
}

#[test]
fn pose_error_curves_csv() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("curves.csv");
    let o = aperture(&["pose-error-curves", "--tz", "30", "--f", "1000", "-o", path(&csv)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("curve,delta,unit,center_px,mean_px,max_px"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    for r in rows.iter().filter(|r| r[0] == "t_z") {
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
    }
    let tx1 = rows.iter().find(|r| r[0] == "t_x" && r[1] == "1.0").unwrap();
    assert!((tx1[4].parse::<f64>().unwrap() - 1000.0 / 30.0).abs() < 1e-9);
    let beta1 = rows
        .iter()
        .find(|r| r[0] == "beta_compensated" && r[1] == "1.0")
        .unwrap();
    assert!(beta1[3].parse::<f64>().unwrap() < 0.5);

    let o = aperture(&["pose-error-curves", "-o", path(&tmp.path().join("no/such/dir.csv"))]);
    assert_eq!(o.status.code(), Some(3));
}
