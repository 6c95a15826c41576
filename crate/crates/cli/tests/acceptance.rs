//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use aperture_cli::curves::sample_points;
use aperture_core::geometry::{
    backproject_to_plane, compensating_translation, pose_displacement, translation_fit_residuals, TiltAxis,
};
use aperture_core::refine::{nelder_mead, run_strategy, RefineContext, Sense};
use aperture_core::simulate::{evaluate, perturb_poses, render_views, EvaluationMetrics, RenderedViews};
use aperture_core::variance_model::{monte_carlo_integral, var_integral, var_single};
use aperture_core::{
    CameraIntrinsics, CaptureSpec, NelderMeadConfig, OcclusionStats, PerturbationSpec, PoseParam, PoseParams,
    RefinementResult, Roi, SceneSpec, SearchSpace, StrategyConfig,
};
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Benchmark {
    views: RenderedViews,
    noisy: Vec<PoseParams>,
    scene: SceneSpec,
}

impl Benchmark {
    fn new(seed: u64, perturbation: PerturbationSpec) -> Self {
        let scene = SceneSpec::default();
        let views = render_views(&scene, &CaptureSpec::default(), seed).unwrap();
        let noisy = perturb_poses(&views.true_poses, &PerturbationSpec { seed, ..perturbation }).unwrap();
        Self { views, noisy, scene }
    }

    fn context(&self, space: SearchSpace) -> RefineContext {
        let r = self.scene.reference_resolution;
        RefineContext::new(
            CaptureSpec::default().intrinsics,
            self.scene.reference_plane(),
            Roi::full(r.0, r.1),
            space,
        )
    }

    fn run(&self, space: SearchSpace, strategy: StrategyConfig) -> RefinementResult {
        run_strategy(&self.views.images, &self.noisy, &self.context(space), &strategy).unwrap()
    }

    fn metrics(&self, r: &RefinementResult) -> EvaluationMetrics {
        let ctx = self.context(SearchSpace::three());
        evaluate(r, &self.views.true_poses, &self.views.reference, &ctx.plane, &ctx.roi).unwrap()
    }
}

/// Step records of every benchmark refinement, for the monotonicity check.
#[derive(Default)]
struct StepLog {
    steps: usize,
    violations: Vec<String>,
}

impl StepLog {
    fn record(&mut self, label: &str, r: &RefinementResult) {
        for s in &r.steps {
            self.steps += 1;
            if s.refined_objective < s.initial_objective {
                self.violations.push(format!(
                    "{label} image {}: {} < {}",
                    s.image, s.refined_objective, s.initial_objective
                ));
            }
        }
    }
}

fn statistical_model() -> Outcome {
    let t = Instant::now();
    let mut worst_se: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    let mut bad = Vec::new();
    for d in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let stats = OcclusionStats::new(d, 0.0, 1.0, 10.0, 4.0).unwrap();
        for n in [1usize, 2, 10, 50] {
            let exact = var_integral(&stats, n).unwrap();
            let mc = monte_carlo_integral(&stats, n, 1_000_000, 1).unwrap();
            let err = (mc.moments.variance - exact).abs();
            let se = if err == 0.0 { 0.0 } else { err / mc.variance_std_error };
            let rel = err / exact;
            worst_se = worst_se.max(se);
            worst_rel = worst_rel.max(rel);
            if se > 3.0 || rel > 0.02 {
                bad.push(format!("D={d} N={n}: mc {} vs {exact}", mc.moments.variance));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let running = var_integral(&OcclusionStats::new(0.5, 0.0, 1.0, 10.0, 4.0).unwrap(), 10).unwrap();
    let detail = format!(
        "20 grid points, worst {worst_se:.2} SE and {:.3}% relative, D=0.5 N=10 gives {running:.6}, {secs:.1} s {}",
        100.0 * worst_rel,
        bad.join("; ")
    );
    ensure(bad.is_empty() && (running - 3.65).abs() < 1e-12 && secs < 30.0, detail)
}

fn closed_form_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut endpoints = true;
    for _ in 0..1000 {
        let d = rng.random_range(0.0..=1.0);
        let mu_o = rng.random_range(-50.0..50.0);
        let sigma2_o = rng.random_range(0.0..100.0);
        let mu_s = rng.random_range(-50.0..50.0);
        let sigma2_s = rng.random_range(0.0..100.0);
        let n = rng.random_range(1usize..=200);
        let s = OcclusionStats::new(d, mu_o, sigma2_o, mu_s, sigma2_s).unwrap();
        let expected = var_single(&s) / n as f64 + (1.0 - d).powi(2) * (1.0 - 1.0 / n as f64) * sigma2_s;
        let got = var_integral(&s, n).unwrap();
        worst = worst.max((got - expected).abs() / expected.abs().max(f64::MIN_POSITIVE));
        let clear = OcclusionStats { d: 0.0, ..s };
        let full = OcclusionStats { d: 1.0, ..s };
        endpoints &= var_single(&clear) == sigma2_s && var_single(&full) == sigma2_o;
    }
    ensure(
        worst <= 1e-12 && endpoints,
        format!("1000 draws, worst relative deviation {worst:.2e}, endpoints exact: {endpoints}"),
    )
}

fn geometry_curves() -> Outcome {
    let t = Instant::now();
    let k = CameraIntrinsics::centered(1000.0, 1024, 1024).unwrap();
    let pose = PoseParams::nadir(0.0, 0.0, 30.0);
    let points = sample_points(&k, &pose);
    let center = &points[..1];
    let slope = 1000.0 / 30.0;
    let mut tz_center: f64 = 0.0;
    let mut tx_dev: f64 = 0.0;
    let mut beta_res: f64 = 0.0;
    for i in -20..=20 {
        let dt = i as f64 * 0.05;
        tz_center = tz_center.max(pose_displacement(&k, &pose, &pose.with_offset(PoseParam::Tz, dt), center).unwrap());
        for p in &points {
            let e =
                pose_displacement(&k, &pose, &pose.with_offset(PoseParam::Tx, dt), std::slice::from_ref(p)).unwrap();
            tx_dev = tx_dev.max((e - slope * dt.abs()).abs());
        }
        let db = (i as f64 * 0.1).to_radians();
        let fixed = pose
            .with_offset(PoseParam::Beta, db)
            .with_offset(PoseParam::Tx, -compensating_translation(db, TiltAxis::Beta, 30.0));
        beta_res = beta_res.max(pose_displacement(&k, &pose, &fixed, center).unwrap());
    }
    let c = k.principal_point;
    let pair: Vec<Vector3<f64>> = [c, (c.0 + 200.0, c.1)]
        .iter()
        .map(|&(u, v)| backproject_to_plane(&k, &pose, Vector2::new(u, v), &Vector3::zeros(), &Vector3::z()).unwrap())
        .collect();
    let turned = pose.with_offset(PoseParam::Gamma, 2f64.to_radians());
    let gamma_res = translation_fit_residuals(&k, &pose, &turned, &pair)
        .unwrap()
        .into_iter()
        .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    ensure(
        tz_center == 0.0 && tx_dev < 1e-9 && beta_res < 0.5 && gamma_res > 1.0 && secs < 5.0,
        format!(
            "t_z center {tz_center}, t_x slope deviation {tx_dev:.1e} px/m, compensated beta residual {beta_res:.3} px, \
             gamma 2 deg residual {gamma_res:.2} px, {secs:.2} s"
        ),
    )
}

fn pose_recovery(bench: &Benchmark, early: &RefinementResult, secs: f64) -> Outcome {
    let m = bench.metrics(early);
    let reduction = 100.0 * (1.0 - m.aligned_mean_abs_txy_after / m.aligned_mean_abs_txy_before);
    ensure(
        m.normalized_variance_gain_percent >= 30.0 && reduction >= 50.0 && secs < 300.0,
        format!(
            "gain {:.2}%, t_x/t_y error {:.4} -> {:.4} m ({reduction:.1}% lower), {secs:.1} s",
            m.normalized_variance_gain_percent, m.aligned_mean_abs_txy_before, m.aligned_mean_abs_txy_after
        ),
    )
}

fn strategy_properties(bench: &Benchmark, log: &mut StepLog) -> Outcome {
    let brute = bench.run(SearchSpace::three(), StrategyConfig::brute_force());
    let early = bench.run(SearchSpace::three(), StrategyConfig::early_stopping(1));
    let select = bench.run(SearchSpace::three(), StrategyConfig::selection());
    log.record("seed 2 brute", &brute);
    log.record("seed 2 early", &early);
    log.record("seed 2 selection", &select);

    let trace = &brute.objective_trace;
    let stop = (1..trace.len())
        .find(|&i| trace[i] < trace[i - 1])
        .unwrap_or(trace.len());
    let running_max = trace[..stop].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let early_ok = early.order == brute.order
        && early.candidate_trace[..stop] == trace[..stop]
        && early.final_objective == running_max
        && early.n_stop == stop;

    let mut current = select.objective_trace[0];
    let mut select_ok = select.order == brute.order;
    for (step, &cand) in select.candidate_trace.iter().enumerate().skip(1) {
        let raises = cand > current;
        select_ok &= select.included[select.order[step]] == raises;
        if raises {
            current = cand;
        }
    }
    let excluded = select.included.iter().filter(|&&i| !i).count();
    select_ok &= select.final_objective == current;

    let m = brute.corrected_poses.len();
    let brute_ok = m == bench.views.images.len()
        && brute.failures.is_empty()
        && brute.optimized.iter().filter(|&&o| o).count() == m - 1
        && brute.included.iter().all(|&i| i);
    ensure(
        early_ok && select_ok && brute_ok,
        format!(
            "early stops at step {stop} of {} at the running maximum: {early_ok}; selection excludes {excluded} \
             decreasing steps: {select_ok}; brute force corrects all {m} views: {brute_ok}",
            trace.len()
        ),
    )
}

fn search_space_accounting(
    three: &RefinementResult,
    six: &RefinementResult,
    early: &RefinementResult,
    suite: &[(RefinementResult, RefinementResult)],
) -> Outcome {
    let baseline = 6 * early.corrected_poses.len();
    let reduction = 100.0 * (1.0 - early.parameter_evaluations as f64 / baseline as f64);
    let mut halves = vec![(three.parameter_evaluations, six.parameter_evaluations)];
    halves.extend(
        suite
            .iter()
            .map(|(a, b)| (a.parameter_evaluations, b.parameter_evaluations)),
    );
    let exact = halves.iter().all(|&(a, b)| 2 * a == b);
    ensure(
        exact && reduction > 50.0,
        format!(
            "THREE/SIX parameter evaluations {halves:?}, early stopping {} of {baseline} ({reduction:.1}% fewer)",
            early.parameter_evaluations
        ),
    )
}

fn reduced_space_adequacy(suite: &[(RefinementResult, RefinementResult)]) -> Outcome {
    let ratios: Vec<String> = suite
        .iter()
        .map(|(a, b)| format!("{:.3}", a.final_objective / b.final_objective))
        .collect();
    let three: f64 = suite.iter().map(|(a, _)| a.final_objective).sum();
    let six: f64 = suite.iter().map(|(_, b)| b.final_objective).sum();
    let ratio = three / six;
    ensure(
        ratio >= 0.9,
        format!(
            "THREE/SIX final normalized variance over 5 seeds {ratio:.3}, per seed [{}]",
            ratios.join(", ")
        ),
    )
}

fn optimizer_sanity(log: &StepLog) -> Outcome {
    let cfg = NelderMeadConfig::default();
    let quad = nelder_mead(
        |x| (x[0] - 1.5).powi(2) + 2.0 * (x[1] + 0.5).powi(2) + 0.5 * (x[2] - 3.0).powi(2),
        &[0.0, 0.0, 0.0],
        &[1.0, 1.0, 1.0],
        &cfg,
        Sense::Minimize,
    )
    .unwrap();
    let quad_err = [quad.x[0] - 1.5, quad.x[1] + 0.5, quad.x[2] - 3.0]
        .iter()
        .fold(0.0f64, |m, e| m.max(e.abs()));
    let rosen = nelder_mead(
        |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
        &[-1.2, 1.0],
        &[0.5, 0.5],
        &cfg,
        Sense::Minimize,
    )
    .unwrap();
    let rosen_err = (rosen.x[0] - 1.0).abs().max((rosen.x[1] - 1.0).abs());
    ensure(
        quad_err < 1e-6 && rosen_err < 1e-4 && log.violations.is_empty(),
        format!(
            "quadratic error {quad_err:.1e}, Rosenbrock error {rosen_err:.1e}, {} decreases over {} refined views {}",
            log.violations.len(),
            log.steps,
            log.violations.join("; ")
        ),
    )
}

const CLI_CONFIG: &str = r#"
seed = 3

[scene.reference]
extent = [8.0, 8.0]
resolution = [80, 80]

[capture]
grid = [3, 3]
aperture_extent = [10.0, 10.0]
image_size = [128, 128]
"#;

fn snapshot(dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            snapshot(&p, out);
        } else {
            out.insert(p.display().to_string(), fs::read(&p).unwrap());
        }
    }
}

fn cli_determinism() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("config.toml");
    fs::write(&cfg, CLI_CONFIG).unwrap();
    let ds = tmp.path().join("ds");
    let out = tmp.path().join("out");
    let csv = tmp.path().join("curves.csv");
    let s = |p: &Path| p.display().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["simulate".into(), s(&cfg), "-o".into(), s(&ds)],
        vec![
            "refine".into(),
            s(&ds),
            "-o".into(),
            s(&out),
            "--auto-plane".into(),
            "--z-steps".into(),
            "5".into(),
        ],
        vec!["variance-model".into(), "--mc-pixels".into(), "200000".into()],
        vec!["pose-error-curves".into(), "-o".into(), s(&csv)],
    ];
    let mut passes = Vec::new();
    for _ in 0..2 {
        let mut files = BTreeMap::new();
        for args in &runs {
            let o = Command::new(env!("CARGO_BIN_EXE_aperture"))
                .args(args)
                .output()
                .unwrap();
            if !o.status.success() {
                return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&o.stderr)));
            }
            files.insert(format!("{} stdout", args[0]), o.stdout);
        }
        snapshot(tmp.path(), &mut files);
        passes.push(files);
    }
    let differing: Vec<&String> = passes[0]
        .iter()
        .filter(|(k, v)| passes[1].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    ensure(
        differing.is_empty() && passes[0].len() == passes[1].len(),
        format!(
            "{} outputs compared across two runs, differing: {differing:?}",
            passes[0].len()
        ),
    )
}

fn report(results: &mut Vec<bool>, n: usize, name: &str, outcome: Outcome) {
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} criterion {n} ({name}): {detail}");
    results.push(outcome.is_ok());
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    let mut log = StepLog::default();

    report(&mut results, 1, "statistical model", statistical_model());
    report(&mut results, 2, "closed form", closed_form_exactness());
    report(&mut results, 3, "pose error curves", geometry_curves());

    let bench = Benchmark::new(1, PerturbationSpec::default());
    let t = Instant::now();
    let early = bench.run(SearchSpace::three(), StrategyConfig::early_stopping(1));
    let early_secs = t.elapsed().as_secs_f64();
    log.record("seed 1 early", &early);
    report(
        &mut results,
        4,
        "pose recovery",
        pose_recovery(&bench, &early, early_secs),
    );

    report(
        &mut results,
        5,
        "strategies",
        strategy_properties(&Benchmark::new(2, PerturbationSpec::default()), &mut log),
    );

    let three = bench.run(SearchSpace::three(), StrategyConfig::brute_force());
    let six = bench.run(SearchSpace::six(), StrategyConfig::brute_force());
    log.record("seed 1 brute THREE", &three);
    log.record("seed 1 brute SIX", &six);

    let rotations = PerturbationSpec::new(
        [
            0.3,
            0.3,
            0.3,
            0.5f64.to_radians(),
            0.5f64.to_radians(),
            0.5f64.to_radians(),
        ],
        1,
    )
    .unwrap();
    let suite: Vec<(RefinementResult, RefinementResult)> = (1..=5)
        .map(|seed| {
            let b = Benchmark::new(seed, rotations);
            let a = b.run(SearchSpace::three(), StrategyConfig::brute_force());
            let s = b.run(SearchSpace::six(), StrategyConfig::brute_force());
            log.record(&format!("suite seed {seed} THREE"), &a);
            log.record(&format!("suite seed {seed} SIX"), &s);
            (a, s)
        })
        .collect();
    report(
        &mut results,
        6,
        "search space accounting",
        search_space_accounting(&three, &six, &early, &suite),
    );
    report(
        &mut results,
        7,
        "reduced space adequacy",
        reduced_space_adequacy(&suite),
    );
    report(&mut results, 8, "optimizer sanity", optimizer_sanity(&log));
    report(&mut results, 9, "determinism", cli_determinism());

    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
