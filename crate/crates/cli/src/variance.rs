use std::io::Write;

use aperture_core::variance_model::{model_moments, monte_carlo_integral, var_integral, var_single};
use aperture_core::OcclusionStats;

use crate::{CliError, VarianceArgs};

/// Agreement band in standard errors.
pub const SE_BAND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceCheck {
    pub var_single: f64,
    pub var_integral: f64,
    pub model_mean: f64,
    pub model_variance: f64,
    pub mc_mean: f64,
    pub mc_mean_se: f64,
    pub mc_variance: f64,
    pub mc_variance_se: f64,
    pub pass: bool,
}

pub fn check(args: &VarianceArgs) -> Result<VarianceCheck, CliError> {
    let stats = OcclusionStats::new(args.d, args.mu_o, args.sigma2_o, args.mu_s, args.sigma2_s)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let cfg = |e: aperture_core::variance_model::ModelError| CliError::Config(e.to_string());
    let vi = var_integral(&stats, args.n).map_err(cfg)?;
    let model = model_moments(&stats, args.n).map_err(cfg)?;
    let mc = monte_carlo_integral(&stats, args.n, args.mc_pixels, args.seed).map_err(cfg)?;
    let within = |est: f64, exact: f64, se: f64| (est - exact).abs() <= SE_BAND * se || est == exact;
    Ok(VarianceCheck {
        var_single: var_single(&stats),
        var_integral: vi,
        model_mean: model.mean,
        model_variance: model.variance,
        mc_mean: mc.moments.mean,
        mc_mean_se: mc.mean_std_error,
        mc_variance: mc.moments.variance,
        mc_variance_se: mc.variance_std_error,
        pass: within(mc.moments.mean, model.mean, mc.mean_std_error)
            && within(mc.moments.variance, vi, mc.variance_std_error),
    })
}

pub fn run(args: &VarianceArgs, out: &mut impl Write) -> Result<(), CliError> {
    let c = check(args)?;
    let io = |e| CliError::io("<stdout>".as_ref(), e);
    writeln!(
        out,
        "D={} mu_o={} sigma2_o={} mu_s={} sigma2_s={} N={} pixels={} seed={}",
        args.d, args.mu_o, args.sigma2_o, args.mu_s, args.sigma2_s, args.n, args.mc_pixels, args.seed
    )
    .map_err(io)?;
    writeln!(
        out,
        "{:<14} {:>14} {:>14} {:>12}",
        "quantity", "closed_form", "monte_carlo", "std_error"
    )
    .map_err(io)?;
    writeln!(out, "{:<14} {:>14.6} {:>14} {:>12}", "var_single", c.var_single, "", "").map_err(io)?;
    writeln!(
        out,
        "{:<14} {:>14.6} {:>14.6} {:>12.6}",
        "mean", c.model_mean, c.mc_mean, c.mc_mean_se
    )
    .map_err(io)?;
    writeln!(
        out,
        "{:<14} {:>14.6} {:>14.6} {:>12.6}",
        "var_integral", c.var_integral, c.mc_variance, c.mc_variance_se
    )
    .map_err(io)?;
    writeln!(out, "{:<14} {:>14.6}", "var_moments", c.model_variance).map_err(io)?;
    writeln!(out, "{}", if c.pass { "PASS" } else { "FAIL" }).map_err(io)?;
    Ok(())
}
