//! The `hola` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 divergence, 3 failed
//! theory check.

mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub use config::{OutputFormat, PotentialKind, RunArgs, RunConfig, SamplerKind, MAX_SEED};
pub use output::{column_names, format_value, render_samples, report_path, write_atomic};

use crate::baselines::{underdamped_kernel, ExactGaussianKernel, UlaKernel};
use crate::canonical::{CanonicalOperators, StepPlan};
use crate::diagnostics::{
    interpolation_order_check, matrix_rows, moment_report, order_sweep, picard_probe,
    theory_checks, InterpolationOrderResult, ProbeReport, SweepConfig, SweepSampler,
    TheoryCheckConfig,
};
use crate::error::Error;
use crate::linalg::Mat;
use crate::potential::{BuiltinPotential, GaussianPotential, Potential};
use crate::sampler::{
    contraction_warnings, run_kernel_ensemble, Ensemble, Kernel, SampleSet, SamplerConfig, Schedule,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Divergence { .. }) => EXIT_DIVERGED,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hola",
    version,
    about = "Higher-order Langevin Monte Carlo sampler and diagnostics",
    after_help = "Settings precedence for `run`: flags > --config file > defaults. \
                  HOLA_THREADS caps chain parallelism when --threads is not given."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run chains and write samples plus a JSON report.
    Run(RunArgs),
    /// Discretization-error sweep over step sizes at fixed simulated time.
    Sweep(SweepArgs),
    /// Structural checks of the canonical operators, interpolation order and
    /// Picard contraction.
    Check(CheckArgs),
    /// Print the precomputed step plan.
    Plan(PlanArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "hola")]
    pub sampler: SamplerKind,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long)]
    pub picard: Option<usize>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Gaussian curvatures, comma separated (defaults to all ones).
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// Step sizes, comma separated, strictly decreasing (at least three).
    #[arg(long, value_delimiter = ',', required = true)]
    pub h_list: Vec<f64>,
    /// Simulated time per chain, the same for every step size.
    #[arg(long)]
    pub time: f64,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub burn_fraction: f64,
    /// Bootstrap resamples for the slope interval.
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    /// Time blocks per chain used as bootstrap units.
    #[arg(long, default_value_t = 10)]
    pub blocks: usize,
    /// Drive each step size with fresh noise instead of one shared path.
    #[arg(long)]
    pub independent_noise: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 3)]
    pub k_min: usize,
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5")]
    pub gammas: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub m_min: usize,
    #[arg(long, default_value_t = 6)]
    pub m_max: usize,
    /// Planted fault: negate every γ before checking.
    #[arg(long)]
    pub fake_gamma_negative: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Print every matrix as JSON.
    #[arg(long)]
    pub dump: bool,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Check(a) => cmd_check(a),
        Command::Plan(a) => cmd_plan(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hola: {e}");
            e.exit_code()
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("HOLA_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("HOLA_THREADS={v} is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    if threads == Some(0) {
        return Err(CliError::Usage("thread count must be positive".into()));
    }
    Ok(threads)
}

fn build_potential(c: &RunConfig) -> Result<BuiltinPotential, CliError> {
    Ok(match c.potential {
        PotentialKind::Gaussian => {
            BuiltinPotential::gaussian(c.lambda.clone().unwrap_or_else(|| vec![1.0; c.dim]))?
        }
        PotentialKind::Hyperbolic => {
            if c.lambda.is_some() {
                return Err(CliError::Usage(
                    "--lambda applies to the gaussian potential only".into(),
                ));
            }
            BuiltinPotential::hyperbolic(c.dim, c.m)?
        }
    })
}

fn run_with<K: Kernel>(
    kernel: &K,
    p: &BuiltinPotential,
    c: &RunConfig,
    threads: Option<usize>,
) -> Result<Ensemble, CliError> {
    let d = p.dim();
    let rows = kernel.rows();
    let x0 = Mat::zeros(rows, d);
    let schedule = Schedule {
        n_steps: c.steps,
        burn_in: c.burnin,
        thin: c.thin,
    };
    let full = c.full_state;
    Ok(run_kernel_ensemble(
        kernel,
        p,
        &x0,
        schedule,
        c.seed,
        c.chains,
        threads,
        |_| {
            if full {
                SampleSet::full_states(rows, d)
            } else {
                SampleSet::positions(d)
            }
        },
    )?)
}

fn cmd_run(args: &RunArgs) -> Result<i32, CliError> {
    let c = RunConfig::resolve(args)?;
    if c.thin == 0 || c.chains == 0 {
        return Err(CliError::Usage(
            "--thin and --chains must be positive".into(),
        ));
    }
    let threads = resolve_threads(c.threads)?;
    let p = build_potential(&c)?;
    let mut warnings = Vec::new();
    let (ens, per_step) = match c.sampler {
        SamplerKind::Hola => {
            let sc = SamplerConfig {
                nodes: c.nodes,
                nu_star: c.picard,
                burn_in: c.burnin,
                thin: c.thin,
                chains: c.chains,
                strict: c.strict,
                ..SamplerConfig::new(c.order, c.gamma, c.step, c.steps, c.seed)
            };
            let (kernel, w) = sc.kernel(&p)?;
            warnings = w;
            (
                run_with(&kernel, &p, &c, threads)?,
                kernel.grad_evals_per_step(),
            )
        }
        SamplerKind::Underdamped => {
            let kernel = underdamped_kernel(c.gamma, c.step, c.picard.unwrap_or(1))?;
            warnings = contraction_warnings(kernel.plan(), p.smoothness().l);
            if c.strict && !warnings.is_empty() {
                return Err(Error::InvalidParameter(warnings.join("; ")).into());
            }
            (
                run_with(&kernel, &p, &c, threads)?,
                kernel.grad_evals_per_step(),
            )
        }
        SamplerKind::Ula => {
            let kernel = UlaKernel::new(c.step)?;
            (
                run_with(&kernel, &p, &c, threads)?,
                kernel.grad_evals_per_step(),
            )
        }
        SamplerKind::ExactGaussian => {
            let g = p.as_gaussian().ok_or_else(|| {
                CliError::Usage("the exact-gaussian sampler needs --potential gaussian".into())
            })?;
            let kernel =
                ExactGaussianKernel::new(g, &CanonicalOperators::new(c.order, c.gamma)?, c.step)?;
            (
                run_with(&kernel, &p, &c, threads)?,
                kernel.grad_evals_per_step(),
            )
        }
    };
    for w in &warnings {
        eprintln!("hola: warning: {w}");
    }
    if let Some((_, e)) = ens
        .errors()
        .into_iter()
        .find(|(_, e)| !matches!(e, Error::Divergence { .. }))
    {
        return Err(e.clone().into());
    }

    let chains: Vec<(usize, &SampleSet)> = ens
        .runs
        .iter()
        .map(|r| (r.report.chain, &r.samples))
        .collect();
    write_atomic(
        &c.out,
        render_samples(&chains, p.dim(), c.format).as_bytes(),
    )?;

    let pooled = ens.pooled();
    let positions = if c.full_state {
        let rows: Vec<Vec<f64>> = pooled.rows().map(|r| r[..p.dim()].to_vec()).collect();
        SampleSet::from_rows(p.dim(), &rows)
    } else {
        pooled
    };
    let moments = if positions.is_empty() {
        None
    } else {
        Some(moment_report(&positions, Some(&p))?)
    };
    let mut reports: Vec<_> = ens.runs.iter().map(|r| r.report.clone()).collect();
    reports
        .iter_mut()
        .for_each(|r| r.warnings = warnings.clone());
    let diverged = reports.iter().any(|r| r.diverged);
    let report = json!({
        "config": c,
        "sampler": c.sampler.name(),
        "dim": p.dim(),
        "grad_evals": ens.grad_evals(),
        "grad_evals_per_step": per_step,
        "wall_time_secs": reports.iter().map(|r| r.wall_time_secs).sum::<f64>(),
        "diverged": diverged,
        "moments": moments,
        "warnings": warnings,
        "chains": reports,
    });
    write_json(Some(&report_path(&c.out)), &report)?;
    if diverged {
        if let Some(e) = ens.first_error() {
            eprintln!("hola: {e}");
        }
        return Ok(EXIT_DIVERGED);
    }
    Ok(EXIT_OK)
}

fn write_json<T: Serialize>(path: Option<&PathBuf>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32, CliError> {
    if a.h_list.len() < 3 {
        return Err(CliError::Usage(
            "--h-list needs at least three step sizes".into(),
        ));
    }
    let lambda = a.lambda.clone().unwrap_or_else(|| vec![1.0; a.dim]);
    let p = GaussianPotential::new(lambda)?;
    let sampler = match a.sampler {
        SamplerKind::Hola => SweepSampler::Hola {
            order: a.order,
            gamma: a.gamma,
            nodes: a.nodes,
            nu_star: a.picard,
        },
        SamplerKind::Underdamped => SweepSampler::Underdamped {
            gamma: a.gamma,
            nu_star: a.picard.unwrap_or(1),
        },
        SamplerKind::Ula => SweepSampler::Ula,
        SamplerKind::ExactGaussian => SweepSampler::ExactGaussian {
            order: a.order,
            gamma: a.gamma,
        },
    };
    let cfg = SweepConfig {
        burn_fraction: a.burn_fraction,
        threads: resolve_threads(a.threads)?,
        bootstrap_resamples: a.bootstrap,
        blocks_per_chain: a.blocks,
        common_noise: !a.independent_noise,
        ..SweepConfig::new(sampler, a.h_list.clone(), a.time, a.chains, a.seed)
    };
    let result = order_sweep(&p, &cfg)?;
    write_json(a.out.as_ref(), &json!({ "config": cfg, "result": result }))?;
    if result.partial {
        eprintln!(
            "hola: sweep stopped early: {}",
            result.failure.as_deref().unwrap_or("divergence")
        );
        return Ok(EXIT_DIVERGED);
    }
    Ok(EXIT_OK)
}

/// Tolerance on the fitted interpolation order.
const INTERPOLATION_TOL: f64 = 0.15;
/// Slack added to `2LhΓ` when judging probe ratios.
const PROBE_SLACK: f64 = 0.05;

#[derive(Debug, Serialize)]
struct InterpolationEntry {
    curve: &'static str,
    result: InterpolationOrderResult,
    pass: bool,
}

fn interpolation_entries() -> Result<Vec<InterpolationEntry>, CliError> {
    let h = [0.1, 0.05, 0.025, 0.0125];
    let mut out = Vec::new();
    for m in [2usize, 3] {
        let result = interpolation_order_check(|t| vec![(t + 1.0).sin(), t.exp()], m, &h, 0.0)?;
        let pass = result
            .fitted_order
            .is_some_and(|s| (s - m as f64).abs() <= INTERPOLATION_TOL);
        out.push(InterpolationEntry {
            curve: "(sin(t+1), exp t)",
            result,
            pass,
        });
    }
    Ok(out)
}

fn probe_entry(seed: u64) -> Result<(ProbeReport, bool), CliError> {
    let p = GaussianPotential::isotropic(2, 1.0)?;
    let plan = StepPlan::new(CanonicalOperators::new(3, 2.0)?, 2, 0.01)?;
    let report = picard_probe(&plan, &p, 3, 50, seed)?;
    let pass = report.within(PROBE_SLACK);
    Ok((report, pass))
}

fn cmd_check(a: &CheckArgs) -> Result<i32, CliError> {
    if a.k_min > a.k_max || a.m_min > a.m_max {
        return Err(CliError::Usage("empty K or M range".into()));
    }
    let cfg = TheoryCheckConfig {
        orders: (a.k_min..=a.k_max).collect(),
        gammas: a.gammas.clone(),
        node_counts: (a.m_min..=a.m_max).collect(),
        fake_negative_gamma: a.fake_gamma_negative,
    };
    let theory = theory_checks(&cfg)?;
    let interpolation = interpolation_entries()?;
    let (probe, probe_pass) = probe_entry(a.seed)?;
    let pass = theory.all_pass && probe_pass && interpolation.iter().all(|e| e.pass);
    let report = json!({
        "pass": pass,
        "theory": theory,
        "interpolation": interpolation,
        "picard_probe": { "report": probe, "slack": PROBE_SLACK, "pass": probe_pass },
    });
    write_json(a.out.as_ref(), &report)?;
    if !pass {
        for e in theory.entries.iter().filter(|e| !e.pass) {
            eprintln!(
                "hola: check {} failed (K={:?}, gamma={:?}, M={:?}, value {}, margin {})",
                e.check, e.order, e.gamma, e.nodes, e.value, e.margin
            );
        }
        return Ok(EXIT_CHECK_FAILED);
    }
    Ok(EXIT_OK)
}

fn cmd_plan(a: &PlanArgs) -> Result<i32, CliError> {
    let ops = CanonicalOperators::new(a.order, a.gamma)?;
    let m = a.nodes.unwrap_or(a.order.saturating_sub(1).max(2));
    let plan = StepPlan::new(ops.clone(), m, a.step)?;
    if !a.dump {
        println!(
            "K={} gamma={} M={} h={} Lebesgue={:.6} (use --dump for matrices)",
            a.order,
            a.gamma,
            m,
            a.step,
            plan.lebesgue()
        );
        return Ok(EXIT_OK);
    }
    let alpha: Vec<Vec<Vec<Vec<f64>>>> = plan
        .alpha()
        .iter()
        .map(|row| row.iter().map(matrix_rows).collect())
        .collect();
    let report = json!({
        "order": a.order,
        "gamma": a.gamma,
        "step": a.step,
        "nodes": plan.nodes().nodes(),
        "lebesgue": plan.lebesgue(),
        "diffusion": matrix_rows(ops.diffusion()),
        "skew": matrix_rows(ops.skew()),
        "linear_drift": matrix_rows(ops.linear_drift()),
        "exp_at_nodes": plan.exp_at_nodes().iter().map(matrix_rows).collect::<Vec<_>>(),
        "alpha": alpha,
        "sigma_c": matrix_rows(plan.sigma_c()),
        "noise_factor": matrix_rows(plan.noise_factor()),
    });
    write_json(None, &report)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_run_flags() {
        let cli = Cli::try_parse_from([
            "hola",
            "run",
            "--potential",
            "gaussian",
            "--dim",
            "2",
            "--order",
            "3",
            "--gamma",
            "2",
            "--step",
            "0.05",
            "--steps",
            "1000",
            "--seed",
            "7",
            "--out",
            "s.csv",
            "--lambda",
            "1,4",
        ])
        .unwrap();
        let Command::Run(a) = cli.command else {
            panic!("expected run")
        };
        assert_eq!(a.lambda, Some(vec![1.0, 4.0]));
        assert_eq!(a.seed, Some(7));
    }

    #[test]
    fn missing_seed_is_usage_error() {
        let code = main_with_args([
            "hola",
            "run",
            "--steps",
            "10",
            "--out",
            "/nonexistent/dir/x.csv",
        ]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(main_with_args(["hola", "run", "--bogus"]), EXIT_USAGE);
    }

    #[test]
    fn divergence_maps_to_exit_two() {
        assert_eq!(
            CliError::Core(Error::Divergence {
                step: 3,
                node: None
            })
            .exit_code(),
            EXIT_DIVERGED
        );
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
    }
}
