use rand::Rng;
use serde::{Deserialize, Serialize};

use super::moments::{matrix_rows, BlockedMoments, MomentAccumulator};
use super::wasserstein::gaussian_w2;
use crate::baselines::{underdamped_kernel, ExactGaussianKernel, UlaKernel};
use crate::canonical::{CanonicalOperators, StepPlan};
use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::potential::{GaussianPotential, Potential};
use crate::rng::{CounterRng, Domain};
use crate::sampler::{run_kernel_ensemble, HolaKernel, Kernel, Schedule};

/// Sampler driven through an order sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SweepSampler {
    Hola {
        order: usize,
        gamma: f64,
        nodes: Option<usize>,
        nu_star: Option<usize>,
    },
    Underdamped {
        gamma: f64,
        nu_star: usize,
    },
    Ula,
    ExactGaussian {
        order: usize,
        gamma: f64,
    },
}

impl SweepSampler {
    pub fn name(&self) -> &'static str {
        match self {
            SweepSampler::Hola { .. } => "hola",
            SweepSampler::Underdamped { .. } => "underdamped",
            SweepSampler::Ula => "ula",
            SweepSampler::ExactGaussian { .. } => "exact-gaussian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub sampler: SweepSampler,
    /// Step sizes, strictly decreasing. A slope is fitted when there are
    /// at least two.
    pub h_values: Vec<f64>,
    /// Simulated time per chain, held fixed across step sizes.
    pub total_time: f64,
    /// Fraction of each chain discarded as burn-in.
    pub burn_fraction: f64,
    pub chains: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub bootstrap_resamples: usize,
    /// Time blocks per chain used as bootstrap units.
    pub blocks_per_chain: usize,
    /// Drive every step size with one shared Brownian path per chain when
    /// the step sizes are integer multiples of the smallest one.
    pub common_noise: bool,
}

impl SweepConfig {
    pub fn new(
        sampler: SweepSampler,
        h_values: Vec<f64>,
        total_time: f64,
        chains: usize,
        seed: u64,
    ) -> Self {
        Self {
            sampler,
            h_values,
            total_time,
            burn_fraction: 0.05,
            chains,
            seed,
            threads: None,
            bootstrap_resamples: 200,
            blocks_per_chain: 10,
            common_noise: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.h_values.is_empty() {
            return Err(invalid("an order sweep needs at least one step size"));
        }
        if self.h_values.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(invalid("step sizes must be positive and finite"));
        }
        if self.h_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("step sizes must be strictly decreasing"));
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(invalid("total time must be positive"));
        }
        if !(0.0..1.0).contains(&self.burn_fraction) {
            return Err(invalid("burn fraction must lie in [0, 1)"));
        }
        if self.chains == 0 || self.blocks_per_chain == 0 {
            return Err(invalid("chains and blocks per chain must be positive"));
        }
        Ok(())
    }

    /// Per-h multiples of the smallest step size, when all are integers.
    fn refinements(&self) -> Option<Vec<u64>> {
        let h_min = *self.h_values.last()?;
        self.h_values
            .iter()
            .map(|h| {
                let r = h / h_min;
                let n = r.round();
                ((r - n).abs() <= 1e-9 * r).then_some(n as u64)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub h: f64,
    pub n_steps: u64,
    pub burn_in: u64,
    pub grad_evals: u64,
    pub error: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSweepResult {
    pub sampler: String,
    pub h_values: Vec<f64>,
    pub errors: Vec<f64>,
    pub grad_evals: Vec<u64>,
    pub fitted_slope: Option<f64>,
    /// 2.5% and 97.5% bootstrap percentiles of the slope.
    pub slope_ci: Option<(f64, f64)>,
    pub monotone_decreasing: bool,
    pub common_noise: bool,
    pub points: Vec<SweepPoint>,
    /// Set when a run diverged; the points before it are kept.
    pub partial: bool,
    pub failure: Option<String>,
}

impl OrderSweepResult {
    pub fn slope_ci_contains(&self, value: f64) -> bool {
        self.slope_ci
            .is_some_and(|(lo, hi)| lo <= value && value <= hi)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn target_error(p: &GaussianPotential, acc: &MomentAccumulator) -> Result<f64> {
    let d = p.dim();
    let target = Mat::from_diagonal(&nalgebra::DVector::from_vec(p.stationary_variances()));
    gaussian_w2(acc.mean(), &acc.covariance(), &vec![0.0; d], &target)
}

enum PointOutcome {
    Done {
        blocks: Vec<BlockedMoments>,
        grad_evals: u64,
        schedule: Schedule,
    },
    Diverged(String),
}

fn run_point<K: Kernel>(
    kernel: &K,
    p: &GaussianPotential,
    cfg: &SweepConfig,
) -> Result<PointOutcome> {
    let h = kernel.step_size();
    let n_steps = (cfg.total_time / h).round() as u64;
    let burn_in = (cfg.burn_fraction * n_steps as f64).round() as u64;
    let retained = n_steps - burn_in;
    if retained < cfg.blocks_per_chain as u64 {
        return Err(Error::InsufficientData {
            needed: cfg.blocks_per_chain,
            got: retained as usize,
        });
    }
    let per_block = retained.div_ceil(cfg.blocks_per_chain as u64);
    let schedule = Schedule {
        n_steps,
        burn_in,
        thin: 1,
    };
    let d = p.dim();
    let x0 = Mat::zeros(kernel.rows(), d);
    let ens = run_kernel_ensemble(
        kernel,
        p,
        &x0,
        schedule,
        cfg.seed,
        cfg.chains,
        cfg.threads,
        |_| BlockedMoments::new(d, burn_in + 1, per_block, cfg.blocks_per_chain),
    )?;
    if let Some((chain, e)) = ens.errors().first() {
        return match e {
            Error::Divergence { .. } => {
                Ok(PointOutcome::Diverged(format!("h={h}: chain {chain}: {e}")))
            }
            other => Err((*other).clone()),
        };
    }
    let grad_evals = ens.grad_evals();
    Ok(PointOutcome::Done {
        blocks: ens.runs.into_iter().map(|r| r.samples).collect(),
        grad_evals,
        schedule,
    })
}

fn build_and_run(
    p: &GaussianPotential,
    cfg: &SweepConfig,
    h: f64,
    refine: Option<u64>,
) -> Result<PointOutcome> {
    let l = p.smoothness().l;
    let guard = |plan: &StepPlan| {
        let rho = plan.contraction_factor(l);
        if rho >= 0.5 {
            Err(invalid(format!(
                "h={h} violates the contraction guard (2LhΓ = {rho:.4} ≥ 0.5)"
            )))
        } else {
            Ok(())
        }
    };
    match &cfg.sampler {
        SweepSampler::Hola {
            order,
            gamma,
            nodes,
            nu_star,
        } => {
            if *order < 3 {
                return Err(invalid("the hola sweep needs K ≥ 3"));
            }
            let ops = CanonicalOperators::new(*order, *gamma)?;
            let plan = StepPlan::new(ops, nodes.unwrap_or(order - 1), h)?;
            guard(&plan)?;
            let mut kernel = HolaKernel::new(plan, nu_star.unwrap_or(order - 1))?;
            if let Some(r) = refine {
                kernel = kernel.with_refined_noise(r as usize)?;
            }
            run_point(&kernel, p, cfg)
        }
        SweepSampler::Underdamped { gamma, nu_star } => {
            let mut kernel = underdamped_kernel(*gamma, h, *nu_star)?;
            guard(kernel.plan())?;
            if let Some(r) = refine {
                kernel = kernel.with_refined_noise(r as usize)?;
            }
            run_point(&kernel, p, cfg)
        }
        SweepSampler::Ula => {
            let mut kernel = UlaKernel::new(h)?;
            if let Some(r) = refine {
                kernel = kernel.with_refined_noise(r)?;
            }
            run_point(&kernel, p, cfg)
        }
        SweepSampler::ExactGaussian { order, gamma } => {
            let ops = CanonicalOperators::new(*order, *gamma)?;
            let mut kernel = ExactGaussianKernel::new(p, &ops, h)?;
            if let Some(r) = refine {
                kernel = kernel.with_refined_noise(r)?;
            }
            run_point(&kernel, p, cfg)
        }
    }
}

/// Runs `config.sampler` at each step size for a fixed simulated time and
/// measures the Bures–Wasserstein distance between the empirical position
/// moments and the exact target. The slope interval comes from resampling
/// (chain, time block) units with replacement, using the same draw at every
/// step size.
pub fn order_sweep(p: &GaussianPotential, config: &SweepConfig) -> Result<OrderSweepResult> {
    config.validate()?;
    let refinements = if config.common_noise {
        config.refinements()
    } else {
        None
    };
    let mut points = Vec::new();
    let mut units: Vec<Vec<MomentAccumulator>> = Vec::new();
    let mut failure = None;
    for (i, &h) in config.h_values.iter().enumerate() {
        match build_and_run(p, config, h, refinements.as_ref().map(|r| r[i]))? {
            PointOutcome::Diverged(msg) => {
                failure = Some(msg);
                break;
            }
            PointOutcome::Done {
                blocks,
                grad_evals,
                schedule,
            } => {
                let flat: Vec<MomentAccumulator> = blocks
                    .iter()
                    .flat_map(|b| b.blocks().iter().cloned())
                    .collect();
                let mut total = MomentAccumulator::new(p.dim());
                flat.iter().for_each(|a| total.merge(a));
                points.push(SweepPoint {
                    h,
                    n_steps: schedule.n_steps,
                    burn_in: schedule.burn_in,
                    grad_evals,
                    error: target_error(p, &total)?,
                    mean: total.mean().to_vec(),
                    cov: matrix_rows(&total.covariance()),
                });
                units.push(flat);
            }
        }
    }

    let h_values: Vec<f64> = points.iter().map(|q| q.h).collect();
    let errors: Vec<f64> = points.iter().map(|q| q.error).collect();
    let fitted_slope = (points.len() >= 2).then(|| fit_log_slope(&h_values, &errors));
    let slope_ci = if points.len() >= 2 && config.bootstrap_resamples > 0 {
        let n_units = units[0].len();
        let mut slopes = Vec::with_capacity(config.bootstrap_resamples);
        for b in 0..config.bootstrap_resamples {
            let mut rng = CounterRng::new(config.seed, b as u64, Domain::Bootstrap);
            let rng = rng.at(0);
            let picks: Vec<usize> = (0..n_units).map(|_| rng.random_range(0..n_units)).collect();
            let errs = units
                .iter()
                .map(|u| {
                    let mut acc = MomentAccumulator::new(p.dim());
                    picks.iter().for_each(|&k| acc.merge(&u[k]));
                    target_error(p, &acc)
                })
                .collect::<Result<Vec<f64>>>()?;
            slopes.push(fit_log_slope(&h_values, &errs));
        }
        slopes.sort_by(|a, b| a.total_cmp(b));
        Some((percentile(&slopes, 0.025), percentile(&slopes, 0.975)))
    } else {
        None
    };
    Ok(OrderSweepResult {
        sampler: config.sampler.name().to_string(),
        monotone_decreasing: errors.windows(2).all(|w| w[1] < w[0]),
        grad_evals: points.iter().map(|q| q.grad_evals).collect(),
        h_values,
        errors,
        fitted_slope,
        slope_ci,
        common_noise: refinements.is_some(),
        points,
        partial: failure.is_some(),
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let h = [0.2, 0.1, 0.05];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((fit_log_slope(&h, &e) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unsorted_steps() {
        let p = GaussianPotential::isotropic(1, 1.0).unwrap();
        let cfg = SweepConfig::new(SweepSampler::Ula, vec![0.1, 0.2], 10.0, 1, 0);
        assert!(matches!(
            order_sweep(&p, &cfg),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn refinement_detection() {
        let cfg = SweepConfig::new(SweepSampler::Ula, vec![0.2, 0.1, 0.05], 10.0, 1, 0);
        assert_eq!(cfg.refinements(), Some(vec![4, 2, 1]));
        let cfg = SweepConfig::new(SweepSampler::Ula, vec![0.2, 0.15], 10.0, 1, 0);
        assert_eq!(cfg.refinements(), None);
    }

    #[test]
    fn sweep_is_deterministic() {
        let p = GaussianPotential::isotropic(2, 1.0).unwrap();
        let mut cfg = SweepConfig::new(
            SweepSampler::Hola {
                order: 3,
                gamma: 2.0,
                nodes: None,
                nu_star: None,
            },
            vec![0.2, 0.1],
            50.0,
            2,
            5,
        );
        cfg.bootstrap_resamples = 20;
        cfg.threads = Some(1);
        let a = order_sweep(&p, &cfg).unwrap();
        cfg.threads = Some(2);
        let b = order_sweep(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.grad_evals, vec![250 * 2 * 2 * 2, 500 * 2 * 2 * 2]);
        assert!(a.errors.iter().all(|e| *e >= 0.0));
    }

    #[test]
    fn guard_violation_is_rejected() {
        let p = GaussianPotential::isotropic(1, 10.0).unwrap();
        let cfg = SweepConfig::new(
            SweepSampler::Hola {
                order: 3,
                gamma: 2.0,
                nodes: None,
                nu_star: None,
            },
            vec![0.2, 0.1],
            10.0,
            1,
            0,
        );
        assert!(matches!(
            order_sweep(&p, &cfg),
            Err(Error::InvalidParameter(_))
        ));
    }
}
