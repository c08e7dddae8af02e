use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::canonical::StepPlan;
use crate::error::{invalid, Result};
use crate::linalg::Mat;
use crate::potential::Potential;
use crate::rng::{CounterRng, Domain};
use crate::sampler::{ChainState, HolaKernel, Kernel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub step_size: f64,
    pub nu_star: usize,
    /// `2 L h Γ_φ`.
    pub bound: f64,
    pub probed_steps: Vec<u64>,
    /// Per probed step, the largest node-wise change of each sweep.
    pub deltas: Vec<Vec<f64>>,
    /// Per probed step, the largest ratio of consecutive deltas.
    pub step_ratios: Vec<Option<f64>>,
    pub max_ratio: Option<f64>,
}

impl ProbeReport {
    /// True when every observed ratio is at most `bound + slack`.
    pub fn within(&self, slack: f64) -> bool {
        self.max_ratio.is_none_or(|r| r <= self.bound + slack)
    }
}

/// Runs a chain from zero for `10 · n_probe_steps` steps and records the
/// per-sweep Picard deltas at `n_probe_steps` randomly chosen steps.
///
/// A ratio `Δ_{ν+1}/Δ_ν` is only formed when `Δ_ν` is above rounding level
/// relative to the state, so exact fixed points and round-off do not count.
pub fn picard_probe<P: Potential + ?Sized>(
    plan: &StepPlan,
    potential: &P,
    nu_star: usize,
    n_probe_steps: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if nu_star < 3 {
        return Err(invalid("the Picard probe needs at least 3 sweeps"));
    }
    if n_probe_steps == 0 {
        return Err(invalid("at least one probe step is required"));
    }
    let total = 10 * n_probe_steps;
    let mut pick = CounterRng::new(seed, 0, Domain::Diagnostics);
    let mut probed: Vec<u64> = sample(pick.at(0), total, n_probe_steps)
        .into_iter()
        .map(|i| i as u64)
        .collect();
    probed.sort_unstable();

    let kernel = HolaKernel::new(plan.clone(), nu_star)?;
    let dim = potential.dim();
    let mut ws = kernel.workspace(dim);
    let mut rng = CounterRng::new(seed, 0, Domain::Sampler);
    let mut state = ChainState::from_matrix(Mat::zeros(plan.order(), dim));
    let mut deltas = Vec::with_capacity(n_probe_steps);
    let mut step_ratios = Vec::with_capacity(n_probe_steps);
    let mut next = probed.iter().peekable();
    while (state.step as usize) < total {
        if next.peek().is_some_and(|s| **s == state.step) {
            next.next();
            let floor = 1e-13 * (1.0 + state.x.norm());
            let mut trace = Vec::with_capacity(nu_star);
            kernel.traced_step(potential, &mut state, &mut rng, &mut ws, &mut trace)?;
            let ratio = trace
                .windows(2)
                .filter(|w| w[0] > floor)
                .map(|w| w[1] / w[0])
                .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
            step_ratios.push(ratio);
            deltas.push(trace);
        } else {
            kernel.step(potential, &mut state, &mut rng, &mut ws)?;
        }
    }
    let max_ratio = step_ratios
        .iter()
        .flatten()
        .cloned()
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    Ok(ProbeReport {
        step_size: plan.step_size(),
        nu_star,
        bound: plan.contraction_factor(potential.smoothness().l),
        probed_steps: probed,
        deltas,
        step_ratios,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{build_plan, CanonicalOperators};
    use crate::potential::{FnPotential, GaussianPotential};

    fn plan(h: f64) -> StepPlan {
        build_plan(&CanonicalOperators::new(3, 2.0).unwrap(), 2, h).unwrap()
    }

    #[test]
    fn gaussian_ratio_below_bound() {
        let p = GaussianPotential::isotropic(2, 1.0).unwrap();
        let r = picard_probe(&plan(0.01), &p, 4, 50, 3).unwrap();
        assert_eq!(r.deltas.len(), 50);
        assert!((r.bound - 0.02).abs() < 1e-12);
        assert!(r.within(0.05), "max ratio {:?}", r.max_ratio);
    }

    #[test]
    fn free_dynamics_reach_fixed_point_after_one_sweep() {
        let p = FnPotential::free(2);
        let r = picard_probe(&plan(0.05), &p, 4, 10, 1).unwrap();
        for trace in &r.deltas {
            assert!(trace[0] > 0.0);
            assert!(trace[1..].iter().all(|d| *d == 0.0));
        }
        assert_eq!(r.max_ratio, Some(0.0));
    }

    #[test]
    fn ratio_shrinks_with_step() {
        let p = GaussianPotential::isotropic(2, 1.0).unwrap();
        let coarse = picard_probe(&plan(0.02), &p, 3, 50, 8)
            .unwrap()
            .max_ratio
            .unwrap();
        let fine = picard_probe(&plan(0.01), &p, 3, 50, 8)
            .unwrap()
            .max_ratio
            .unwrap();
        assert!(fine <= 1.5 * coarse / 2.0, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn needs_three_sweeps() {
        let p = GaussianPotential::isotropic(1, 1.0).unwrap();
        assert!(picard_probe(&plan(0.01), &p, 2, 5, 0).is_err());
    }
}
