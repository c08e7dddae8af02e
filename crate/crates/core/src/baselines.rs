//! Reference samplers: overdamped Euler–Maruyama (ULA), the K=2 underdamped
//! special case of the Picard–Lagrange step, and exact simulation of the
//! linear SDE for diagonal quadratic potentials.

use crate::canonical::{node_covariance, CanonicalOperators, StepPlan};
use crate::error::{invalid, Error, Result};
use crate::linalg::{expm, psd_factor, Mat};
use crate::potential::{GaussianPotential, Potential};
use crate::rng::CounterRng;
use crate::sampler::{
    picard_step, run_kernel_chain, ChainState, HolaKernel, Kernel, SampleSet, Schedule,
};

/// `x ← x − h∇U(x) + √(2h) ξ`, one gradient evaluation.
pub fn ula_step<P: Potential + ?Sized>(
    potential: &P,
    x: &mut [f64],
    h: f64,
    xi: &[f64],
    grad: &mut [f64],
) -> Result<()> {
    potential.grad(x, grad);
    let scale = (2.0 * h).sqrt();
    for ((xi_out, g), n) in x.iter_mut().zip(grad.iter()).zip(xi) {
        *xi_out += -h * g + scale * n;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            step: 0,
            node: None,
        });
    }
    Ok(())
}

/// Stationary variance of ULA on `U = λx²/2`: the AR(1) chain
/// `x' = (1−hλ)x + √(2h)ξ` has variance `2h / (1 − (1−hλ)²)`.
pub fn ula_stationary_variance(lambda: f64, h: f64) -> f64 {
    let a = 1.0 - h * lambda;
    2.0 * h / (1.0 - a * a)
}

/// Overdamped Langevin, Euler–Maruyama. State is a 1×d matrix.
#[derive(Debug, Clone)]
pub struct UlaKernel {
    h: f64,
    // fine Brownian increments per step when sharing a path across step sizes
    fine_per_step: Option<u64>,
}

#[derive(Debug)]
pub struct UlaWorkspace {
    x: Vec<f64>,
    grad: Vec<f64>,
    xi: Vec<f64>,
    z: Vec<f64>,
}

impl UlaKernel {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("step size must be positive, got {h}")));
        }
        Ok(Self {
            h,
            fine_per_step: None,
        })
    }

    /// Builds each step's Gaussian increment from `fine` Brownian increments.
    pub fn with_refined_noise(mut self, fine: u64) -> Result<Self> {
        if fine == 0 {
            return Err(invalid("fine increments per step must be positive"));
        }
        self.fine_per_step = Some(fine);
        Ok(self)
    }
}

impl Kernel for UlaKernel {
    type Workspace = UlaWorkspace;

    fn name(&self) -> &'static str {
        "ula"
    }
    fn rows(&self) -> usize {
        1
    }
    fn step_size(&self) -> f64 {
        self.h
    }
    fn grad_evals_per_step(&self) -> u64 {
        1
    }
    fn workspace(&self, dim: usize) -> UlaWorkspace {
        UlaWorkspace {
            x: vec![0.0; dim],
            grad: vec![0.0; dim],
            xi: vec![0.0; dim],
            z: vec![0.0; dim],
        }
    }

    fn step<P: Potential + ?Sized>(
        &self,
        potential: &P,
        state: &mut ChainState,
        rng: &mut CounterRng,
        ws: &mut UlaWorkspace,
    ) -> Result<()> {
        match self.fine_per_step {
            None => rng.normals_at(state.step, &mut ws.xi),
            Some(fine) => {
                // Σ √(2δ) z_i = √(2h) ξ with ξ standard normal
                ws.xi.fill(0.0);
                for i in 0..fine {
                    rng.normals_at(state.step * fine + i, &mut ws.z);
                    ws.xi.iter_mut().zip(&ws.z).for_each(|(a, b)| *a += b);
                }
                let norm = (fine as f64).sqrt().recip();
                ws.xi.iter_mut().for_each(|a| *a *= norm);
            }
        }
        for (c, v) in ws.x.iter_mut().enumerate() {
            *v = state.x[(0, c)];
        }
        state.step += 1;
        state.grad_evals += 1;
        ula_step(potential, &mut ws.x, self.h, &ws.xi, &mut ws.grad).map_err(|_| {
            Error::Divergence {
                step: state.step,
                node: None,
            }
        })?;
        for (c, v) in ws.x.iter().enumerate() {
            state.x[(0, c)] = *v;
        }
        Ok(())
    }
}

/// The K=2 kernel: underdamped Langevin through the same Picard–Lagrange
/// step with nodes {0, 1}.
pub fn underdamped_kernel(gamma: f64, h: f64, nu_star: usize) -> Result<HolaKernel> {
    let plan = StepPlan::new(CanonicalOperators::new(2, gamma)?, 2, h)?;
    HolaKernel::new(plan, nu_star)
}

/// One underdamped step; identical to [`picard_step`] on a K=2 plan.
pub fn underdamped_step<P: Potential + ?Sized>(
    plan: &StepPlan,
    potential: &P,
    state: &mut ChainState,
    noise: &[Mat],
    nu_star: usize,
) -> Result<()> {
    if plan.order() != 2 || plan.node_count() != 2 {
        return Err(invalid("underdamped step needs a plan with K=2 and M=2"));
    }
    picard_step(plan, potential, state, noise, nu_star)
}

/// Exact one-step law of the order-K linear SDE along one coordinate with
/// curvature λ: `x ← e^{hB}x + ξ`, `ξ ∼ N(0, 2∫₀^h e^{uB} D e^{uBᵀ} du)`.
#[derive(Debug, Clone)]
pub struct LinearSdeStep {
    pub lambda: f64,
    pub mean_op: Mat,
    pub cov: Mat,
    pub cov_factor: Mat,
}

impl LinearSdeStep {
    pub fn new(ops: &CanonicalOperators, lambda: f64, h: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!(
                "curvature must be nonnegative, got {lambda}"
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("step size must be positive, got {h}")));
        }
        let b = ops.quadratic_drift(lambda);
        let mean_op = expm(&(&b * h))?;
        let cov = node_covariance(&b, ops.diffusion(), h)?;
        let cov_factor = psd_factor(&cov)?;
        Ok(Self {
            lambda,
            mean_op,
            cov,
            cov_factor,
        })
    }
}

/// Exact simulation for `U = ½ Σ λᵢ xᵢ²`. Uses no gradient evaluations.
#[derive(Debug, Clone)]
pub struct ExactGaussianKernel {
    ops: CanonicalOperators,
    h: f64,
    coords: Vec<LinearSdeStep>,
    fine: Option<(u64, Vec<LinearSdeStep>)>,
}

#[derive(Debug)]
pub struct ExactWorkspace {
    z: Mat,
    acc: Mat,
}

impl ExactGaussianKernel {
    pub fn new(potential: &GaussianPotential, ops: &CanonicalOperators, h: f64) -> Result<Self> {
        let coords = potential
            .lambda()
            .iter()
            .map(|&l| LinearSdeStep::new(ops, l, h))
            .collect::<Result<_>>()?;
        Ok(Self {
            ops: ops.clone(),
            h,
            coords,
            fine: None,
        })
    }

    pub fn from_lambda(lambda: &[f64], ops: &CanonicalOperators, h: f64) -> Result<Self> {
        Self::new(&GaussianPotential::new(lambda.to_vec())?, ops, h)
    }

    /// Composes each step's noise from `fine` exact sub-increments.
    pub fn with_refined_noise(mut self, fine: u64) -> Result<Self> {
        if fine == 0 {
            return Err(invalid("fine increments per step must be positive"));
        }
        let dt = self.h / fine as f64;
        let sub = self
            .coords
            .iter()
            .map(|c| LinearSdeStep::new(&self.ops, c.lambda, dt))
            .collect::<Result<_>>()?;
        self.fine = Some((fine, sub));
        Ok(self)
    }

    pub fn coords(&self) -> &[LinearSdeStep] {
        &self.coords
    }
}

impl Kernel for ExactGaussianKernel {
    type Workspace = ExactWorkspace;

    fn name(&self) -> &'static str {
        "exact-gaussian"
    }
    fn rows(&self) -> usize {
        self.ops.order()
    }
    fn step_size(&self) -> f64 {
        self.h
    }
    fn grad_evals_per_step(&self) -> u64 {
        0
    }
    fn workspace(&self, dim: usize) -> ExactWorkspace {
        let k = self.ops.order();
        ExactWorkspace {
            z: Mat::zeros(k, dim),
            acc: Mat::zeros(k, dim),
        }
    }

    fn step<P: Potential + ?Sized>(
        &self,
        _potential: &P,
        state: &mut ChainState,
        rng: &mut CounterRng,
        ws: &mut ExactWorkspace,
    ) -> Result<()> {
        let d = state.dim();
        if d != self.coords.len() {
            return Err(Error::Shape(format!(
                "exact kernel built for dim {}, state has {d}",
                self.coords.len()
            )));
        }
        match &self.fine {
            None => {
                rng.normals_at(state.step, ws.z.as_mut_slice());
                for (c, lin) in self.coords.iter().enumerate() {
                    let col = &lin.mean_op * state.x.column(c) + &lin.cov_factor * ws.z.column(c);
                    state.x.set_column(c, &col);
                }
            }
            Some((fine, sub)) => {
                // noise over [0, h] = Σ_i e^{(h − t_{i+1})B} ξ_i
                let acc = &mut ws.acc;
                acc.fill(0.0);
                for i in 0..*fine {
                    rng.normals_at(state.step * fine + i, ws.z.as_mut_slice());
                    for (c, lin) in sub.iter().enumerate() {
                        let col = &lin.mean_op * acc.column(c) + &lin.cov_factor * ws.z.column(c);
                        acc.set_column(c, &col);
                    }
                }
                for (c, lin) in self.coords.iter().enumerate() {
                    let col = &lin.mean_op * state.x.column(c) + acc.column(c);
                    state.x.set_column(c, &col);
                }
            }
        }
        state.step += 1;
        if !state.is_finite() {
            return Err(Error::Divergence {
                step: state.step,
                node: None,
            });
        }
        Ok(())
    }
}

/// Runs the exact linear-SDE chain for `n_steps` steps from zero and returns
/// every position sample.
pub fn exact_gaussian_chain(
    lambda: &[f64],
    ops: &CanonicalOperators,
    h: f64,
    n_steps: u64,
    seed: u64,
) -> Result<SampleSet> {
    let kernel = ExactGaussianKernel::from_lambda(lambda, ops, h)?;
    let potential = GaussianPotential::new(lambda.to_vec())?;
    let x0 = Mat::zeros(ops.order(), lambda.len());
    let schedule = Schedule {
        n_steps,
        burn_in: 0,
        thin: 1,
    };
    let run = run_kernel_chain(
        &kernel,
        &potential,
        &x0,
        schedule,
        seed,
        0,
        SampleSet::positions(lambda.len()),
    );
    match run.error {
        Some(e) => Err(e),
        None => Ok(run.samples),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::build_plan;
    use crate::potential::FnPotential;
    use crate::rng::Domain;
    use crate::sampler::sample_node_noise;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ula_ar1_variance_closed_form() {
        let h = 0.01;
        assert!((ula_stationary_variance(1.0, h) - 1.0 / (1.0 - h / 2.0)).abs() < 1e-12);
        assert!((ula_stationary_variance(2.0, 0.1) - 1.0 / (2.0 * (1.0 - 0.1))).abs() < 1e-12);
    }

    #[test]
    fn ula_free_diffusion_increment_variance() {
        let free = FnPotential::free(1);
        let kernel = UlaKernel::new(1.0).unwrap();
        let mut rng = CounterRng::new(3, 0, Domain::Sampler);
        let mut ws = kernel.workspace(1);
        let n = 100_000;
        let mut sum2 = 0.0;
        for i in 0..n {
            let mut s = ChainState::zeros(1, 1);
            s.step = i;
            let before = s.x[(0, 0)];
            kernel.step(&free, &mut s, &mut rng, &mut ws).unwrap();
            sum2 += (s.x[(0, 0)] - before).powi(2);
        }
        let var = sum2 / n as f64;
        // se of a variance estimate of N(0, 2) is 2·√(2/n)
        assert!(
            (var - 2.0).abs() < 3.0 * 2.0 * (2.0 / n as f64).sqrt(),
            "var {var}"
        );
    }

    #[test]
    fn ula_replayed_tape_is_bit_identical() {
        let p = GaussianPotential::new(vec![1.0, 2.0]).unwrap();
        let tape = [0.3, -1.2];
        let run = || {
            let mut x = vec![0.5, -0.25];
            let mut g = vec![0.0; 2];
            ula_step(&p, &mut x, 0.05, &tape, &mut g).unwrap();
            x
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn underdamped_is_picard_step_at_order_two() {
        let plan = build_plan(&CanonicalOperators::new(2, 2.0).unwrap(), 2, 0.05).unwrap();
        let p = GaussianPotential::new(vec![1.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = sample_node_noise(&plan, 2, &mut rng);
        let x = Mat::from_row_slice(2, 2, &[0.4, -0.3, 1.0, 0.2]);
        let mut a = ChainState::from_matrix(x.clone());
        let mut b = ChainState::from_matrix(x);
        underdamped_step(&plan, &p, &mut a, &noise, 2).unwrap();
        picard_step(&plan, &p, &mut b, &noise, 2).unwrap();
        assert_eq!(a, b);

        let k3 = build_plan(&CanonicalOperators::new(3, 2.0).unwrap(), 2, 0.05).unwrap();
        assert!(underdamped_step(&k3, &p, &mut a, &noise, 2).is_err());
    }

    #[test]
    fn underdamped_exponential_closed_form() {
        let (g, h) = (2.0, 0.05);
        let kernel = underdamped_kernel(g, h, 1).unwrap();
        let e = &kernel.plan().exp_at_nodes()[1];
        let decay = (-g * h).exp();
        let want = Mat::from_row_slice(2, 2, &[1.0, (1.0 - decay) / g, 0.0, decay]);
        assert!((e - want).norm() < 1e-14);
    }

    #[test]
    fn zero_curvature_reduces_to_free_covariance() {
        let ops = CanonicalOperators::new(3, 2.0).unwrap();
        let lin = LinearSdeStep::new(&ops, 0.0, 0.1).unwrap();
        let plan = build_plan(&ops, 2, 0.1).unwrap();
        let sigma1 = plan.sigma_c().view((3, 3), (3, 3)).into_owned();
        assert!((&lin.cov - sigma1).norm() < 1e-11);
        assert!((&lin.cov - lin.cov.transpose()).norm() == 0.0);
        assert!((&lin.mean_op - &plan.exp_at_nodes()[1]).norm() < 1e-14);
    }

    #[test]
    fn exact_chain_rejects_zero_curvature() {
        let ops = CanonicalOperators::new(3, 2.0).unwrap();
        assert!(matches!(
            exact_gaussian_chain(&[0.0], &ops, 0.1, 10, 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn refined_exact_noise_has_the_coarse_covariance() {
        // composing fine exact increments reproduces the one-step covariance
        let ops = CanonicalOperators::new(3, 2.0).unwrap();
        let coarse = LinearSdeStep::new(&ops, 1.5, 0.2).unwrap();
        let fine = LinearSdeStep::new(&ops, 1.5, 0.05).unwrap();
        let mut cov = Mat::zeros(3, 3);
        for _ in 0..4 {
            cov = &fine.mean_op * cov * fine.mean_op.transpose() + &fine.cov;
        }
        assert!((cov - &coarse.cov).norm() < 1e-13);
    }
}
