//! Exact stationary law of the Picard–Lagrange chain on a quadratic target.
//!
//! For `U = ½ λ x²` the step is affine in `(x, W)`, so the chain is a linear
//! Gaussian recursion `x' = G x + R w` whose stationary covariance solves a
//! discrete Lyapunov equation. This gives the discretization bias with no
//! Monte Carlo error.

use crate::canonical::StepPlan;
use crate::error::{invalid, Result};
use crate::linalg::{symmetrize, Mat};
use crate::potential::{FnPotential, GaussianPotential, Smoothness};
use crate::sampler::{ChainState, PicardStepper};

/// One-step transition `G` and noise gain `R` for a single coordinate.
pub fn linear_step_maps(plan: &StepPlan, nu_star: usize, lambda: f64) -> Result<(Mat, Mat)> {
    let k = plan.order();
    let m = plan.node_count();
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!(
            "curvature must be nonnegative, got {lambda}"
        )));
    }
    let p = FnPotential::new(1, Smoothness { m: 1.0, l: 1.0 }, move |x, out| {
        out[0] = lambda * x[0]
    });
    let mut stepper = PicardStepper::new(plan, 1);
    let zero_noise = vec![Mat::zeros(k, 1); m];
    let mut g = Mat::zeros(k, k);
    for i in 0..k {
        let mut s = ChainState::zeros(k, 1);
        s.x[(i, 0)] = 1.0;
        stepper.step(plan, &p, &mut s, &zero_noise, nu_star, None)?;
        g.set_column(i, &s.x.column(0));
    }
    let mut r = Mat::zeros(k, m * k);
    for l in 0..m * k {
        let mut noise = zero_noise.clone();
        noise[l / k][(l % k, 0)] = 1.0;
        let mut s = ChainState::zeros(k, 1);
        stepper.step(plan, &p, &mut s, &noise, nu_star, None)?;
        r.set_column(l, &s.x.column(0));
    }
    Ok((g, r))
}

/// Stationary K×K covariance of one coordinate of the chain.
pub fn linear_stationary_covariance(plan: &StepPlan, nu_star: usize, lambda: f64) -> Result<Mat> {
    let (g, r) = linear_step_maps(plan, nu_star, lambda)?;
    let s = &r * plan.sigma_c() * r.transpose();
    // doubling: P_{2n} = P_n + G_n P_n G_nᵀ, G_{2n} = G_n²
    let mut p = s;
    let mut gn = g;
    for _ in 0..200 {
        let add = &gn * &p * gn.transpose();
        let next = &p + &add;
        gn = &gn * &gn;
        if !next.iter().all(|v| v.is_finite()) {
            break;
        }
        let done = add.norm() <= 1e-16 * next.norm();
        p = next;
        if done {
            return Ok(symmetrize(&p));
        }
    }
    Err(invalid(format!(
        "the linear recursion at λ={lambda} is not mean-square stable"
    )))
}

/// Bures–Wasserstein distance between the chain's stationary position law
/// and the target, per coordinate summed in quadrature.
pub fn stationary_bias_w2(
    plan: &StepPlan,
    nu_star: usize,
    potential: &GaussianPotential,
) -> Result<f64> {
    let mut sq = 0.0;
    for &lambda in potential.lambda() {
        let var = linear_stationary_covariance(plan, nu_star, lambda)?[(0, 0)];
        sq += (var.sqrt() - lambda.recip().sqrt()).powi(2);
    }
    Ok(sq.sqrt())
}
