//! Higher-order Langevin Monte Carlo.
//!
//! Samples a strongly log-concave density `exp(-U)` by simulating an order-K
//! Langevin system whose position marginal is the target. Each step solves
//! the linear part exactly with matrix exponentials, replaces the gradient
//! path inside the step by a Lagrange interpolant over equispaced
//! collocation nodes, and resolves the resulting fixed-point equations with a
//! fixed number of Picard sweeps.
//!
//! ```
//! use hola_core::potential::GaussianPotential;
//! use hola_core::sampler::{run_chain, SamplerConfig};
//!
//! let target = GaussianPotential::new(vec![1.0, 4.0]).unwrap();
//! let mut config = SamplerConfig::new(3, 2.0, 0.05, 2_000, 7);
//! config.burn_in = 200;
//! let (samples, report) = run_chain(&config, &target).unwrap();
//! assert_eq!(samples.len(), 1_800);
//! assert_eq!(report.grad_evals, 2_000 * 2 * 2);
//! ```

pub mod baselines;
pub mod canonical;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod potential;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
