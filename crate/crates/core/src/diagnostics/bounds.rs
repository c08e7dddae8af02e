use serde::{Deserialize, Serialize};

use super::moments::batch_mean_se;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::sampler::SampleSet;

pub const MIN_SAMPLES: usize = 10_000;
const BATCHES: usize = 50;
const SLACK: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub name: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub bound: f64,
    /// `1.1 · bound + 3 · standard_error`.
    pub threshold: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheckReport {
    pub n_samples: usize,
    pub bounds: Vec<MomentBound>,
    pub pass: bool,
}

fn bound(name: &str, series: &[f64], bound: f64) -> MomentBound {
    let (estimate, se) = batch_mean_se(series, BATCHES);
    let threshold = SLACK * bound + 3.0 * se;
    MomentBound {
        name: name.to_string(),
        estimate,
        standard_error: se,
        bound,
        threshold,
        margin: threshold - estimate,
        pass: estimate <= threshold,
    }
}

/// Checks `E‖X₁ − x⋆‖² ≤ d/m` and `E‖∇U(X₁)‖² ≤ L² d/m` on position samples.
/// Standard errors come from batch means over the samples in the order given.
pub fn stationary_moment_check<P: Potential + ?Sized>(
    samples: &SampleSet,
    potential: &P,
) -> Result<MomentCheckReport> {
    if samples.is_full_state() || samples.width() != potential.dim() {
        return Err(Error::Shape(
            "expected position samples matching the potential dimension".into(),
        ));
    }
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let d = potential.dim() as f64;
    let s = potential.smoothness();
    let center = potential.minimizer();
    let mut g = vec![0.0; potential.dim()];
    let mut dist = Vec::with_capacity(samples.len());
    let mut grad = Vec::with_capacity(samples.len());
    for row in samples.rows() {
        dist.push(
            row.iter()
                .zip(&center)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>(),
        );
        potential.grad(row, &mut g);
        grad.push(g.iter().map(|v| v * v).sum::<f64>());
    }
    let bounds = vec![
        bound("position_second_moment", &dist, d / s.m),
        bound("gradient_second_moment", &grad, s.l * s.l * d / s.m),
    ];
    let pass = bounds.iter().all(|b| b.pass);
    Ok(MomentCheckReport {
        n_samples: samples.len(),
        bounds,
        pass,
    })
}
