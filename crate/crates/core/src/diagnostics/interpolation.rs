use serde::{Deserialize, Serialize};

use super::sweep::fit_log_slope;
use crate::canonical::NodeSet;
use crate::error::{invalid, Result};

const GRID: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationOrderResult {
    pub node_count: usize,
    pub anchor: f64,
    pub h_values: Vec<f64>,
    pub errors: Vec<f64>,
    /// `None` when the curve is reproduced exactly at every h.
    pub fitted_order: Option<f64>,
    pub exact: bool,
}

/// Sup-norm error of the M-node equispaced interpolant of `f` on
/// `[anchor, anchor + h]`, for each h, with the fitted log-log slope.
pub fn interpolation_order_check<F>(
    f: F,
    node_count: usize,
    h_values: &[f64],
    anchor: f64,
) -> Result<InterpolationOrderResult>
where
    F: Fn(f64) -> Vec<f64>,
{
    let nodes = NodeSet::equispaced(node_count)?;
    if h_values.is_empty() || h_values.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(invalid("step sizes must be positive"));
    }
    let mut errors = Vec::with_capacity(h_values.len());
    let mut scale = 0.0f64;
    for &h in h_values {
        let samples: Vec<Vec<f64>> = nodes.nodes().iter().map(|c| f(anchor + c * h)).collect();
        let mut worst = 0.0f64;
        for g in 0..=GRID {
            let sigma = g as f64 / GRID as f64;
            let exact = f(anchor + sigma * h);
            let mut interp = vec![0.0; exact.len()];
            for (j, s) in samples.iter().enumerate() {
                let w = nodes.basis(j, sigma);
                interp.iter_mut().zip(s).for_each(|(a, b)| *a += w * b);
            }
            let err: f64 = exact
                .iter()
                .zip(&interp)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(err);
            scale = scale.max(exact.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        errors.push(worst);
    }
    let exact = errors.iter().all(|e| *e <= 1e-12 * scale.max(1.0));
    let fitted_order = (!exact && h_values.len() >= 2).then(|| fit_log_slope(h_values, &errors));
    Ok(InterpolationOrderResult {
        node_count,
        anchor,
        h_values: h_values.to_vec(),
        errors,
        fitted_order,
        exact,
    })
}
