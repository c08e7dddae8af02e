use serde::{Deserialize, Serialize};

use crate::canonical::{lebesgue_constant, CanonicalOperators, NodeSet};
use crate::error::Result;
use crate::linalg::spectral_norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCheckConfig {
    pub orders: Vec<usize>,
    pub gammas: Vec<f64>,
    pub node_counts: Vec<usize>,
    /// Fault injection: negate every γ before checking.
    pub fake_negative_gamma: bool,
}

impl Default for TheoryCheckConfig {
    fn default() -> Self {
        Self {
            orders: (3..=8).collect(),
            gammas: vec![0.5, 1.0, 2.0, 5.0],
            node_counts: (2..=6).collect(),
            fake_negative_gamma: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryEntry {
    pub check: String,
    pub order: Option<usize>,
    pub gamma: Option<f64>,
    pub nodes: Option<usize>,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Distance to the nearest violated bound; negative means violated.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub entries: Vec<TheoryEntry>,
    pub all_pass: bool,
}

/// Smallest real part over the eigenvalues of `γ Q̃_can` must exceed this.
pub const SPECTRUM_FLOOR: f64 = 1e-9;
const ROUNDING: f64 = 1e-12;

/// `2^{M−1}(M−1)^{M−1}/(M−1)!`.
pub fn lebesgue_bound(node_count: usize) -> f64 {
    let n = node_count as f64 - 1.0;
    let fact: f64 = (1..node_count).map(|i| i as f64).product();
    2f64.powf(n) * n.powf(n) / fact
}

fn entry(
    check: &str,
    order: Option<usize>,
    gamma: Option<f64>,
    nodes: Option<usize>,
    value: f64,
    lower: Option<f64>,
    upper: Option<f64>,
) -> TheoryEntry {
    let margin = lower
        .map_or(f64::INFINITY, |lo| value - lo)
        .min(upper.map_or(f64::INFINITY, |hi| hi - value));
    TheoryEntry {
        check: check.to_string(),
        order,
        gamma,
        nodes,
        value,
        lower,
        upper,
        margin,
        pass: margin >= -ROUNDING && value.is_finite(),
    }
}

/// Operator-norm bounds of `D + Q`, positivity of the reduced backbone
/// spectrum and the Lebesgue-constant bound, over the configured grid.
pub fn theory_checks(config: &TheoryCheckConfig) -> Result<TheoryReport> {
    let mut entries = Vec::new();
    for &k in &config.orders {
        for &g0 in &config.gammas {
            let gamma = if config.fake_negative_gamma { -g0 } else { g0 };
            let ops = CanonicalOperators::unchecked(k, gamma);
            let norm = spectral_norm(&ops.drift_backbone());
            entries.push(entry(
                "drift_norm",
                Some(k),
                Some(gamma),
                None,
                norm,
                Some((1.0 + gamma * gamma).sqrt()),
                Some((1.0 + 2.0 * gamma).max(3.0 * gamma)),
            ));
            let reduced = CanonicalOperators::reduced_backbone(k) * gamma;
            let min_re = reduced
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::INFINITY, f64::min);
            entries.push(entry(
                "reduced_spectrum",
                Some(k),
                Some(gamma),
                None,
                min_re,
                Some(SPECTRUM_FLOOR),
                None,
            ));
        }
    }
    for &m in &config.node_counts {
        let gamma_phi = lebesgue_constant(&NodeSet::equispaced(m)?);
        entries.push(entry(
            "lebesgue",
            None,
            None,
            Some(m),
            gamma_phi,
            Some(1.0),
            Some(lebesgue_bound(m)),
        ));
    }
    let all_pass = entries.iter().all(|e| e.pass);
    Ok(TheoryReport { entries, all_pass })
}
