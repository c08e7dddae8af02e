//! K×K backbone operators and everything a step precomputes from them.
//!
//! Every state-space operator of the order-K dynamics is `C ⊗ I_d` for a
//! K×K matrix `C`, so the state is stored as a K×d matrix and operators
//! act on it by left multiplication. No Kd×Kd matrix is built here.

use crate::error::{invalid, Result};
use crate::linalg::{expm, phi_functions, psd_factor, van_loan_integral, Mat};

/// Largest node count accepted; the monomial Lagrange basis is not used beyond it.
pub const MAX_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalOperators {
    order: usize,
    gamma: f64,
    diffusion: Mat,
    skew: Mat,
    linear_drift: Mat,
}

impl CanonicalOperators {
    pub fn new(order: usize, gamma: f64) -> Result<Self> {
        if order < 2 {
            return Err(invalid(format!("order K must be at least 2, got {order}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!(
                "damping gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self::unchecked(order, gamma))
    }

    /// Builds the matrices without validating `gamma`; used for fault injection.
    pub(crate) fn unchecked(order: usize, gamma: f64) -> Self {
        let k = order;
        let mut diffusion = Mat::zeros(k, k);
        diffusion[(k - 1, k - 1)] = gamma;
        let mut skew = Mat::zeros(k, k);
        for i in 0..k - 1 {
            let c = if i == 0 { 1.0 } else { gamma };
            skew[(i, i + 1)] = -c;
            skew[(i + 1, i)] = c;
        }
        let mut j = Mat::identity(k, k);
        j[(0, 0)] = 0.0;
        let linear_drift = -(&diffusion + &skew) * j;
        Self {
            order,
            gamma,
            diffusion,
            skew,
            linear_drift,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `D_can = diag(0, …, 0, γ)`.
    pub fn diffusion(&self) -> &Mat {
        &self.diffusion
    }

    /// `Q_can`, skew-symmetric tridiagonal.
    pub fn skew(&self) -> &Mat {
        &self.skew
    }

    /// `A_can = −(D_can + Q_can) J_can`.
    pub fn linear_drift(&self) -> &Mat {
        &self.linear_drift
    }

    pub fn drift_backbone(&self) -> Mat {
        &self.diffusion + &self.skew
    }

    /// Full linear drift `−(D+Q) diag(λ, 1, …, 1)` of a quadratic potential
    /// with curvature λ along one coordinate.
    pub fn quadratic_drift(&self, lambda: f64) -> Mat {
        let mut scale = Mat::identity(self.order, self.order);
        scale[(0, 0)] = lambda;
        -self.drift_backbone() * scale
    }

    /// The (K−1)×(K−1) matrix `Q̃_can` governing the auxiliary blocks after
    /// factoring out γ: sub-diagonal 1, super-diagonal −1, last diagonal 1.
    pub fn reduced_backbone(order: usize) -> Mat {
        let n = order.saturating_sub(1);
        let mut q = Mat::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            q[(i, i + 1)] = -1.0;
            q[(i + 1, i)] = 1.0;
        }
        if n > 0 {
            q[(n - 1, n - 1)] = 1.0;
        }
        q
    }
}

/// Equispaced collocation nodes `c_j = (j−1)/(M−1)` on [0, 1] with their
/// Lagrange basis in monomial form.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    nodes: Vec<f64>,
    // basis[j][p] is the coefficient of σ^p in ℓ_j
    basis: Vec<Vec<f64>>,
}

impl NodeSet {
    pub fn equispaced(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(invalid(format!(
                "need at least 2 collocation nodes, got {count}"
            )));
        }
        if count > MAX_NODES {
            return Err(invalid(format!(
                "at most {MAX_NODES} collocation nodes are supported, got {count}"
            )));
        }
        let nodes: Vec<f64> = (0..count).map(|j| j as f64 / (count - 1) as f64).collect();
        let basis = (0..count)
            .map(|j| {
                let mut poly = vec![1.0];
                for (k, &ck) in nodes.iter().enumerate() {
                    if k == j {
                        continue;
                    }
                    let denom = nodes[j] - ck;
                    let mut next = vec![0.0; poly.len() + 1];
                    for (p, &coef) in poly.iter().enumerate() {
                        next[p + 1] += coef / denom;
                        next[p] -= coef * ck / denom;
                    }
                    poly = next;
                }
                poly
            })
            .collect();
        Ok(Self { nodes, basis })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Monomial coefficients of `ℓ_j`, lowest degree first.
    pub fn basis_coefficients(&self, j: usize) -> &[f64] {
        &self.basis[j]
    }

    /// `ℓ_j(σ)` in product form.
    pub fn basis(&self, j: usize, sigma: f64) -> f64 {
        let cj = self.nodes[j];
        self.nodes
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, ck)| (sigma - ck) / (cj - ck))
            .product()
    }

    /// `Σ_j |ℓ_j(σ)|`.
    pub fn lebesgue_function(&self, sigma: f64) -> f64 {
        (0..self.len()).map(|j| self.basis(j, sigma).abs()).sum()
    }
}

/// `Γ_φ = sup_{σ∈[0,1]} Σ_j |ℓ_j(σ)|`, from a 4096-point grid refined by
/// golden-section search around each grid-local maximum.
pub fn lebesgue_constant(nodes: &NodeSet) -> f64 {
    const GRID: usize = 4096;
    let values: Vec<f64> = (0..=GRID)
        .map(|i| nodes.lebesgue_function(i as f64 / GRID as f64))
        .collect();
    let mut best = values.iter().cloned().fold(0.0, f64::max);
    let step = 1.0 / GRID as f64;
    for i in 1..GRID {
        if values[i] >= values[i - 1] && values[i] >= values[i + 1] {
            let (lo, hi) = ((i as f64 - 1.0) * step, (i as f64 + 1.0) * step);
            best = best.max(golden_max(|s| nodes.lebesgue_function(s), lo, hi));
        }
    }
    best
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2)
}

/// `α_j(c_k, h) = ∫₀^{c_k} e^{(c_k−σ)hA} ℓ_j(σ) dσ`, indexed `[k][j]`.
///
/// Uses `∫₀^τ e^{(τ−σ)hA} σ^p dσ = τ^{p+1} p! φ_{p+1}(τhA)`.
pub fn alpha_weights(ops: &CanonicalOperators, nodes: &NodeSet, h: f64) -> Result<Vec<Vec<Mat>>> {
    alpha_weights_for(ops.linear_drift(), nodes, h)
}

pub(crate) fn alpha_weights_for(a: &Mat, nodes: &NodeSet, h: f64) -> Result<Vec<Vec<Mat>>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {h}")));
    }
    let k = a.nrows();
    let m = nodes.len();
    let mut out = Vec::with_capacity(m);
    for &tau in nodes.nodes() {
        if tau == 0.0 {
            out.push(vec![Mat::zeros(k, k); m]);
            continue;
        }
        let phis = phi_functions(&(a * (tau * h)), m)?;
        // moments[p] = ∫₀^τ e^{(τ−σ)hA} σ^p dσ
        let mut factorial = 1.0;
        let moments: Vec<Mat> = (0..m)
            .map(|p| {
                if p > 0 {
                    factorial *= p as f64;
                }
                &phis[p + 1] * (tau.powi(p as i32 + 1) * factorial)
            })
            .collect();
        let row = (0..m)
            .map(|j| {
                nodes
                    .basis_coefficients(j)
                    .iter()
                    .zip(&moments)
                    .fold(Mat::zeros(k, k), |acc, (c, mom)| acc + mom * *c)
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

/// `Σ(τ) = 2∫₀^{τh} e^{uA} D e^{uAᵀ} du`.
pub fn node_covariance(a: &Mat, diffusion: &Mat, elapsed: f64) -> Result<Mat> {
    van_loan_integral(a, &(diffusion * 2.0), elapsed)
}

/// Joint covariance of `(W(c_1), …, W(c_M))`, an (MK)×(MK) matrix whose
/// (i, j) block is `e^{(c_i−c_m)hA} Σ(c_m) e^{(c_j−c_m)hA}ᵀ` with
/// `c_m = min(c_i, c_j)`.
pub fn noise_covariance(ops: &CanonicalOperators, nodes: &NodeSet, h: f64) -> Result<Mat> {
    joint_noise_covariance(ops.linear_drift(), ops.diffusion(), nodes, h)
}

pub fn joint_noise_covariance(a: &Mat, diffusion: &Mat, nodes: &NodeSet, h: f64) -> Result<Mat> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {h}")));
    }
    let k = a.nrows();
    let m = nodes.len();
    let c = nodes.nodes();
    let marginals: Vec<Mat> = c
        .iter()
        .map(|&ci| node_covariance(a, diffusion, ci * h))
        .collect::<Result<_>>()?;
    let mut sigma = Mat::zeros(m * k, m * k);
    for i in 0..m {
        for j in 0..=i {
            // nodes are increasing, so min(c_i, c_j) = c_j here
            let lead = expm(&(a * ((c[i] - c[j]) * h)))?;
            let block = lead * &marginals[j];
            sigma.view_mut((i * k, j * k), (k, k)).copy_from(&block);
            sigma
                .view_mut((j * k, i * k), (k, k))
                .copy_from(&block.transpose());
        }
    }
    Ok(sigma)
}

/// Everything one outer step needs, computed once per (K, γ, M, h).
#[derive(Debug, Clone)]
pub struct StepPlan {
    ops: CanonicalOperators,
    nodes: NodeSet,
    h: f64,
    exp_at_nodes: Vec<Mat>,
    alpha: Vec<Vec<Mat>>,
    sigma_c: Mat,
    noise_factor: Mat,
    lebesgue: f64,
    // h · α_j(c_k, h) e₂: the only column of α that meets a nonzero drift row.
    drift_columns: Vec<Vec<Vec<f64>>>,
}

impl StepPlan {
    pub fn new(ops: CanonicalOperators, node_count: usize, h: f64) -> Result<Self> {
        let nodes = NodeSet::equispaced(node_count)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("step size must be positive, got {h}")));
        }
        let a = ops.linear_drift();
        let exp_at_nodes = nodes
            .nodes()
            .iter()
            .map(|&c| expm(&(a * (c * h))))
            .collect::<Result<Vec<_>>>()?;
        let alpha = alpha_weights(&ops, &nodes, h)?;
        let sigma_c = noise_covariance(&ops, &nodes, h)?;
        let noise_factor = psd_factor(&sigma_c)?;
        let lebesgue = lebesgue_constant(&nodes);
        let drift_columns = alpha
            .iter()
            .map(|row| {
                row.iter()
                    .map(|al| al.column(1).iter().map(|v| v * h).collect())
                    .collect()
            })
            .collect();
        Ok(Self {
            ops,
            nodes,
            h,
            exp_at_nodes,
            alpha,
            sigma_c,
            noise_factor,
            lebesgue,
            drift_columns,
        })
    }

    pub fn ops(&self) -> &CanonicalOperators {
        &self.ops
    }
    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }
    pub fn order(&self) -> usize {
        self.ops.order()
    }
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
    pub fn step_size(&self) -> f64 {
        self.h
    }
    pub fn exp_at_nodes(&self) -> &[Mat] {
        &self.exp_at_nodes
    }
    /// `alpha()[k][j] = α_j(c_k, h)`.
    pub fn alpha(&self) -> &[Vec<Mat>] {
        &self.alpha
    }
    pub fn sigma_c(&self) -> &Mat {
        &self.sigma_c
    }
    pub fn noise_factor(&self) -> &Mat {
        &self.noise_factor
    }
    pub fn lebesgue(&self) -> f64 {
        self.lebesgue
    }
    pub(crate) fn drift_column(&self, k: usize, j: usize) -> &[f64] {
        &self.drift_columns[k][j]
    }

    /// Picard contraction factor `2 L h Γ_φ`.
    pub fn contraction_factor(&self, l: f64) -> f64 {
        2.0 * l * self.h * self.lebesgue
    }
}

pub fn build_plan(ops: &CanonicalOperators, node_count: usize, h: f64) -> Result<StepPlan> {
    StepPlan::new(ops.clone(), node_count, h)
}
