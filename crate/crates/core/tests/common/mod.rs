//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's numerical kernels.

#![allow(dead_code)]

use hola_core::linalg::Mat;
use hola_core::potential::Potential;

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `∫_a^b f(s) ds` for matrix-valued f with an n-point rule.
pub fn integrate(f: impl Fn(f64) -> Mat, a: f64, b: f64, n: usize) -> Mat {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc: Option<Mat> = None;
    for (xi, wi) in x.iter().zip(&w) {
        let v = f(mid + half * xi) * (wi * half);
        acc = Some(match acc {
            Some(a) => a + v,
            None => v,
        });
    }
    acc.expect("at least one node")
}

/// Matrix exponential by Taylor series with scaling and squaring.
pub fn taylor_expm(a: &Mat) -> Mat {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let b = a / 2f64.powi(s);
    let mut term = Mat::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub fn equispaced(m: usize) -> Vec<f64> {
    (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
}

/// Lagrange basis ℓ_j(σ) in product form.
pub fn lagrange(nodes: &[f64], j: usize, sigma: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != j)
        .map(|(_, c)| (sigma - c) / (nodes[j] - c))
        .product()
}

/// `D = diag(0,…,0,γ)`.
pub fn diffusion(k: usize, gamma: f64) -> Mat {
    let mut d = Mat::zeros(k, k);
    d[(k - 1, k - 1)] = gamma;
    d
}

/// Skew tridiagonal Q with super-diagonal (−1, −γ, −γ, …).
pub fn skew(k: usize, gamma: f64) -> Mat {
    let mut q = Mat::zeros(k, k);
    for i in 0..k - 1 {
        let v = if i == 0 { 1.0 } else { gamma };
        q[(i, i + 1)] = -v;
        q[(i + 1, i)] = v;
    }
    q
}

/// `A = −(D + Q) J` with `J = diag(0, 1, …, 1)`.
pub fn drift(k: usize, gamma: f64) -> Mat {
    let mut j = Mat::identity(k, k);
    j[(0, 0)] = 0.0;
    -(diffusion(k, gamma) + skew(k, gamma)) * j
}

pub fn kron_identity(a: &Mat, d: usize) -> Mat {
    a.kronecker(&Mat::identity(d, d))
}

/// `α_j(τ, h) = ∫₀^τ e^{(τ−σ)hA} ℓ_j(σ) dσ` by quadrature.
pub fn alpha_quadrature(a: &Mat, nodes: &[f64], j: usize, tau: f64, h: f64) -> Mat {
    if tau == 0.0 {
        return Mat::zeros(a.nrows(), a.ncols());
    }
    integrate(
        |s| taylor_expm(&(a * ((tau - s) * h))) * lagrange(nodes, j, s),
        0.0,
        tau,
        40,
    )
}

/// `Cov(W(c_i), W(c_j)) = ∫₀^{min(c_i,c_j) h} e^{(c_i h−u)A} 2D e^{(c_j h−u)Aᵀ} du`.
pub fn noise_block_quadrature(a: &Mat, d: &Mat, ci: f64, cj: f64, h: f64) -> Mat {
    let upper = ci.min(cj) * h;
    if upper == 0.0 {
        return Mat::zeros(a.nrows(), a.ncols());
    }
    integrate(
        |u| {
            taylor_expm(&(a * (ci * h - u)))
                * (d * 2.0)
                * taylor_expm(&(a * (cj * h - u))).transpose()
        },
        0.0,
        upper,
        40,
    )
}

/// One Picard–Lagrange step on the flattened Kd state with explicitly
/// formed `A ⊗ I_d` operators. `x` and the node noise are K×d matrices,
/// flattened row by row.
pub struct DenseReference {
    k: usize,
    d: usize,
    h: f64,
    nodes: Vec<f64>,
    exps: Vec<Mat>,
    alphas: Vec<Vec<Mat>>,
}

impl DenseReference {
    pub fn new(k: usize, d: usize, gamma: f64, m: usize, h: f64) -> Self {
        let a = kron_identity(&drift(k, gamma), d);
        let nodes = equispaced(m);
        let exps = nodes.iter().map(|c| taylor_expm(&(&a * (c * h)))).collect();
        let alphas = nodes
            .iter()
            .map(|&tau| {
                (0..m)
                    .map(|j| alpha_quadrature(&a, &nodes, j, tau, h))
                    .collect()
            })
            .collect();
        Self {
            k,
            d,
            h,
            nodes,
            exps,
            alphas,
        }
    }

    fn flatten(x: &Mat) -> Mat {
        let (r, c) = x.shape();
        Mat::from_fn(r * c, 1, |i, _| x[(i / c, i % c)])
    }

    pub fn step<P: Potential>(&self, p: &P, x: &Mat, noise: &[Mat], nu_star: usize) -> Mat {
        let m = self.nodes.len();
        let kd = self.k * self.d;
        let xv = Self::flatten(x);
        let base: Vec<Mat> = (0..m)
            .map(|n| &self.exps[n] * &xv + Self::flatten(&noise[n]))
            .collect();
        let mut iter: Vec<Mat> = vec![xv.clone(); m];
        let mut grad = vec![0.0; self.d];
        for _ in 0..nu_star {
            let drifts: Vec<Mat> = iter
                .iter()
                .map(|v| {
                    let pos: Vec<f64> = (0..self.d).map(|c| v[(c, 0)]).collect();
                    p.grad(&pos, &mut grad);
                    let mut g = Mat::zeros(kd, 1);
                    for c in 0..self.d {
                        g[(self.d + c, 0)] = -grad[c];
                    }
                    g
                })
                .collect();
            iter = (0..m)
                .map(|n| {
                    let mut v = base[n].clone();
                    for (j, g) in drifts.iter().enumerate() {
                        v += &self.alphas[n][j] * g * self.h;
                    }
                    v
                })
                .collect();
        }
        let out = &iter[m - 1];
        Mat::from_fn(self.k, self.d, |r, c| out[(r * self.d + c, 0)])
    }
}
