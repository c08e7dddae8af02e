//! Gradient oracles for the potential `U` of a target density `exp(-U)`.
//!
//! The sampler only ever sees [`Potential::grad`]. Values are available on the
//! built-ins for finite-difference checks and diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Convexity and smoothness constants declared by a potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothness {
    /// Strong-convexity constant `m > 0`.
    pub m: f64,
    /// Gradient Lipschitz constant `L >= m`.
    pub l: f64,
}

impl Smoothness {
    pub fn new(m: f64, l: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid(format!(
                "strong convexity m must be positive, got {m}"
            )));
        }
        if !(l >= m && l.is_finite()) {
            return Err(invalid(format!(
                "smoothness L must satisfy L >= m, got L={l}, m={m}"
            )));
        }
        Ok(Self { m, l })
    }
}

/// A first-order oracle for a strongly convex, smooth potential.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `∇U(x)` into `out`. Must be deterministic.
    fn grad(&self, x: &[f64], out: &mut [f64]);

    /// `U(x)` when available. Never used by the sampler itself.
    fn value(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn smoothness(&self) -> Smoothness;

    /// Bounds `(L_1, ..., L_count)` on the higher derivative tensors of `∇U`.
    fn higher_smoothness(&self, _count: usize) -> Option<Vec<f64>> {
        None
    }

    fn minimizer(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        (**self).grad(x, out)
    }
    fn value(&self, x: &[f64]) -> Option<f64> {
        (**self).value(x)
    }
    fn smoothness(&self) -> Smoothness {
        (**self).smoothness()
    }
    fn higher_smoothness(&self, count: usize) -> Option<Vec<f64>> {
        (**self).higher_smoothness(count)
    }
    fn minimizer(&self) -> Vec<f64> {
        (**self).minimizer()
    }
}

/// `U(x) = ½ Σ λᵢ xᵢ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPotential {
    lambda: Vec<f64>,
    smoothness: Smoothness,
}

impl GaussianPotential {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(invalid("gaussian potential needs at least one coordinate"));
        }
        if let Some(bad) = lambda.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(invalid(format!(
                "gaussian curvatures must be positive, got {bad}"
            )));
        }
        let m = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
        let l = lambda.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            smoothness: Smoothness::new(m, l)?,
            lambda,
        })
    }

    pub fn isotropic(dim: usize, lambda: f64) -> Result<Self> {
        Self::new(vec![lambda; dim])
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Covariance diagonal `1/λᵢ` of the stationary position marginal.
    pub fn stationary_variances(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| 1.0 / l).collect()
    }
}

impl Potential for GaussianPotential {
    fn dim(&self) -> usize {
        self.lambda.len()
    }

    fn grad(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), li) in out.iter_mut().zip(x).zip(&self.lambda) {
            *o = li * xi;
        }
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(
            0.5 * x
                .iter()
                .zip(&self.lambda)
                .map(|(xi, li)| li * xi * xi)
                .sum::<f64>(),
        )
    }

    fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    fn higher_smoothness(&self, count: usize) -> Option<Vec<f64>> {
        Some(
            (0..count)
                .map(|i| if i == 0 { self.smoothness.l } else { 0.0 })
                .collect(),
        )
    }
}

/// `U(x) = Σ √(1+xᵢ²) + (m/2)‖x‖²`, a non-quadratic target with bounded
/// higher derivatives. `U(0) = d`; [`Potential::value`] reports the
/// centered value `U(x) − d`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicPotential {
    dim: usize,
    smoothness: Smoothness,
}

impl HyperbolicPotential {
    pub fn new(dim: usize, m: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("hyperbolic potential needs dim >= 1"));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid(format!(
                "hyperbolic potential needs m > 0, got {m}"
            )));
        }
        Ok(Self {
            dim,
            smoothness: Smoothness::new(m, 1.0 + m)?,
        })
    }

    /// Constant subtracted from `U` so that the reported value vanishes at 0.
    pub fn offset(&self) -> f64 {
        self.dim as f64
    }
}

impl Potential for HyperbolicPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let m = self.smoothness.m;
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi / (1.0 + xi * xi).sqrt() + m * xi;
        }
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        let m = self.smoothness.m;
        let raw: f64 = x
            .iter()
            .map(|xi| (1.0 + xi * xi).sqrt() + 0.5 * m * xi * xi)
            .sum();
        Some(raw - self.offset())
    }

    fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    fn higher_smoothness(&self, count: usize) -> Option<Vec<f64>> {
        Some(
            (0..count)
                .map(|i| if i == 0 { self.smoothness.l } else { 3.0 })
                .collect(),
        )
    }
}

/// Translates a potential so its minimizer sits at `center`.
#[derive(Debug, Clone)]
pub struct Shifted<P> {
    inner: P,
    center: Vec<f64>,
}

pub fn shift<P: Potential>(inner: P, center: Vec<f64>) -> Result<Shifted<P>> {
    if center.len() != inner.dim() {
        return Err(Error::Shape(format!(
            "shift center has length {} but potential has dim {}",
            center.len(),
            inner.dim()
        )));
    }
    Ok(Shifted { inner, center })
}

impl<P: Potential> Shifted<P> {
    fn local(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, c)| a - c).collect()
    }
}

impl<P: Potential> Potential for Shifted<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        self.inner.grad(&self.local(x), out)
    }
    fn value(&self, x: &[f64]) -> Option<f64> {
        self.inner.value(&self.local(x))
    }
    fn smoothness(&self) -> Smoothness {
        self.inner.smoothness()
    }
    fn higher_smoothness(&self, count: usize) -> Option<Vec<f64>> {
        self.inner.higher_smoothness(count)
    }
    fn minimizer(&self) -> Vec<f64> {
        let base = self.inner.minimizer();
        base.iter().zip(&self.center).map(|(b, c)| b + c).collect()
    }
}

type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A potential assembled from closures. Declared constants are trusted.
pub struct FnPotential {
    dim: usize,
    grad: Box<GradFn>,
    value: Option<Box<ValueFn>>,
    smoothness: Smoothness,
}

impl FnPotential {
    pub fn new(
        dim: usize,
        smoothness: Smoothness,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            grad: Box::new(grad),
            value: None,
            smoothness,
        }
    }

    pub fn with_value(mut self, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.value = Some(Box::new(value));
        self
    }

    /// `∇U ≡ 0`: pure linear dynamics. Constants are placeholders.
    pub fn free(dim: usize) -> Self {
        Self::new(dim, Smoothness { m: 1.0, l: 1.0 }, |_, out| out.fill(0.0)).with_value(|_| 0.0)
    }
}

impl std::fmt::Debug for FnPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnPotential")
            .field("dim", &self.dim)
            .field("smoothness", &self.smoothness)
            .finish_non_exhaustive()
    }
}

impl Potential for FnPotential {
    fn dim(&self) -> usize {
        self.dim
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }
    fn value(&self, x: &[f64]) -> Option<f64> {
        self.value.as_ref().map(|v| v(x))
    }
    fn smoothness(&self) -> Smoothness {
        self.smoothness
    }
}

/// Built-in potentials selectable by name from configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinPotential {
    Gaussian(GaussianPotential),
    Hyperbolic(HyperbolicPotential),
}

impl BuiltinPotential {
    pub fn gaussian(lambda: Vec<f64>) -> Result<Self> {
        GaussianPotential::new(lambda).map(Self::Gaussian)
    }

    pub fn hyperbolic(dim: usize, m: f64) -> Result<Self> {
        HyperbolicPotential::new(dim, m).map(Self::Hyperbolic)
    }

    pub fn as_gaussian(&self) -> Option<&GaussianPotential> {
        match self {
            Self::Gaussian(g) => Some(g),
            Self::Hyperbolic(_) => None,
        }
    }

    fn inner(&self) -> &dyn Potential {
        match self {
            Self::Gaussian(g) => g,
            Self::Hyperbolic(h) => h,
        }
    }
}

impl Potential for BuiltinPotential {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        self.inner().grad(x, out)
    }
    fn value(&self, x: &[f64]) -> Option<f64> {
        self.inner().value(x)
    }
    fn smoothness(&self) -> Smoothness {
        self.inner().smoothness()
    }
    fn higher_smoothness(&self, count: usize) -> Option<Vec<f64>> {
        self.inner().higher_smoothness(count)
    }
}

/// Per-chain gradient-call tally around a shared potential.
#[derive(Debug)]
pub struct CountingOracle<'a, P: ?Sized> {
    potential: &'a P,
    evals: u64,
}

impl<'a, P: Potential + ?Sized> CountingOracle<'a, P> {
    pub fn new(potential: &'a P) -> Self {
        Self {
            potential,
            evals: 0,
        }
    }

    #[inline]
    pub fn grad(&mut self, x: &[f64], out: &mut [f64]) {
        self.evals += 1;
        self.potential.grad(x, out);
    }

    pub fn evals(&self) -> u64 {
        self.evals
    }

    pub fn potential(&self) -> &'a P {
        self.potential
    }
}

/// Max over points and coordinates of `|∇U − centered finite difference of U|`.
pub fn check_gradient<P: Potential + ?Sized>(
    p: &P,
    points: &[Vec<f64>],
    fd_step: f64,
) -> Result<f64> {
    if !(fd_step > 0.0) {
        return Err(invalid(format!(
            "finite-difference step must be positive, got {fd_step}"
        )));
    }
    let d = p.dim();
    let probe = vec![0.0; d];
    if p.value(&probe).is_none() {
        return Err(Error::Unsupported(
            "gradient check needs potential values".into(),
        ));
    }
    let mut worst = 0.0f64;
    let mut grad = vec![0.0; d];
    for x in points {
        if x.len() != d {
            return Err(Error::Shape(format!(
                "point of length {} for dim {d}",
                x.len()
            )));
        }
        p.grad(x, &mut grad);
        let mut xp = x.clone();
        for i in 0..d {
            xp[i] = x[i] + fd_step;
            let up = p.value(&xp).unwrap_or(f64::NAN);
            xp[i] = x[i] - fd_step;
            let down = p.value(&xp).unwrap_or(f64::NAN);
            xp[i] = x[i];
            let fd = (up - down) / (2.0 * fd_step);
            worst = worst.max((grad[i] - fd).abs());
        }
    }
    Ok(worst)
}
