//! Python bindings: potentials, the higher-order sampler, Gaussian W2,
//! theory checks and order sweeps.

use hola_core::diagnostics::{self, SweepConfig, SweepSampler, TheoryCheckConfig};
use hola_core::linalg::Mat;
use hola_core::potential::{BuiltinPotential, Potential as _};
use hola_core::sampler::{run_ensemble, SamplerConfig};
use hola_core::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(hola, DivergenceError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Divergence { .. } => DivergenceError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Mat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(
            "covariance must be a square list of lists",
        ));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

/// A built-in target density `exp(-U)`.
#[pyclass(module = "hola", frozen)]
struct Potential {
    inner: BuiltinPotential,
}

#[pymethods]
impl Potential {
    /// `U(x) = ½ Σ λ_i x_i²`.
    #[staticmethod]
    fn gaussian(lambdas: Vec<f64>) -> PyResult<Self> {
        BuiltinPotential::gaussian(lambdas)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// `U(x) = m Σ √(1 + x_i²)`.
    #[staticmethod]
    #[pyo3(signature = (dim, m = 1.0))]
    fn hyperbolic(dim: usize, m: f64) -> PyResult<Self> {
        BuiltinPotential::hyperbolic(dim, m)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: Vec<f64>) -> PyResult<Option<f64>> {
        self.check(&x)?;
        Ok(self.inner.value(&x))
    }

    fn grad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&x)?;
        let mut out = vec![0.0; x.len()];
        self.inner.grad(&x, &mut out);
        Ok(out)
    }
}

impl Potential {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected {} coordinates, got {}",
                self.inner.dim(),
                x.len()
            )));
        }
        Ok(())
    }
}

/// Samples and accounting from `Sampler.run`.
#[pyclass(module = "hola", frozen, get_all)]
struct RunResult {
    /// One list of retained X₁ rows per chain.
    samples: Vec<Vec<Vec<f64>>>,
    steps: Vec<Vec<u64>>,
    grad_evals: u64,
    warnings: Vec<String>,
}

/// Higher-order Langevin sampler with Picard–Lagrange steps.
#[pyclass(module = "hola", frozen)]
struct Sampler {
    order: usize,
    gamma: f64,
    step: f64,
    nodes: Option<usize>,
    nu_star: Option<usize>,
    strict: bool,
}

#[pymethods]
impl Sampler {
    #[new]
    #[pyo3(signature = (order = 3, gamma = 2.0, step = 0.05, nodes = None, nu_star = None, strict = false))]
    fn new(
        order: usize,
        gamma: f64,
        step: f64,
        nodes: Option<usize>,
        nu_star: Option<usize>,
        strict: bool,
    ) -> Self {
        Self {
            order,
            gamma,
            step,
            nodes,
            nu_star,
            strict,
        }
    }

    #[pyo3(signature = (potential, n_steps, seed, burn_in = 0, thin = 1, chains = 1, x0 = None, threads = None))]
    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        py: Python<'_>,
        potential: &Potential,
        n_steps: u64,
        seed: u64,
        burn_in: u64,
        thin: u64,
        chains: usize,
        x0: Option<Vec<f64>>,
        threads: Option<usize>,
    ) -> PyResult<RunResult> {
        let mut cfg = SamplerConfig::new(self.order, self.gamma, self.step, n_steps, seed);
        cfg.nodes = self.nodes;
        cfg.nu_star = self.nu_star;
        cfg.strict = self.strict;
        cfg.burn_in = burn_in;
        cfg.thin = thin;
        cfg.chains = chains;
        cfg.x0 = x0;
        let target = &potential.inner;
        let ens = py
            .detach(|| run_ensemble(&cfg, target, threads))
            .map_err(to_py)?;
        if let Some(e) = ens.first_error() {
            return Err(to_py(e.clone()));
        }
        Ok(RunResult {
            samples: ens
                .runs
                .iter()
                .map(|r| r.samples.rows().map(<[f64]>::to_vec).collect())
                .collect(),
            steps: ens
                .runs
                .iter()
                .map(|r| r.samples.steps().to_vec())
                .collect(),
            grad_evals: ens.grad_evals(),
            warnings: ens
                .runs
                .first()
                .map(|r| r.report.warnings.clone())
                .unwrap_or_default(),
        })
    }
}

/// W2 distance between two Gaussians given as mean vectors and covariance rows.
#[pyfunction]
fn gaussian_w2(m1: Vec<f64>, c1: Vec<Vec<f64>>, m2: Vec<f64>, c2: Vec<Vec<f64>>) -> PyResult<f64> {
    diagnostics::gaussian_w2(&m1, &matrix(&c1)?, &m2, &matrix(&c2)?).map_err(to_py)
}

/// Drift-norm, reduced-spectrum and Lebesgue-constant checks as a dict.
#[pyfunction]
#[pyo3(signature = (orders = None, gammas = None, node_counts = None))]
fn theory_checks<'py>(
    py: Python<'py>,
    orders: Option<Vec<usize>>,
    gammas: Option<Vec<f64>>,
    node_counts: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = TheoryCheckConfig::default();
    if let Some(v) = orders {
        cfg.orders = v;
    }
    if let Some(v) = gammas {
        cfg.gammas = v;
    }
    if let Some(v) = node_counts {
        cfg.node_counts = v;
    }
    json_to_py(py, &diagnostics::theory_checks(&cfg).map_err(to_py)?)
}

/// Bias-versus-step-size sweep on an isotropic or diagonal Gaussian target.
///
/// `sampler` is one of "hola", "ula", "underdamped" or "exact-gaussian".
#[pyfunction]
#[pyo3(signature = (sampler, lambdas, h_values, total_time, chains, seed, order = 3, gamma = 2.0, nodes = None, nu_star = None))]
#[allow(clippy::too_many_arguments)]
fn order_sweep<'py>(
    py: Python<'py>,
    sampler: &str,
    lambdas: Vec<f64>,
    h_values: Vec<f64>,
    total_time: f64,
    chains: usize,
    seed: u64,
    order: usize,
    gamma: f64,
    nodes: Option<usize>,
    nu_star: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let sampler = match sampler {
        "hola" => SweepSampler::Hola {
            order,
            gamma,
            nodes,
            nu_star,
        },
        "underdamped" => SweepSampler::Underdamped {
            gamma,
            nu_star: nu_star.unwrap_or(1),
        },
        "ula" => SweepSampler::Ula,
        "exact-gaussian" => SweepSampler::ExactGaussian { order, gamma },
        other => return Err(PyValueError::new_err(format!("unknown sampler {other:?}"))),
    };
    let p = BuiltinPotential::gaussian(lambdas).map_err(to_py)?;
    let p = p.as_gaussian().expect("gaussian constructor");
    let cfg = SweepConfig::new(sampler, h_values, total_time, chains, seed);
    let result = py
        .detach(|| diagnostics::order_sweep(p, &cfg))
        .map_err(to_py)?;
    json_to_py(py, &result)
}

#[pymodule]
fn hola(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Potential>()?;
    m.add_class::<Sampler>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(gaussian_w2, m)?)?;
    m.add_function(wrap_pyfunction!(theory_checks, m)?)?;
    m.add_function(wrap_pyfunction!(order_sweep, m)?)?;
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    Ok(())
}
