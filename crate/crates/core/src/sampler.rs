//! Higher-order Langevin Monte Carlo: node-noise sampling, the Picard
//! collocation step, and chain/ensemble drivers shared by every kernel.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::node_covariance;
use crate::canonical::{CanonicalOperators, StepPlan};
use crate::error::{invalid, Error, Result};
use crate::linalg::{expm, psd_factor, Mat};
use crate::potential::{CountingOracle, Potential};
use crate::rng::{fill_normals, CounterRng, Domain};

/// The K×d state: row 0 is the position block, rows 1.. the auxiliary blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: Mat,
    pub step: u64,
    pub grad_evals: u64,
}

impl ChainState {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self::from_matrix(Mat::zeros(rows, dim))
    }

    pub fn from_matrix(x: Mat) -> Self {
        Self {
            x,
            step: 0,
            grad_evals: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn position(&self) -> Vec<f64> {
        self.x.row(0).iter().cloned().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }
}

/// Draws `(W(c_1), …, W(c_M))` as M blocks of K×d, realizing `Σ_C ⊗ I_d`.
pub fn sample_node_noise<R: Rng + ?Sized>(plan: &StepPlan, dim: usize, rng: &mut R) -> Vec<Mat> {
    let k = plan.order();
    let m = plan.node_count();
    let mut z = Mat::zeros(m * k, dim);
    fill_normals(rng, z.as_mut_slice());
    let w = plan.noise_factor() * z;
    (0..m).map(|j| w.rows(j * k, k).into_owned()).collect()
}

/// Reusable buffers for [`PicardStepper`].
#[derive(Debug, Clone)]
pub struct PicardStepper {
    base: Vec<Mat>,
    iter: Vec<Mat>,
    next: Vec<Mat>,
    grads: Vec<Vec<f64>>,
    position: Vec<f64>,
}

impl PicardStepper {
    pub fn new(plan: &StepPlan, dim: usize) -> Self {
        let k = plan.order();
        let m = plan.node_count();
        Self {
            base: vec![Mat::zeros(k, dim); m],
            iter: vec![Mat::zeros(k, dim); m],
            next: vec![Mat::zeros(k, dim); m],
            grads: vec![vec![0.0; dim]; m],
            position: vec![0.0; dim],
        }
    }

    /// Advances `state` by one outer step of length h.
    ///
    /// Runs exactly `nu_star` sweeps of
    /// `X̂(c_k) ← e^{c_k hA} x + h Σ_j α_j(c_k,h) g(X̂(c_j)) + W(c_k)`
    /// from the constant initialization `X̂(c_k) = x`, evaluating `∇U` once
    /// per (sweep, node). When `trace` is given, the largest node-wise
    /// Frobenius change of each sweep is appended to it.
    pub fn step<P: Potential + ?Sized>(
        &mut self,
        plan: &StepPlan,
        potential: &P,
        state: &mut ChainState,
        noise: &[Mat],
        nu_star: usize,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<()> {
        let k = plan.order();
        let m = plan.node_count();
        let d = state.dim();
        if state.x.nrows() != k || noise.len() != m || noise.iter().any(|w| w.shape() != (k, d)) {
            return Err(Error::Shape(format!(
                "picard step expects a {k}x{d} state and {m} noise blocks of the same shape"
            )));
        }
        if self.base.len() != m || self.base[0].shape() != (k, d) {
            *self = Self::new(plan, d);
        }
        let mut oracle = CountingOracle::new(potential);
        for node in 0..m {
            self.base[node].copy_from(&noise[node]);
            self.base[node].gemm(1.0, &plan.exp_at_nodes()[node], &state.x, 1.0);
            self.iter[node].copy_from(&state.x);
        }
        for _ in 0..nu_star {
            for (node, grad) in self.grads.iter_mut().enumerate() {
                for (c, p) in self.position.iter_mut().enumerate() {
                    *p = self.iter[node][(0, c)];
                }
                oracle.grad(&self.position, grad);
            }
            let mut delta = 0.0f64;
            for node in 0..m {
                let next = &mut self.next[node];
                next.copy_from(&self.base[node]);
                for (j, grad) in self.grads.iter().enumerate() {
                    let column = plan.drift_column(node, j);
                    for (c, g) in grad.iter().enumerate() {
                        for (r, a) in column.iter().enumerate() {
                            next[(r, c)] -= a * g;
                        }
                    }
                }
                if trace.is_some() {
                    delta = delta.max((&*next - &self.iter[node]).norm());
                }
            }
            std::mem::swap(&mut self.iter, &mut self.next);
            if let Some(t) = trace.as_deref_mut() {
                t.push(delta);
            }
        }
        state.grad_evals += oracle.evals();
        state.step += 1;
        if let Some(bad) = self
            .iter
            .iter()
            .position(|x| x.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Divergence {
                step: state.step,
                node: Some(bad),
            });
        }
        state.x.copy_from(&self.iter[m - 1]);
        Ok(())
    }

    /// Node iterates left by the last call to [`step`](Self::step).
    pub fn node_iterates(&self) -> &[Mat] {
        &self.iter
    }
}

/// One outer step with freshly allocated buffers.
pub fn picard_step<P: Potential + ?Sized>(
    plan: &StepPlan,
    potential: &P,
    state: &mut ChainState,
    noise: &[Mat],
    nu_star: usize,
) -> Result<()> {
    PicardStepper::new(plan, state.dim()).step(plan, potential, state, noise, nu_star, None)
}

/// A Markov kernel driven by counter-addressed randomness.
pub trait Kernel: Send + Sync {
    type Workspace: Send;

    fn name(&self) -> &'static str;
    /// Number of d-dimensional blocks in the state.
    fn rows(&self) -> usize;
    fn step_size(&self) -> f64;
    fn grad_evals_per_step(&self) -> u64;
    fn workspace(&self, dim: usize) -> Self::Workspace;

    /// Advances `state` by one step using randomness addressed by `state.step`.
    fn step<P: Potential + ?Sized>(
        &self,
        potential: &P,
        state: &mut ChainState,
        rng: &mut CounterRng,
        ws: &mut Self::Workspace,
    ) -> Result<()>;
}

/// Node noise assembled from Ornstein–Uhlenbeck increments on a fixed fine
/// grid, so that runs at different step sizes share one Brownian path.
#[derive(Debug, Clone)]
pub struct RefinedNoise {
    per_step: u64,
    per_node: usize,
    transition: Mat,
    factor: Mat,
}

impl RefinedNoise {
    pub fn per_step(&self) -> u64 {
        self.per_step
    }

    fn fill(
        &self,
        rng: &mut CounterRng,
        step: u64,
        out: &mut [Mat],
        z: &mut Mat,
        acc: &mut Mat,
        tmp: &mut Mat,
    ) {
        acc.fill(0.0);
        out[0].fill(0.0);
        let mut fine = 0usize;
        for node_out in out.iter_mut().skip(1) {
            for _ in 0..self.per_node {
                rng.normals_at(step * self.per_step + fine as u64, z.as_mut_slice());
                tmp.gemm(1.0, &self.transition, acc, 0.0);
                tmp.gemm(1.0, &self.factor, z, 1.0);
                std::mem::swap(acc, tmp);
                fine += 1;
            }
            node_out.copy_from(acc);
        }
    }
}

#[derive(Debug, Clone)]
enum HolaNoise {
    Direct,
    Refined(RefinedNoise),
}

/// The Picard–Lagrange kernel of order K.
#[derive(Debug, Clone)]
pub struct HolaKernel {
    plan: StepPlan,
    nu_star: usize,
    noise: HolaNoise,
}

#[derive(Debug)]
pub struct HolaWorkspace {
    stepper: PicardStepper,
    noise: Vec<Mat>,
    z: Mat,
    wide: Mat,
    acc: Mat,
    tmp: Mat,
}

impl HolaKernel {
    pub fn new(plan: StepPlan, nu_star: usize) -> Result<Self> {
        if nu_star == 0 {
            return Err(invalid("at least one Picard iteration is required"));
        }
        Ok(Self {
            plan,
            nu_star,
            noise: HolaNoise::Direct,
        })
    }

    /// Switches to node noise built from `fine_per_node` OU increments per
    /// node gap, addressed on the absolute fine grid.
    pub fn with_refined_noise(mut self, fine_per_node: usize) -> Result<Self> {
        if fine_per_node == 0 {
            return Err(invalid("fine_per_node must be positive"));
        }
        let gaps = self.plan.node_count() - 1;
        let dt = self.plan.step_size() / (gaps * fine_per_node) as f64;
        let a = self.plan.ops().linear_drift();
        let transition = expm(&(a * dt))?;
        let factor = psd_factor(&node_covariance(a, self.plan.ops().diffusion(), dt)?)?;
        self.noise = HolaNoise::Refined(RefinedNoise {
            per_step: (gaps * fine_per_node) as u64,
            per_node: fine_per_node,
            transition,
            factor,
        });
        Ok(self)
    }

    pub fn plan(&self) -> &StepPlan {
        &self.plan
    }

    pub fn nu_star(&self) -> usize {
        self.nu_star
    }

    /// Generates the node noise for `state.step` without stepping.
    pub fn node_noise(&self, rng: &mut CounterRng, step: u64, ws: &mut HolaWorkspace) {
        let k = self.plan.order();
        match &self.noise {
            HolaNoise::Direct => {
                rng.normals_at(step, ws.wide.as_mut_slice());
                let w = self.plan.noise_factor() * &ws.wide;
                for (j, block) in ws.noise.iter_mut().enumerate() {
                    block.copy_from(&w.rows(j * k, k));
                }
            }
            HolaNoise::Refined(r) => r.fill(
                rng,
                step,
                &mut ws.noise,
                &mut ws.z,
                &mut ws.acc,
                &mut ws.tmp,
            ),
        }
    }

    /// One step that also records per-sweep deltas.
    pub fn traced_step<P: Potential + ?Sized>(
        &self,
        potential: &P,
        state: &mut ChainState,
        rng: &mut CounterRng,
        ws: &mut HolaWorkspace,
        trace: &mut Vec<f64>,
    ) -> Result<()> {
        self.node_noise(rng, state.step, ws);
        ws.stepper.step(
            &self.plan,
            potential,
            state,
            &ws.noise,
            self.nu_star,
            Some(trace),
        )
    }
}

impl Kernel for HolaKernel {
    type Workspace = HolaWorkspace;

    fn name(&self) -> &'static str {
        if self.plan.order() == 2 {
            "underdamped"
        } else {
            "hola"
        }
    }

    fn rows(&self) -> usize {
        self.plan.order()
    }

    fn step_size(&self) -> f64 {
        self.plan.step_size()
    }

    fn grad_evals_per_step(&self) -> u64 {
        (self.nu_star * self.plan.node_count()) as u64
    }

    fn workspace(&self, dim: usize) -> HolaWorkspace {
        let k = self.plan.order();
        let m = self.plan.node_count();
        HolaWorkspace {
            stepper: PicardStepper::new(&self.plan, dim),
            noise: vec![Mat::zeros(k, dim); m],
            z: Mat::zeros(k, dim),
            wide: Mat::zeros(m * k, dim),
            acc: Mat::zeros(k, dim),
            tmp: Mat::zeros(k, dim),
        }
    }

    fn step<P: Potential + ?Sized>(
        &self,
        potential: &P,
        state: &mut ChainState,
        rng: &mut CounterRng,
        ws: &mut HolaWorkspace,
    ) -> Result<()> {
        self.node_noise(rng, state.step, ws);
        ws.stepper
            .step(&self.plan, potential, state, &ws.noise, self.nu_star, None)
    }
}

/// Library-level configuration of a higher-order run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub order: usize,
    pub gamma: f64,
    pub h: f64,
    /// Collocation nodes; defaults to K−1.
    pub nodes: Option<usize>,
    /// Picard iterations; defaults to K−1.
    pub nu_star: Option<usize>,
    pub n_steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub chains: usize,
    /// Initial K×d state in row-major order; zeros when absent.
    pub x0: Option<Vec<f64>>,
    /// Turn contraction-guard warnings into errors.
    pub strict: bool,
}

impl SamplerConfig {
    pub fn new(order: usize, gamma: f64, h: f64, n_steps: u64, seed: u64) -> Self {
        Self {
            order,
            gamma,
            h,
            nodes: None,
            nu_star: None,
            n_steps,
            burn_in: 0,
            thin: 1,
            seed,
            chains: 1,
            x0: None,
            strict: false,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.unwrap_or(self.order.saturating_sub(1))
    }

    pub fn picard_iterations(&self) -> usize {
        self.nu_star.unwrap_or(self.order.saturating_sub(1))
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            n_steps: self.n_steps,
            burn_in: self.burn_in,
            thin: self.thin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 3 {
            return Err(invalid(format!(
                "order K must be at least 3 for the higher-order sampler, got {}",
                self.order
            )));
        }
        if self.picard_iterations() == 0 {
            return Err(invalid("nu_star must be at least 1"));
        }
        if self.thin == 0 {
            return Err(invalid("thin must be positive"));
        }
        if self.chains == 0 {
            return Err(invalid("chains must be positive"));
        }
        Ok(())
    }

    /// Builds the kernel and checks the Picard contraction guard
    /// `2 L h Γ_φ < ½`. Returns guard warnings alongside the kernel.
    pub fn kernel<P: Potential + ?Sized>(
        &self,
        potential: &P,
    ) -> Result<(HolaKernel, Vec<String>)> {
        self.validate()?;
        let ops = CanonicalOperators::new(self.order, self.gamma)?;
        let plan = StepPlan::new(ops, self.node_count(), self.h)?;
        let warnings = contraction_warnings(&plan, potential.smoothness().l);
        if self.strict && !warnings.is_empty() {
            return Err(invalid(warnings.join("; ")));
        }
        Ok((HolaKernel::new(plan, self.picard_iterations())?, warnings))
    }

    pub fn initial_state(&self, dim: usize) -> Result<Mat> {
        initial_state(self.x0.as_deref(), self.order, dim)
    }
}

pub(crate) fn contraction_warnings(plan: &StepPlan, l: f64) -> Vec<String> {
    let rho = plan.contraction_factor(l);
    if rho >= 0.5 {
        vec![format!(
            "Picard contraction factor 2*L*h*Gamma = {rho:.4} >= 0.5 (L={l}, h={}, Gamma={:.4}); iterations may not contract",
            plan.step_size(),
            plan.lebesgue()
        )]
    } else {
        Vec::new()
    }
}

pub fn initial_state(x0: Option<&[f64]>, rows: usize, dim: usize) -> Result<Mat> {
    match x0 {
        None => Ok(Mat::zeros(rows, dim)),
        Some(v) if v.len() == rows * dim => Ok(DMatrix::from_row_slice(rows, dim, v)),
        Some(v) if v.len() == dim => {
            let mut x = Mat::zeros(rows, dim);
            x.row_mut(0).iter_mut().zip(v).for_each(|(a, b)| *a = *b);
            Ok(x)
        }
        Some(v) => Err(Error::Shape(format!(
            "initial state has {} entries; expected {} (full state) or {dim} (position)",
            v.len(),
            rows * dim
        ))),
    }
}

/// Which steps are retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub n_steps: u64,
    pub burn_in: u64,
    pub thin: u64,
}

impl Schedule {
    /// Whether the state after step `n` (1-based) is kept.
    pub fn keeps(&self, n: u64) -> bool {
        n > self.burn_in && (n - self.burn_in) % self.thin.max(1) == 0
    }

    pub fn retained(&self) -> u64 {
        self.n_steps.saturating_sub(self.burn_in) / self.thin.max(1)
    }
}

/// Receives retained states.
pub trait SampleSink {
    fn record(&mut self, state: &ChainState);
}

/// Retained rows, either the position block or the full K-block state
/// flattened block by block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    width: usize,
    full_state: bool,
    steps: Vec<u64>,
    values: Vec<f64>,
}

impl SampleSet {
    pub fn positions(dim: usize) -> Self {
        Self {
            width: dim,
            full_state: false,
            ..Default::default()
        }
    }

    pub fn full_states(rows: usize, dim: usize) -> Self {
        Self {
            width: rows * dim,
            full_state: true,
            ..Default::default()
        }
    }

    pub fn from_rows(width: usize, rows: &[Vec<f64>]) -> Self {
        let mut s = Self::positions(width);
        for (i, r) in rows.iter().enumerate() {
            s.steps.push(i as u64 + 1);
            s.values.extend_from_slice(r);
        }
        s
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_full_state(&self) -> bool {
        self.full_state
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.width.max(1))
    }

    pub fn extend(&mut self, other: &SampleSet) {
        self.steps.extend_from_slice(&other.steps);
        self.values.extend_from_slice(&other.values);
    }

    /// Applies `f` to every value; used to plant faults in diagnostics tests.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|v| f(*v)).collect(),
            ..self.clone()
        }
    }
}

impl SampleSink for SampleSet {
    fn record(&mut self, state: &ChainState) {
        self.steps.push(state.step);
        if self.full_state {
            for r in 0..state.x.nrows() {
                self.values.extend(state.x.row(r).iter());
            }
        } else {
            self.values.extend(state.x.row(0).iter());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub sampler: String,
    pub chain: usize,
    pub steps_completed: u64,
    pub retained: u64,
    pub grad_evals: u64,
    pub wall_time_secs: f64,
    pub diverged: bool,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

/// Output of one chain. `error` is set when the chain stopped early; the
/// samples retained up to that point are kept.
#[derive(Debug, Clone)]
pub struct ChainRun<S = SampleSet> {
    pub samples: S,
    pub report: RunReport,
    pub error: Option<Error>,
}

/// Runs one chain of `kernel` into `sink`.
pub fn run_kernel_chain<K, P, S>(
    kernel: &K,
    potential: &P,
    x0: &Mat,
    schedule: Schedule,
    seed: u64,
    chain: usize,
    mut sink: S,
) -> ChainRun<S>
where
    K: Kernel,
    P: Potential + ?Sized,
    S: SampleSink,
{
    let start = Instant::now();
    let mut rng = CounterRng::new(seed, chain as u64, Domain::Sampler);
    let mut ws = kernel.workspace(potential.dim());
    let mut state = ChainState::from_matrix(x0.clone());
    let mut retained = 0;
    let mut error = None;
    if x0.shape() != (kernel.rows(), potential.dim()) {
        error = Some(Error::Shape(format!(
            "initial state is {:?}, kernel needs {}x{}",
            x0.shape(),
            kernel.rows(),
            potential.dim()
        )));
    }
    while error.is_none() && state.step < schedule.n_steps {
        if let Err(e) = kernel.step(potential, &mut state, &mut rng, &mut ws) {
            error = Some(e);
            break;
        }
        if !state.is_finite() {
            error = Some(Error::Divergence {
                step: state.step,
                node: None,
            });
            break;
        }
        if schedule.keeps(state.step) {
            sink.record(&state);
            retained += 1;
        }
    }
    let diverged = matches!(error, Some(Error::Divergence { .. }));
    let steps_completed = if diverged {
        state.step.saturating_sub(1)
    } else {
        state.step
    };
    ChainRun {
        samples: sink,
        report: RunReport {
            sampler: kernel.name().to_string(),
            chain,
            steps_completed,
            retained,
            grad_evals: state.grad_evals,
            wall_time_secs: start.elapsed().as_secs_f64(),
            diverged,
            error: error.as_ref().map(|e| e.to_string()),
            warnings: Vec::new(),
        },
        error,
    }
}

/// Independent chains `0..chains`, each on its own counter stream. Results
/// are ordered by chain index regardless of scheduling.
#[derive(Debug, Clone)]
pub struct Ensemble<S = SampleSet> {
    pub runs: Vec<ChainRun<S>>,
}

impl<S> Ensemble<S> {
    pub fn errors(&self) -> Vec<(usize, &Error)> {
        self.runs
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| (r.report.chain, e)))
            .collect()
    }

    pub fn grad_evals(&self) -> u64 {
        self.runs.iter().map(|r| r.report.grad_evals).sum()
    }

    pub fn first_error(&self) -> Option<&Error> {
        self.runs.iter().find_map(|r| r.error.as_ref())
    }
}

impl Ensemble<SampleSet> {
    /// Chain-ordered concatenation of all retained rows.
    pub fn pooled(&self) -> SampleSet {
        let mut out = match self.runs.first() {
            Some(r) => SampleSet {
                steps: Vec::new(),
                values: Vec::new(),
                ..r.samples.clone()
            },
            None => SampleSet::default(),
        };
        for r in &self.runs {
            out.extend(&r.samples);
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
pub fn run_kernel_ensemble<K, P, S, F>(
    kernel: &K,
    potential: &P,
    x0: &Mat,
    schedule: Schedule,
    seed: u64,
    chains: usize,
    threads: Option<usize>,
    make_sink: F,
) -> Result<Ensemble<S>>
where
    K: Kernel,
    P: Potential + ?Sized,
    S: SampleSink + Send,
    F: Fn(usize) -> S + Sync,
{
    let run = |c: usize| run_kernel_chain(kernel, potential, x0, schedule, seed, c, make_sink(c));
    let runs = match threads {
        Some(1) => (0..chains).map(run).collect(),
        _ => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = threads {
                builder = builder.num_threads(n);
            }
            let pool = builder
                .build()
                .map_err(|e| invalid(format!("thread pool: {e}")))?;
            pool.install(|| (0..chains).into_par_iter().map(run).collect())
        }
    };
    Ok(Ensemble { runs })
}

/// Single chain of the higher-order sampler (chain index 0).
pub fn run_chain<P: Potential + ?Sized>(
    config: &SamplerConfig,
    potential: &P,
) -> Result<(SampleSet, RunReport)> {
    let (kernel, warnings) = config.kernel(potential)?;
    let x0 = config.initial_state(potential.dim())?;
    let mut run = run_kernel_chain(
        &kernel,
        potential,
        &x0,
        config.schedule(),
        config.seed,
        0,
        SampleSet::positions(potential.dim()),
    );
    run.report.warnings = warnings;
    match run.error {
        Some(e) => Err(e),
        None => Ok((run.samples, run.report)),
    }
}

/// `config.chains` independent chains of the higher-order sampler.
pub fn run_ensemble<P: Potential + ?Sized>(
    config: &SamplerConfig,
    potential: &P,
    threads: Option<usize>,
) -> Result<Ensemble> {
    let (kernel, warnings) = config.kernel(potential)?;
    let x0 = config.initial_state(potential.dim())?;
    let dim = potential.dim();
    let mut ens = run_kernel_ensemble(
        &kernel,
        potential,
        &x0,
        config.schedule(),
        config.seed,
        config.chains,
        threads,
        |_| SampleSet::positions(dim),
    )?;
    for r in &mut ens.runs {
        r.report.warnings = warnings.clone();
    }
    Ok(ens)
}
