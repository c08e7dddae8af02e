use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::potential::Potential;
use crate::sampler::{ChainState, SampleSet, SampleSink};

/// Streaming mean/covariance (Welford, mergeable by Chan's update).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    n: u64,
    mean: Vec<f64>,
    m2: Mat,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: Mat::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        let d = self.mean.len();
        let mut delta = vec![0.0; d];
        for i in 0..d {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / n;
        }
        for i in 0..d {
            let post = x[i] - self.mean[i];
            for j in 0..d {
                self.m2[(j, i)] += delta[j] * post;
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let d = self.mean.len();
        let delta: Vec<f64> = (0..d).map(|i| other.mean[i] - self.mean[i]).collect();
        for i in 0..d {
            for j in 0..d {
                self.m2[(i, j)] += other.m2[(i, j)] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..d {
            self.mean[i] += delta[i] * nb / n;
        }
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance, symmetrized.
    pub fn covariance(&self) -> Mat {
        if self.n < 2 {
            return Mat::zeros(self.mean.len(), self.mean.len());
        }
        let c = &self.m2 / (self.n as f64 - 1.0);
        (&c + c.transpose()) * 0.5
    }
}

impl SampleSink for MomentAccumulator {
    fn record(&mut self, state: &ChainState) {
        let row: Vec<f64> = state.x.row(0).iter().cloned().collect();
        self.push(&row);
    }
}

/// Position moments accumulated in consecutive time blocks of a chain, for
/// block bootstrap.
#[derive(Debug, Clone)]
pub struct BlockedMoments {
    first_step: u64,
    steps_per_block: u64,
    blocks: Vec<MomentAccumulator>,
}

impl BlockedMoments {
    /// Blocks cover steps `first_step ..= first_step + n_blocks·steps_per_block − 1`.
    pub fn new(dim: usize, first_step: u64, steps_per_block: u64, n_blocks: usize) -> Self {
        Self {
            first_step,
            steps_per_block: steps_per_block.max(1),
            blocks: vec![MomentAccumulator::new(dim); n_blocks],
        }
    }

    pub fn blocks(&self) -> &[MomentAccumulator] {
        &self.blocks
    }

    pub fn total(&self) -> MomentAccumulator {
        let mut acc = MomentAccumulator::new(self.blocks.first().map_or(0, |b| b.mean.len()));
        for b in &self.blocks {
            acc.merge(b);
        }
        acc
    }
}

impl SampleSink for BlockedMoments {
    fn record(&mut self, state: &ChainState) {
        let offset = state.step.saturating_sub(self.first_step);
        let idx = ((offset / self.steps_per_block) as usize).min(self.blocks.len() - 1);
        self.blocks[idx].record(state);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n_samples: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    /// `E‖X₁‖²`.
    pub second_moment_x1: f64,
    /// `E‖∇U(X₁)‖²`, when a potential was supplied.
    pub grad_second_moment: Option<f64>,
}

impl MomentReport {
    pub fn cov_matrix(&self) -> Mat {
        let d = self.mean.len();
        Mat::from_fn(d, d, |i, j| self.cov[i][j])
    }
}

pub fn matrix_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().cloned().collect())
        .collect()
}

pub fn moment_report<P: Potential + ?Sized>(
    samples: &SampleSet,
    potential: Option<&P>,
) -> Result<MomentReport> {
    if samples.is_full_state() {
        return Err(Error::Shape(
            "moment report expects position samples".into(),
        ));
    }
    let d = samples.width();
    let mut acc = MomentAccumulator::new(d);
    let mut second = 0.0;
    let mut grad_second = 0.0;
    let mut g = vec![0.0; d];
    for row in samples.rows() {
        acc.push(row);
        second += row.iter().map(|v| v * v).sum::<f64>();
        if let Some(p) = potential {
            p.grad(row, &mut g);
            grad_second += g.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let n = samples.len().max(1) as f64;
    Ok(MomentReport {
        n_samples: samples.len(),
        mean: acc.mean().to_vec(),
        cov: matrix_rows(&acc.covariance()),
        second_moment_x1: second / n,
        grad_second_moment: potential.map(|_| grad_second / n),
    })
}

/// Mean and batch-means standard error of a scalar series.
pub fn batch_mean_se(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n.max(1) as f64;
    let batches = batches.min(n).max(2);
    let size = n / batches;
    if size == 0 {
        return (mean, f64::INFINITY);
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (mean, (var / batches as f64).sqrt())
}
