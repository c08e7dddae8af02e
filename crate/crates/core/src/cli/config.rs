use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use super::CliError;

/// Largest seed a TOML config file can represent.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Gaussian,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Hola,
    Ula,
    Underdamped,
    ExactGaussian,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Hola => "hola",
            SamplerKind::Ula => "ula",
            SamplerKind::Underdamped => "underdamped",
            SamplerKind::ExactGaussian => "exact-gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

/// Flags of `hola run`. A `--config` file uses the same keys (without the
/// leading dashes); flags override file values, which override defaults.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunArgs {
    /// Target potential.
    #[arg(long, value_enum)]
    pub potential: Option<PotentialKind>,
    /// Dimension d.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Gaussian curvatures, comma separated (defaults to all ones).
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// Strong-convexity parameter of the hyperbolic potential.
    #[arg(long)]
    pub m: Option<f64>,
    /// Order K of the dynamics.
    #[arg(long)]
    pub order: Option<usize>,
    /// Friction γ.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Step size h.
    #[arg(long)]
    pub step: Option<f64>,
    /// Number of outer steps per chain.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Picard iterations ν* (defaults to K−1).
    #[arg(long)]
    pub picard: Option<usize>,
    /// Collocation nodes M (defaults to K−1).
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Random seed (required, at most 2^63 − 1 so config files can hold it).
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
    pub seed: Option<u64>,
    /// Steps discarded before retaining samples.
    #[arg(long)]
    pub burnin: Option<u64>,
    #[arg(long)]
    pub thin: Option<u64>,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerKind>,
    /// Sample output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Fail instead of warning when the Picard contraction guard is violated.
    #[arg(long)]
    #[serde(default)]
    pub strict: bool,
    /// Emit all K blocks of the state instead of the position only.
    #[arg(long)]
    #[serde(default)]
    pub full_state: bool,
    /// Worker threads for chains (overrides HOLA_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Config file of `key = value` lines named after the flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Fully resolved settings of `hola run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    pub m: f64,
    pub order: usize,
    pub gamma: f64,
    pub step: f64,
    pub steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    pub chains: usize,
    pub seed: u64,
    pub burnin: u64,
    pub thin: u64,
    pub sampler: SamplerKind,
    pub out: PathBuf,
    pub format: OutputFormat,
    pub strict: bool,
    pub full_state: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Defaults for every field but the seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            potential: PotentialKind::Gaussian,
            dim: 2,
            lambda: None,
            m: 1.0,
            order: 3,
            gamma: 2.0,
            step: 0.05,
            steps: 1000,
            picard: None,
            nodes: None,
            chains: 1,
            seed,
            burnin: 0,
            thin: 1,
            sampler: SamplerKind::Hola,
            out: PathBuf::from("samples.csv"),
            format: OutputFormat::Csv,
            strict: false,
            full_state: false,
            threads: None,
        }
    }

    /// Defaults, then the config file named by `flags.config`, then flags.
    pub fn resolve(flags: &RunArgs) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => read_config_file(path)?,
            None => RunArgs::default(),
        };
        let seed = flags
            .seed
            .or(file.seed)
            .ok_or_else(|| CliError::Usage("--seed is required (flag or config file)".into()))?;
        if seed > MAX_SEED {
            return Err(CliError::Usage(format!("seed must be at most {MAX_SEED}")));
        }
        let mut c = Self::with_seed(seed);
        for layer in [&file, flags] {
            macro_rules! take {
                ($($f:ident),*) => { $( if let Some(v) = layer.$f.clone() { c.$f = v; } )* };
            }
            take!(
                potential, dim, m, order, gamma, step, steps, chains, burnin, thin, sampler, out,
                format
            );
            macro_rules! take_opt {
                ($($f:ident),*) => { $( if layer.$f.is_some() { c.$f = layer.$f.clone(); } )* };
            }
            take_opt!(lambda, picard, nodes, threads);
            c.strict |= layer.strict;
            c.full_state |= layer.full_state;
        }
        if let Some(lambda) = &c.lambda {
            let dim_given = flags.dim.is_some() || file.dim.is_some();
            if dim_given && c.dim != lambda.len() {
                return Err(CliError::Usage(format!(
                    "--dim {} disagrees with {} --lambda values",
                    c.dim,
                    lambda.len()
                )));
            }
            c.dim = lambda.len();
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn read_config_file(path: &Path) -> Result<RunArgs, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
