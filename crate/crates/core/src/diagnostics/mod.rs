//! Moment estimators, Gaussian W₂ error, order sweeps, Picard and
//! interpolation probes, and structural checks of the canonical operators.

mod bounds;
mod interpolation;
pub mod linear;
mod moments;
mod probe;
mod sweep;
mod theory;
mod wasserstein;

pub use bounds::{stationary_moment_check, MomentBound, MomentCheckReport, MIN_SAMPLES};
pub use interpolation::{interpolation_order_check, InterpolationOrderResult};
pub use moments::{
    batch_mean_se, matrix_rows, moment_report, BlockedMoments, MomentAccumulator, MomentReport,
};
pub use probe::{picard_probe, ProbeReport};
pub use sweep::{
    fit_log_slope, order_sweep, OrderSweepResult, SweepConfig, SweepPoint, SweepSampler,
};
pub use theory::{
    lebesgue_bound, theory_checks, TheoryCheckConfig, TheoryEntry, TheoryReport, SPECTRUM_FLOOR,
};
pub use wasserstein::gaussian_w2;
