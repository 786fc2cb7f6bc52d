//! Single-group change-point inference: forward filter, optimal finite-state
//! resampling, adaptive-lag smoothing and online parameter estimation.

mod filter;
mod fit;
mod gradient;
mod resample;
mod smoother;

pub use filter::{filter_init, filter_step, ParticleCloud};
pub use fit::{fit_single_group, smooth_single_group, FitConfig, FitResult, RegimePosteriors};
pub use gradient::{GradientStats, OptimizerKind, StepSchedule};
pub use resample::{optimal_resample, resample_constant, Resampled};
pub use smoother::{AdaptiveLagSmoother, RetiredEstimate};
