//! Case–control inference: the joint merge/split state space, its transition
//! kernel, the discrete particle filter and backward simulation of
//! posterior trajectories.

mod dpf;
mod ffbs;
mod kernel;
mod state;

pub use dpf::{dpf_init, dpf_step, run_dpf, DpfWorkspace, FilterHistory, PairedCloud};
pub use ffbs::{
    backward_sample, sample_posterior_paths, smoothed_expectation, PairedRunConfig, TrajectorySet,
};
pub use kernel::{
    paired_log_potential, paired_transition_log_prob, successor_log_probs, CaseControlParams,
};
pub(crate) use kernel::expand_successors;
pub(crate) use state::packed;
pub use state::{enumerate_initial, enumerate_successors, PairedState, MAX_REGIMES, MAX_SOJOURN};
