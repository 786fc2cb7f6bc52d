//! Emission potentials, sojourn hazards, parametrisation and transition
//! densities shared by the single-group and case–control filters.

mod emission;
pub(crate) mod params;
mod regime;
mod sojourn;

pub use emission::{
    beta_binomial_log_pmf, site_log_potential, CountMatrix, LogPotentials, SiteCounts,
};
pub use params::{
    grad_log_transition, transition_log_prob, unpack_params, SingleGroupParams, SingleGroupState,
};
pub use regime::{regime_shape, RegimePalette, RegimeSpec, SIMULATION_PALETTES};
pub use sojourn::{sojourn_hazard, HazardTable, SojournPrior};
