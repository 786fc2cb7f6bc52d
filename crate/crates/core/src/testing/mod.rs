//! Posterior-based multiple testing: local-fdr step-up rules at site and
//! region level, region construction, classical p-value corrections and
//! realised error rates.

mod baseline;
mod pvalue;
mod regions;
mod score;
mod signal;
mod stepup;

pub use baseline::{estimate_dispersion, wald_pvalues};
pub use pvalue::{pvalue_adjust, PValueMethod};
pub use regions::{build_regions, region_lfdr, region_signal_fraction, RegionSet};
pub use score::{score_decisions, Score};
pub use signal::Signal;
pub use stepup::{region_stepup, site_lfdr, stepup, stepup_weighted, DecisionSet};
