//! Count tables, run configuration and result files.

mod config;
mod counts;
mod output;
mod tables;

pub use config::RunConfig;
pub use counts::{format_counts, parse_counts, parse_counts_str, write_counts, ChromosomeCounts, CountTable};
pub use output::{
    read_fit_record, read_trajectories, read_truth, write_fit_record, write_trajectories, write_truth,
    ChromosomeFit, ChromosomeTrajectories, FitRecord, TruthTable,
};
pub use tables::{
    fit_record, read_region_decisions, read_site_decisions, write_bundle, write_paired_posteriors, write_regime_posteriors,
    write_region_decisions, write_site_decisions, RegionRow, SiteRow,
};
