use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::RegimePalette;
use crate::paired::TrajectorySet;

use super::signal::Signal;

/// Non-overlapping, non-empty regions of consecutive site indices
/// (half-open ranges) with positive weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionSet {
    pub regions: Vec<Range<usize>>,
    pub weights: Vec<f64>,
}

impl RegionSet {
    pub fn new(regions: Vec<Range<usize>>, weights: Vec<f64>) -> Result<Self> {
        if regions.len() != weights.len() {
            return Err(Error::Domain("one weight per region is required".into()));
        }
        for (i, r) in regions.iter().enumerate() {
            if r.is_empty() {
                return Err(Error::Domain(format!("region {i} is empty")));
            }
            if !(weights[i] > 0.0) {
                return Err(Error::Domain(format!("region {i} has nonpositive weight")));
            }
        }
        let mut sorted: Vec<&Range<usize>> = regions.iter().collect();
        sorted.sort_by_key(|r| r.start);
        if sorted.windows(2).any(|w| w[0].end > w[1].start) {
            return Err(Error::Domain("regions overlap".into()));
        }
        Ok(Self { regions, weights })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}

/// Maximal runs of sites whose posterior signal probability reaches
/// `threshold`, weighted by their number of sites.
pub fn build_regions(posterior: &[f64], threshold: f64) -> RegionSet {
    let mut regions = Vec::new();
    let mut start = None;
    for (t, &p) in posterior.iter().enumerate() {
        match (p >= threshold, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                regions.push(s..t);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        regions.push(s..posterior.len());
    }
    let weights = regions.iter().map(|r| r.len() as f64).collect();
    RegionSet { regions, weights }
}

/// Proportion of signal sites within `region` of an indicator sequence.
pub fn region_signal_fraction(indicators: &[bool], region: &Range<usize>) -> f64 {
    let hits = indicators[region.clone()].iter().filter(|&&b| b).count();
    hits as f64 / region.len() as f64
}

/// Posterior probability, per region, that at most a fraction `gamma` of
/// its sites carry signal.
pub fn region_lfdr(
    trajs: &TrajectorySet,
    regions: &RegionSet,
    gamma: f64,
    signal: Signal,
    palette: &RegimePalette,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Domain(format!("tolerance {gamma} outside [0, 1)")));
    }
    let k = trajs.count();
    let mut counts = vec![0usize; k];
    regions
        .regions
        .iter()
        .map(|region| {
            if region.is_empty() {
                return Err(Error::Domain("empty region".into()));
            }
            if region.end > trajs.sites() {
                return Err(Error::Domain(format!("region {region:?} beyond {} sites", trajs.sites())));
            }
            counts.iter_mut().for_each(|c| *c = 0);
            for t in region.clone() {
                for (c, &code) in counts.iter_mut().zip(trajs.site_codes(t)) {
                    *c += usize::from(signal.eval_code(code, palette));
                }
            }
            let len = region.len() as f64;
            let null = counts.iter().filter(|&&c| c as f64 / len <= gamma).count();
            Ok(null as f64 / k as f64)
        })
        .collect()
}
