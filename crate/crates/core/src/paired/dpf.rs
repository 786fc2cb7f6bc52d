use rand::Rng;
use rustc_hash::FxHashMap;

use super::kernel::{expand_successors, paired_transition_log_prob, CaseControlParams};
use super::state::{enumerate_initial, packed, PairedState, MAX_SOJOURN};
use crate::error::{Error, Result};
use crate::model::LogPotentials;
use crate::single::optimal_resample;

/// Filtering approximation over packed [`PairedState`] codes. Only
/// particles with positive weight are stored, and no state appears twice.
#[derive(Debug, Clone, Default)]
pub struct PairedCloud {
    pub states: Vec<u64>,
    /// Normalised weights.
    pub weights: Vec<f64>,
    /// Resampling constant used to form this cloud (∞ without pruning).
    pub resample_constant: f64,
    /// Log of the one-step predictive likelihood estimate.
    pub log_evidence: f64,
}

impl PairedCloud {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> PairedState {
        PairedState::unpack(self.states[i])
    }
}

/// Reusable buffers for [`dpf_step`].
#[derive(Debug, Default)]
pub struct DpfWorkspace {
    index: FxHashMap<u64, u32>,
    proposals: Vec<(u64, f64)>,
    successors: Vec<(u64, f64)>,
}

impl DpfWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

#[inline]
fn log_potential(code: u64, control: &[f64], case: &[f64]) -> f64 {
    control[packed::control_regime(code)] + case[packed::case_regime(code)]
}

/// Folds weighted proposals into a cloud, summing the weights of identical
/// states. Proposals are `(state, log weight)`.
fn collapse(
    proposals: &[(u64, f64)],
    index: &mut FxHashMap<u64, u32>,
    constant: f64,
    site: usize,
) -> Result<PairedCloud> {
    let max = proposals.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateLikelihood { site });
    }
    index.clear();
    let mut states = Vec::with_capacity(proposals.len() / 4);
    let mut weights: Vec<f64> = Vec::with_capacity(proposals.len() / 4);
    for &(code, lw) in proposals {
        let w = (lw - max).exp();
        if w == 0.0 {
            continue;
        }
        match index.entry(code) {
            std::collections::hash_map::Entry::Occupied(e) => weights[*e.get() as usize] += w,
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(states.len() as u32);
                states.push(code);
                weights.push(w);
            }
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    // Drop weights that vanished in the normalisation.
    if weights.contains(&0.0) {
        let mut i = 0;
        states.retain(|_| {
            let keep = weights[i] > 0.0;
            i += 1;
            keep
        });
        weights.retain(|&w| w > 0.0);
    }
    Ok(PairedCloud {
        states,
        weights,
        resample_constant: constant,
        log_evidence: max + total.ln(),
    })
}

/// First cloud: the `R²` restart states weighted by prior times potential.
pub fn dpf_init(control: &[f64], case: &[f64], params: &CaseControlParams, site: usize) -> Result<PairedCloud> {
    let proposals: Vec<(u64, f64)> = enumerate_initial(params.n_regimes())
        .iter()
        .map(|x| {
            let code = x.pack();
            (code, paired_transition_log_prob(x, None, params) + log_potential(code, control, case))
        })
        .filter(|p| p.1 > f64::NEG_INFINITY)
        .collect();
    collapse(&proposals, &mut FxHashMap::default(), f64::INFINITY, site)
}

/// One step of the discrete particle filter.
///
/// If more than `max_particles` particles are alive they are pruned by
/// optimal resampling; every surviving particle is then expanded into all of
/// its reachable successors. Successors that coincide are merged, so the
/// cloud is an exact representation of the propagated mixture.
pub fn dpf_step<G: Rng + ?Sized>(
    prev: &PairedCloud,
    control: &[f64],
    case: &[f64],
    params: &CaseControlParams,
    max_particles: usize,
    rng: &mut G,
    ws: &mut DpfWorkspace,
    site: usize,
) -> Result<PairedCloud> {
    let (parents, constant) = if prev.len() > max_particles {
        let res = optimal_resample(&prev.weights, max_particles, rng);
        (Some(res.ancestors), res.constant)
    } else {
        (None, f64::INFINITY)
    };
    ws.proposals.clear();
    let expand = |a: usize, ws: &mut DpfWorkspace| {
        let w = prev.weights[a];
        let kept = if constant.is_finite() { (constant * w).min(1.0) } else { 1.0 };
        let base = w.ln() - kept.ln();
        ws.successors.clear();
        expand_successors(prev.states[a], params, &mut ws.successors);
        for &(code, lp) in &ws.successors {
            ws.proposals.push((code, base + lp + log_potential(code, control, case)));
        }
    };
    match parents {
        Some(list) => list.iter().for_each(|&a| expand(a, ws)),
        None => (0..prev.len()).for_each(|a| expand(a, ws)),
    }
    collapse(&ws.proposals, &mut ws.index, constant, site)
}

/// Stored filtering clouds for all sites, as flat arrays with per-site
/// offsets.
#[derive(Debug, Clone, Default)]
pub struct FilterHistory {
    offsets: Vec<usize>,
    states: Vec<u64>,
    weights: Vec<f64>,
}

impl FilterHistory {
    pub fn new() -> Self {
        Self {
            offsets: vec![0],
            ..Self::default()
        }
    }

    pub fn push(&mut self, cloud: &PairedCloud) {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        self.states.extend_from_slice(&cloud.states);
        self.weights.extend_from_slice(&cloud.weights);
        self.offsets.push(self.states.len());
    }

    pub fn sites(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    /// Packed states and normalised weights at site `t`.
    pub fn site(&self, t: usize) -> (&[u64], &[f64]) {
        let (a, b) = (self.offsets[t], self.offsets[t + 1]);
        (&self.states[a..b], &self.weights[a..b])
    }

    /// Total number of stored particles.
    pub fn particles(&self) -> usize {
        self.states.len()
    }
}

/// Runs the discrete particle filter over a chromosome. Returns the history
/// (when requested) and the log-likelihood estimate.
pub fn run_dpf<G: Rng + ?Sized>(
    control: &LogPotentials,
    case: &LogPotentials,
    params: &CaseControlParams,
    max_particles: usize,
    rng: &mut G,
    keep_history: bool,
) -> Result<(Option<FilterHistory>, f64)> {
    let sites = control.sites();
    if case.sites() != sites {
        return Err(Error::Domain(format!(
            "control has {sites} sites but case has {}",
            case.sites()
        )));
    }
    if control.regimes() != params.n_regimes() || case.regimes() != params.n_regimes() {
        return Err(Error::Domain("potentials and parameters disagree on the regime count".into()));
    }
    if sites as u64 >= u64::from(MAX_SOJOURN) {
        return Err(Error::Domain(format!("at most {} sites per chromosome are supported", MAX_SOJOURN - 1)));
    }
    if max_particles == 0 {
        return Err(Error::Domain("particle budget must be positive".into()));
    }
    let mut history = keep_history.then(FilterHistory::new);
    if sites == 0 {
        return Ok((history, 0.0));
    }
    let mut ws = DpfWorkspace::new();
    let mut cloud = dpf_init(control.site(0), case.site(0), params, 0)?;
    let mut log_lik = cloud.log_evidence;
    if let Some(h) = history.as_mut() {
        h.push(&cloud);
    }
    for t in 1..sites {
        cloud = dpf_step(&cloud, control.site(t), case.site(t), params, max_particles, rng, &mut ws, t)?;
        log_lik += cloud.log_evidence;
        if let Some(h) = history.as_mut() {
            h.push(&cloud);
        }
    }
    Ok((history, log_lik))
}
