use rand::Rng;

use super::resample::optimal_resample;
use crate::error::{Error, Result};
use crate::math::normalize_log_weights;
use crate::model::{SingleGroupParams, SingleGroupState};

/// Weighted particle approximation of the filtering distribution at one site.
///
/// The first `ancestors.len()` particles continue the segment of their
/// ancestor; the last `R` particles start a new segment in regime `0..R`.
#[derive(Debug, Clone, Default)]
pub struct ParticleCloud {
    pub states: Vec<SingleGroupState>,
    /// Unnormalised log weights.
    pub log_weights: Vec<f64>,
    /// Normalised weights.
    pub weights: Vec<f64>,
    /// Ancestor of each continuation particle in the previous cloud.
    pub ancestors: Vec<usize>,
    /// Resampling constant used to form this cloud (∞ without pruning).
    pub resample_constant: f64,
    /// Log of the one-step predictive likelihood estimate.
    pub log_evidence: f64,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of continuation particles.
    pub fn n_continued(&self) -> usize {
        self.ancestors.len()
    }

    fn normalise(&mut self, site: usize) -> Result<()> {
        let lse = normalize_log_weights(&self.log_weights, &mut self.weights)
            .ok_or(Error::DegenerateLikelihood { site })?;
        self.log_evidence = lse;
        Ok(())
    }
}

/// First cloud: one particle `(1, r)` per regime, weighted by `ν(r)·g(r)`.
/// `log_pot` holds the site's log potentials per regime.
pub fn filter_init(log_pot: &[f64], params: &SingleGroupParams, site: usize) -> Result<ParticleCloud> {
    let r = params.n_regimes();
    debug_assert_eq!(log_pot.len(), r);
    let nu = params.initial_regime_dist();
    let mut cloud = ParticleCloud {
        states: (0..r).map(|q| SingleGroupState::new(1, q)).collect(),
        log_weights: (0..r).map(|q| nu[q].ln() + log_pot[q]).collect(),
        weights: Vec::with_capacity(r),
        ancestors: Vec::new(),
        resample_constant: f64::INFINITY,
        log_evidence: 0.0,
    };
    cloud.normalise(site)?;
    Ok(cloud)
}

/// Per-regime change-point mass `A[r] = Σ_{m: r_m = r} W_m ρ(d_m)` of a cloud.
pub(crate) fn change_mass(prev: &ParticleCloud, params: &SingleGroupParams, out: &mut Vec<f64>) {
    out.clear();
    out.resize(params.n_regimes(), 0.0);
    for (s, &w) in prev.states.iter().zip(&prev.weights) {
        if w > 0.0 {
            out[s.regime] += w * params.hazard(s.regime).rho(s.sojourn);
        }
    }
}

/// One step of the single-group particle filter.
///
/// When the previous cloud holds more than `max_particles` particles it is
/// pruned with optimal resampling first. Surviving particles extend their
/// segment; `R` new particles open a segment in each regime, weighted by the
/// change-point mass of the whole previous cloud.
pub fn filter_step<G: Rng + ?Sized>(
    prev: &ParticleCloud,
    log_pot: &[f64],
    params: &SingleGroupParams,
    max_particles: usize,
    rng: &mut G,
    site: usize,
) -> Result<ParticleCloud> {
    let r = params.n_regimes();
    let (ancestors, constant) = if prev.len() > max_particles {
        let res = optimal_resample(&prev.weights, max_particles, rng);
        (res.ancestors, res.constant)
    } else {
        ((0..prev.len()).collect(), f64::INFINITY)
    };
    let n = ancestors.len() + r;
    let mut states = Vec::with_capacity(n);
    let mut log_weights = Vec::with_capacity(n);
    for &a in &ancestors {
        let s = prev.states[a];
        let w = prev.weights[a];
        let kept = if constant.is_finite() { (constant * w).min(1.0) } else { 1.0 };
        states.push(SingleGroupState::new(s.sojourn + 1, s.regime));
        log_weights.push(
            w.ln() - kept.ln() + params.hazard(s.regime).log_surv(s.sojourn) + log_pot[s.regime],
        );
    }
    let mut mass = Vec::new();
    change_mass(prev, params, &mut mass);
    for to in 0..r {
        let pred: f64 = (0..r).filter(|&from| from != to).map(|from| mass[from] * params.trans(from, to)).sum();
        states.push(SingleGroupState::new(1, to));
        log_weights.push(pred.ln() + log_pot[to]);
    }
    let mut cloud = ParticleCloud {
        states,
        log_weights,
        weights: Vec::with_capacity(n),
        ancestors,
        resample_constant: constant,
        log_evidence: 0.0,
    };
    cloud.normalise(site)?;
    Ok(cloud)
}
