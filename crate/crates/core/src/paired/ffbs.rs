use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dpf::{run_dpf, FilterHistory};
use super::kernel::{paired_transition_log_prob, CaseControlParams};
use super::state::{packed, PairedState};
use crate::error::{Error, Result};
use crate::math::{derive_seed, pick_cumulative};
use crate::model::LogPotentials;

/// Particle budgets for posterior path sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedRunConfig {
    /// Particle budget `M` of the discrete particle filter.
    pub particles: usize,
    /// Trajectories drawn per run (`K`).
    pub backward: usize,
    /// Independent filter runs pooled together.
    pub runs: usize,
}

impl Default for PairedRunConfig {
    fn default() -> Self {
        Self {
            particles: 50,
            backward: 25,
            runs: 10,
        }
    }
}

/// Posterior sample paths over one chromosome, stored site-major as packed
/// states.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    sites: usize,
    count: usize,
    states: Vec<u64>,
}

impl TrajectorySet {
    /// `states[t * count + k]` is the state of trajectory `k` at site `t`.
    pub fn from_codes(sites: usize, count: usize, states: Vec<u64>) -> Result<Self> {
        if states.len() != sites * count {
            return Err(Error::Domain(format!(
                "{} codes do not form {sites} sites × {count} trajectories",
                states.len()
            )));
        }
        Ok(Self { sites, count, states })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Number of trajectories.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn codes(&self) -> &[u64] {
        &self.states
    }

    /// Packed states of all trajectories at site `t`.
    #[inline]
    pub fn site_codes(&self, t: usize) -> &[u64] {
        &self.states[t * self.count..(t + 1) * self.count]
    }

    pub fn state(&self, k: usize, t: usize) -> PairedState {
        PairedState::unpack(self.states[t * self.count + k])
    }

    /// Trajectory `k` as a vector of states.
    pub fn path(&self, k: usize) -> Vec<PairedState> {
        (0..self.sites).map(|t| self.state(k, t)).collect()
    }

    /// Concatenates the trajectories of several sets over the same sites.
    pub fn pool(sets: &[TrajectorySet]) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::Domain("nothing to pool".into()));
        };
        let sites = first.sites;
        if sets.iter().any(|s| s.sites != sites) {
            return Err(Error::Domain("pooled trajectory sets cover different sites".into()));
        }
        let count: usize = sets.iter().map(|s| s.count).sum();
        let mut states = Vec::with_capacity(sites * count);
        for t in 0..sites {
            for s in sets {
                states.extend_from_slice(s.site_codes(t));
            }
        }
        Ok(Self { sites, count, states })
    }

    /// Fraction of trajectories that are split at site `t`.
    pub fn prob_split(&self, t: usize) -> f64 {
        let split = self.site_codes(t).iter().filter(|&&c| !packed::z(c)).count();
        split as f64 / self.count as f64
    }

    /// Fraction of trajectories merged at every site of `s..=t`.
    pub fn prob_merged_span(&self, s: usize, t: usize) -> f64 {
        smoothed_expectation(self, s, t, |w| f64::from(u8::from(w.iter().all(|x| x.merged))))
    }

    /// Fraction of trajectories with control regime `q` at site `t`.
    pub fn prob_control_regime(&self, t: usize, q: usize) -> f64 {
        let hits = self.site_codes(t).iter().filter(|&&c| packed::control_regime(c) == q).count();
        hits as f64 / self.count as f64
    }
}

/// Monte Carlo average of `functional` over the window `s..=t` (zero-based,
/// inclusive) of every trajectory.
pub fn smoothed_expectation<F>(trajs: &TrajectorySet, s: usize, t: usize, functional: F) -> f64
where
    F: Fn(&[PairedState]) -> f64,
{
    assert!(s <= t && t < trajs.sites, "window {s}..={t} outside 0..{}", trajs.sites);
    let mut window = Vec::with_capacity(t - s + 1);
    let mut total = 0.0;
    for k in 0..trajs.count {
        window.clear();
        window.extend((s..=t).map(|i| trajs.state(k, i)));
        total += functional(&window);
    }
    total / trajs.count as f64
}

/// Draws `k` trajectories from the stored filtering history by backward
/// simulation.
///
/// A trajectory at site `t+1` fixes the predecessor's control substate when
/// the control sojourn exceeds one, and otherwise the case substate when the
/// groups are split with a case sojourn above one. Candidates are screened
/// on those bits before evaluating the transition density. Trajectories
/// that share their next state share one backward distribution.
pub fn backward_sample<G: Rng + ?Sized>(
    history: &FilterHistory,
    params: &CaseControlParams,
    k: usize,
    rng: &mut G,
) -> Result<TrajectorySet> {
    let sites = history.sites();
    let mut states = vec![0u64; sites * k];
    if sites == 0 || k == 0 {
        return TrajectorySet::from_codes(sites, k, states);
    }
    let mut cum = Vec::new();
    let (last_states, last_w) = history.site(sites - 1);
    cum.clear();
    let mut acc = 0.0;
    for &w in last_w {
        acc += w;
        cum.push(acc);
    }
    for j in 0..k {
        states[(sites - 1) * k + j] = last_states[pick_cumulative(&cum, rng.random())];
    }
    let mut order: Vec<usize> = (0..k).collect();
    let mut candidates: Vec<usize> = Vec::new();
    for t in (0..sites - 1).rev() {
        let (codes, weights) = history.site(t);
        let (done, todo) = states.split_at_mut((t + 1) * k);
        let next_codes = &todo[..k];
        let cur_codes = &mut done[t * k..];
        order.sort_unstable_by_key(|&j| next_codes[j]);
        let mut g = 0;
        while g < k {
            let code = next_codes[order[g]];
            let mut end = g + 1;
            while end < k && next_codes[order[end]] == code {
                end += 1;
            }
            let next = PairedState::unpack(code);
            let (mask, key) = if next.control.sojourn > 1 {
                (packed::CONTROL_MASK, packed::control_bits(next.control.sojourn - 1, next.control.regime))
            } else if !next.merged && next.case.sojourn > 1 {
                (packed::CASE_MASK, packed::case_bits(next.case.sojourn - 1, next.case.regime))
            } else {
                (0, 0)
            };
            candidates.clear();
            cum.clear();
            let mut acc = 0.0;
            for (l, (&c, &w)) in codes.iter().zip(weights).enumerate() {
                if c & mask != key {
                    continue;
                }
                let lp = paired_transition_log_prob(&next, Some(&PairedState::unpack(c)), params);
                let bw = w * lp.exp();
                if bw > 0.0 {
                    acc += bw;
                    candidates.push(l);
                    cum.push(acc);
                }
            }
            if candidates.is_empty() {
                return Err(Error::Invariant(format!(
                    "no predecessor with positive backward weight at site {t}"
                )));
            }
            for &j in &order[g..end] {
                cur_codes[j] = codes[candidates[pick_cumulative(&cum, rng.random())]];
            }
            g = end;
        }
    }
    TrajectorySet::from_codes(sites, k, states)
}

/// Runs `config.runs` independent filter + backward-sampling passes and pools
/// the trajectories. Run `i` uses a generator seeded from `seed` and `i`.
pub fn sample_posterior_paths(
    control: &LogPotentials,
    case: &LogPotentials,
    params: &CaseControlParams,
    config: &PairedRunConfig,
    seed: u64,
) -> Result<TrajectorySet> {
    if config.runs == 0 || config.backward == 0 {
        return Err(Error::Config("runs and backward samples must be positive".into()));
    }
    let mut sets = Vec::with_capacity(config.runs);
    for run in 0..config.runs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, run as u64));
        let (history, _) = run_dpf(control, case, params, config.particles, &mut rng, true)?;
        let history = history.expect("history requested");
        sets.push(backward_sample(&history, params, config.backward, &mut rng)?);
    }
    TrajectorySet::pool(&sets)
}
