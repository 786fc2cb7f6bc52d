use serde::{Deserialize, Serialize};

use super::filter::ParticleCloud;
use crate::model::SingleGroupParams;
use crate::model::params::{sojourn_index, transition_index};

/// Update rule applied to the score increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

/// Step sizes `η_k = η_0 · rate^(k / decay_updates)` for the `k`-th update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub initial: f64,
    pub decay_rate: f64,
    pub decay_updates: f64,
}

impl StepSchedule {
    pub fn step(&self, k: usize) -> f64 {
        self.initial * self.decay_rate.powf(k as f64 / self.decay_updates)
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Score recursion and optimiser state for online gradient ascent.
///
/// Each particle carries `Φ`, the expected score of the path leading to it.
/// `score()` is `Σ W Φ`, an estimate of `∇ log p(y_{1:t})`. Every
/// `update_interval` sites the change in that estimate since the previous
/// update is passed to the optimiser.
#[derive(Debug, Clone)]
pub struct GradientStats {
    dim: usize,
    phi: Vec<f64>,
    next: Vec<f64>,
    score: Vec<f64>,
    last_score: Vec<f64>,
    update_interval: usize,
    schedule: StepSchedule,
    kind: OptimizerKind,
    updates: usize,
    m: Vec<f64>,
    v: Vec<f64>,
    // scratch for the backward mixture
    agg: Vec<f64>,
    agg_dlog_rho: Vec<f64>,
    mass: Vec<f64>,
}

impl GradientStats {
    pub fn new(dim: usize, update_interval: usize, schedule: StepSchedule, kind: OptimizerKind) -> Self {
        Self {
            dim,
            phi: Vec::new(),
            next: Vec::new(),
            score: vec![0.0; dim],
            last_score: vec![0.0; dim],
            update_interval: update_interval.max(1),
            schedule,
            kind,
            updates: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            agg: Vec::new(),
            agg_dlog_rho: Vec::new(),
            mass: Vec::new(),
        }
    }

    /// Current score estimate `∇_t`.
    pub fn score(&self) -> &[f64] {
        &self.score
    }

    /// Number of parameter updates performed so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Starts a new pass over the data. Optimiser moments and the step
    /// counter are kept.
    ///
    /// The initial density has no free parameters and the emission does not
    /// depend on θ, so `Φ_1 = 0`.
    pub fn start(&mut self, cloud: &ParticleCloud) {
        self.phi.clear();
        self.phi.resize(cloud.len() * self.dim, 0.0);
        self.score.iter_mut().for_each(|v| *v = 0.0);
        self.last_score.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Propagates `Φ` from `prev` to `cloud` and refreshes the score.
    pub fn propagate(&mut self, prev: &ParticleCloud, cloud: &ParticleCloud, params: &SingleGroupParams) {
        let d = self.dim;
        let r = params.n_regimes();
        let n_cont = cloud.n_continued();
        self.next.clear();
        self.next.resize(cloud.len() * d, 0.0);
        for (n, &a) in cloud.ancestors.iter().enumerate() {
            let s = prev.states[a];
            let dst = &mut self.next[n * d..(n + 1) * d];
            dst.copy_from_slice(&self.phi[a * d..(a + 1) * d]);
            dst[sojourn_index(r, s.regime)] += params.hazard(s.regime).point(s.sojourn).dlog_surv;
        }
        // Per previous regime: B = Σ W ρ, A = Σ W ρ Φ, A_ω = Σ W ρ ∂log ρ.
        self.mass.clear();
        self.mass.resize(r, 0.0);
        self.agg.clear();
        self.agg.resize(r * d, 0.0);
        self.agg_dlog_rho.clear();
        self.agg_dlog_rho.resize(r, 0.0);
        for (m, (s, &w)) in prev.states.iter().zip(&prev.weights).enumerate() {
            if w == 0.0 {
                continue;
            }
            let pt = params.hazard(s.regime).point(s.sojourn);
            let beta = w * pt.rho;
            if beta == 0.0 {
                continue;
            }
            self.mass[s.regime] += beta;
            self.agg_dlog_rho[s.regime] += beta * pt.dlog_rho;
            let src = &self.phi[m * d..(m + 1) * d];
            for (a, &v) in self.agg[s.regime * d..(s.regime + 1) * d].iter_mut().zip(src) {
                *a += beta * v;
            }
        }
        for to in 0..r {
            let denom: f64 = (0..r).filter(|&f| f != to).map(|f| self.mass[f] * params.trans(f, to)).sum();
            if denom <= 0.0 {
                continue;
            }
            let base = (n_cont + to) * d;
            for from in (0..r).filter(|&f| f != to) {
                let p = params.trans(from, to) / denom;
                if p == 0.0 {
                    continue;
                }
                let dst = &mut self.next[base..base + d];
                for (x, &a) in dst.iter_mut().zip(&self.agg[from * d..(from + 1) * d]) {
                    *x += p * a;
                }
                dst[sojourn_index(r, from)] += p * self.agg_dlog_rho[from];
                // ∇ log P(to | from) weighted by the mixture mass of `from`.
                let scale = p * self.mass[from];
                for c in (0..r).filter(|&c| c != from) {
                    let one_hot = if c == to { 1.0 } else { 0.0 };
                    dst[transition_index(r, from, c)] += scale * (one_hot - params.trans(from, c));
                }
            }
        }
        std::mem::swap(&mut self.phi, &mut self.next);
        self.score.iter_mut().for_each(|v| *v = 0.0);
        for (row, &w) in self.phi.chunks_exact(d).zip(&cloud.weights) {
            for (s, &v) in self.score.iter_mut().zip(row) {
                *s += w * v;
            }
        }
    }

    /// True when the site with zero-based index `site` closes an update
    /// interval.
    pub fn due(&self, site: usize) -> bool {
        (site + 1).is_multiple_of(self.update_interval)
    }

    /// Applies one optimiser step using the score increment since the last
    /// update and returns the new θ.
    pub fn apply(&mut self, theta: &[f64]) -> Vec<f64> {
        let eta = self.schedule.step(self.updates);
        self.updates += 1;
        let mut out = theta.to_vec();
        match self.kind {
            OptimizerKind::Sgd => {
                for i in 0..self.dim {
                    out[i] += eta * (self.score[i] - self.last_score[i]);
                }
            }
            OptimizerKind::Adam => {
                let k = self.updates as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(k);
                let c2 = 1.0 - ADAM_BETA2.powi(k);
                for i in 0..self.dim {
                    let g = self.score[i] - self.last_score[i];
                    self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
                    self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
                    out[i] += eta * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
        self.last_score.copy_from_slice(&self.score);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_step_leaves_theta() {
        let sched = StepSchedule {
            initial: 0.0,
            decay_rate: 0.1,
            decay_updates: 10.0,
        };
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut g = GradientStats::new(4, 1, sched, kind);
            g.score = vec![1.0, -2.0, 0.5, 3.0];
            let theta = vec![0.1, 0.2, 0.3, 0.4];
            assert_eq!(g.apply(&theta), theta);
        }
    }

    #[test]
    fn schedule_decays_geometrically() {
        let s = StepSchedule {
            initial: 0.01,
            decay_rate: 0.1,
            decay_updates: 100.0,
        };
        assert!((s.step(0) - 0.01).abs() < 1e-15);
        assert!((s.step(100) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn adam_moves_along_score() {
        let sched = StepSchedule {
            initial: 0.01,
            decay_rate: 1.0,
            decay_updates: 1.0,
        };
        let mut g = GradientStats::new(2, 200, sched, OptimizerKind::Adam);
        g.score = vec![5.0, -0.1];
        let out = g.apply(&[0.0, 0.0]);
        assert!((out[0] - 0.01).abs() < 1e-9);
        assert!((out[1] + 0.01).abs() < 1e-6);
        assert!(g.due(199) && !g.due(200));
    }
}
