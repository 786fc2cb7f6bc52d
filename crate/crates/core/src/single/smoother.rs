use std::collections::VecDeque;

use super::filter::{change_mass, ParticleCloud};
use crate::model::SingleGroupParams;

/// Smoothed regime probabilities for one site, released by the smoother.
#[derive(Debug, Clone, PartialEq)]
pub struct RetiredEstimate {
    pub site: usize,
    /// Estimate of `p(r_site = q | y)` for each regime `q`.
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Task {
    site: usize,
    /// Row-major `N × R` statistics, one row per particle.
    psi: Vec<f64>,
}

/// Adaptive-lag smoother for the regime indicators `1{r_s = q}`.
///
/// Every site opens a task whose per-particle statistics follow the particle
/// genealogy forward. A task retires once the weighted variance of all its
/// statistics drops below `epsilon`, or after `max_lag` sites, or at the end
/// of the data.
#[derive(Debug, Clone)]
pub struct AdaptiveLagSmoother {
    epsilon: f64,
    max_lag: Option<usize>,
    regimes: usize,
    tasks: VecDeque<Task>,
    next: Vec<f64>,
    mass: Vec<f64>,
    agg: Vec<f64>,
}

impl AdaptiveLagSmoother {
    pub fn new(regimes: usize, epsilon: f64, max_lag: Option<usize>) -> Self {
        Self {
            epsilon,
            max_lag,
            regimes,
            tasks: VecDeque::new(),
            next: Vec::new(),
            mass: Vec::new(),
            agg: Vec::new(),
        }
    }

    /// Number of tasks still waiting for retirement.
    pub fn pending(&self) -> usize {
        self.tasks.len()
    }

    fn open(&mut self, cloud: &ParticleCloud, site: usize) {
        let q = self.regimes;
        let mut psi = vec![0.0; cloud.len() * q];
        for (n, s) in cloud.states.iter().enumerate() {
            psi[n * q + s.regime] = 1.0;
        }
        self.tasks.push_back(Task { site, psi });
    }

    /// Registers the first site.
    pub fn start(&mut self, cloud: &ParticleCloud, site: usize) -> Vec<RetiredEstimate> {
        self.tasks.clear();
        self.open(cloud, site);
        self.retire(cloud, site)
    }

    /// Propagates all open tasks from `prev` to `cloud` (the output of the
    /// filter step at `site`), opens a task for `site`, and returns the tasks
    /// that retired.
    pub fn update(
        &mut self,
        prev: &ParticleCloud,
        cloud: &ParticleCloud,
        params: &SingleGroupParams,
        site: usize,
    ) -> Vec<RetiredEstimate> {
        let q = self.regimes;
        let r = params.n_regimes();
        let n_cont = cloud.n_continued();
        change_mass(prev, params, &mut self.mass);
        for task in self.tasks.iter_mut() {
            self.next.clear();
            self.next.resize(cloud.len() * q, 0.0);
            for (n, &a) in cloud.ancestors.iter().enumerate() {
                self.next[n * q..(n + 1) * q].copy_from_slice(&task.psi[a * q..(a + 1) * q]);
            }
            // agg[r][·] = Σ_{m: r_m = r} W_m ρ_m Ψ_m
            self.agg.clear();
            self.agg.resize(r * q, 0.0);
            for (m, (s, &w)) in prev.states.iter().zip(&prev.weights).enumerate() {
                if w == 0.0 {
                    continue;
                }
                let beta = w * params.hazard(s.regime).rho(s.sojourn);
                if beta == 0.0 {
                    continue;
                }
                let row = &task.psi[m * q..(m + 1) * q];
                let dst = &mut self.agg[s.regime * q..(s.regime + 1) * q];
                for (d, &v) in dst.iter_mut().zip(row) {
                    *d += beta * v;
                }
            }
            for to in 0..r {
                let denom: f64 = (0..r).filter(|&f| f != to).map(|f| self.mass[f] * params.trans(f, to)).sum();
                if denom <= 0.0 {
                    continue;
                }
                let dst = &mut self.next[(n_cont + to) * q..(n_cont + to + 1) * q];
                for from in (0..r).filter(|&f| f != to) {
                    let p = params.trans(from, to) / denom;
                    for (d, &v) in dst.iter_mut().zip(&self.agg[from * q..(from + 1) * q]) {
                        *d += p * v;
                    }
                }
            }
            std::mem::swap(&mut task.psi, &mut self.next);
        }
        self.open(cloud, site);
        self.retire(cloud, site)
    }

    /// Retires every open task against the final cloud.
    pub fn finish(&mut self, cloud: &ParticleCloud) -> Vec<RetiredEstimate> {
        let q = self.regimes;
        self.tasks
            .drain(..)
            .map(|task| RetiredEstimate {
                site: task.site,
                probs: weighted_moments(&task.psi, &cloud.weights, q).0,
            })
            .collect()
    }

    fn retire(&mut self, cloud: &ParticleCloud, site: usize) -> Vec<RetiredEstimate> {
        let q = self.regimes;
        let mut out = Vec::new();
        let mut kept = VecDeque::with_capacity(self.tasks.len());
        for task in self.tasks.drain(..) {
            let (mean, var) = weighted_moments(&task.psi, &cloud.weights, q);
            let lag_hit = self.max_lag.is_some_and(|l| site - task.site >= l);
            let max_var = var.iter().copied().fold(0.0, f64::max);
            if max_var < self.epsilon || lag_hit {
                out.push(RetiredEstimate {
                    site: task.site,
                    probs: mean,
                });
            } else {
                kept.push_back(task);
            }
        }
        self.tasks = kept;
        out
    }
}

fn weighted_moments(psi: &[f64], weights: &[f64], q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; q];
    for (row, &w) in psi.chunks_exact(q).zip(weights) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += w * v;
        }
    }
    let mut var = vec![0.0; q];
    for (row, &w) in psi.chunks_exact(q).zip(weights) {
        for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
            *s += w * (v - m) * (v - m);
        }
    }
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RegimePalette;
    use crate::single::{filter_init, filter_step};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(eps: f64, sites: usize) -> (Vec<Vec<RetiredEstimate>>, Vec<ParticleCloud>) {
        let params = SingleGroupParams::uniform(RegimePalette::default_six(), 1, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pot = |t: usize| -> Vec<f64> { (0..6).map(|q| -(((q * 7 + t * 3) % 5) as f64)).collect() };
        let mut sm = AdaptiveLagSmoother::new(6, eps, None);
        let mut cloud = filter_init(&pot(0), &params, 0).unwrap();
        let mut out = vec![sm.start(&cloud, 0)];
        let mut clouds = vec![cloud.clone()];
        for t in 1..sites {
            let next = filter_step(&cloud, &pot(t), &params, 50, &mut rng, t).unwrap();
            out.push(sm.update(&cloud, &next, &params, t));
            cloud = next;
            clouds.push(cloud.clone());
        }
        out.push(sm.finish(&cloud));
        (out, clouds)
    }

    #[test]
    fn infinite_threshold_gives_filtering_estimates() {
        let (out, clouds) = run(f64::INFINITY, 8);
        for t in 0..8 {
            assert_eq!(out[t].len(), 1);
            let est = &out[t][0];
            assert_eq!(est.site, t);
            let mut filt = [0.0; 6];
            for (s, &w) in clouds[t].states.iter().zip(&clouds[t].weights) {
                filt[s.regime] += w;
            }
            for q in 0..6 {
                assert!((est.probs[q] - filt[q]).abs() < 1e-12);
            }
        }
        assert!(out[8].is_empty());
    }

    #[test]
    fn zero_threshold_retires_at_end() {
        let (out, _) = run(0.0, 8);
        assert!(out[..8].iter().all(|v| v.is_empty()));
        assert_eq!(out[8].len(), 8);
        for est in &out[8] {
            assert!((est.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_site_retires_once() {
        let (out, _) = run(1e-4, 200);
        let mut sites: Vec<usize> = out.iter().flatten().map(|e| e.site).collect();
        sites.sort_unstable();
        assert_eq!(sites, (0..200).collect::<Vec<_>>());
    }
}
