//! Brute-force reference computations shared by the integration suites.
//!
//! Everything here is written directly from the model definition: hazards
//! come from the negative-binomial pmf, transitions are literal case
//! analyses, and expectations are sums over every path or every state.
#![allow(dead_code)]

use std::collections::HashMap;

use methsmc::model::{
    grad_log_transition, unpack_params, LogPotentials, RegimePalette, SingleGroupParams, SingleGroupState,
    SojournPrior,
};
use methsmc::paired::{CaseControlParams, PairedState};
use rand::Rng;
use statrs::distribution::{Discrete, NegativeBinomial};

/// `h(d) / (1 - Σ_{j<d} h(j))` for the shifted negative binomial.
pub fn literal_hazard(prior: &SojournPrior, d: u32) -> f64 {
    if d < prior.shift {
        return 0.0;
    }
    let nb = NegativeBinomial::new(prior.size, 1.0 - prior.success).unwrap();
    let pmf = |j: u32| nb.pmf(u64::from(j - prior.shift));
    let below: f64 = (prior.shift..d).map(pmf).sum();
    pmf(d) / (1.0 - below)
}

pub fn palette3() -> RegimePalette {
    RegimePalette::new(&[(0.9, 0.08), (0.5, 0.2), (0.1, 0.08)]).unwrap()
}

pub fn random_counts<G: Rng>(rng: &mut G, sites: usize, samples: usize) -> (Vec<u32>, Vec<u32>) {
    let n: Vec<u32> = (0..sites * samples).map(|_| rng.random_range(0..9)).collect();
    let y = n.iter().map(|&n| rng.random_range(0..=n)).collect();
    (y, n)
}

pub fn random_single_group<G: Rng>(rng: &mut G) -> SingleGroupParams {
    let r = 3;
    let theta: Vec<f64> = (0..r * r).map(|_| rng.random_range(-1.5..1.5)).collect();
    let shifts = (0..r).map(|_| rng.random_range(1..=3)).collect();
    let sizes = (0..r).map(|_| rng.random_range(0.5..3.0)).collect();
    SingleGroupParams::new(palette3(), theta, shifts, sizes).unwrap()
}

pub fn random_case_control<G: Rng>(rng: &mut G) -> CaseControlParams {
    let control = random_single_group(rng);
    let case = SojournPrior::new(rng.random_range(1..=2), rng.random_range(1.0..3.0), rng.random_range(0.2..0.9)).unwrap();
    CaseControlParams::new(
        control,
        rng.random_range(0.05..0.5),
        rng.random_range(0.05..0.5),
        rng.random_range(0..=2),
        case,
    )
    .unwrap()
}

/// Literal single-group transition probability.
pub fn single_transition(next: &SingleGroupState, cur: Option<&SingleGroupState>, params: &SingleGroupParams) -> f64 {
    let r = params.n_regimes();
    let (p, omega) = unpack_params(params.theta(), r).unwrap();
    match cur {
        None => {
            if next.sojourn == 1 {
                1.0 / r as f64
            } else {
                0.0
            }
        }
        Some(cur) => {
            let prior = SojournPrior::new(params.shifts()[cur.regime], params.sizes()[cur.regime], omega[cur.regime]).unwrap();
            let rho = literal_hazard(&prior, cur.sojourn);
            if next.sojourn == cur.sojourn + 1 && next.regime == cur.regime {
                1.0 - rho
            } else if next.sojourn == 1 && next.regime != cur.regime {
                rho * p[cur.regime][next.regime]
            } else {
                0.0
            }
        }
    }
}

/// Every single-group path of length `sites` with positive prior mass.
pub fn single_paths(r: usize, sites: usize) -> Vec<Vec<SingleGroupState>> {
    let mut paths: Vec<Vec<SingleGroupState>> = (0..r).map(|q| vec![SingleGroupState::new(1, q)]).collect();
    for _ in 1..sites {
        let mut next = Vec::new();
        for p in &paths {
            let last = *p.last().unwrap();
            let mut cont = p.clone();
            cont.push(SingleGroupState::new(last.sojourn + 1, last.regime));
            next.push(cont);
            for q in (0..r).filter(|&q| q != last.regime) {
                let mut ch = p.clone();
                ch.push(SingleGroupState::new(1, q));
                next.push(ch);
            }
        }
        paths = next;
    }
    paths
}

/// Exact single-group quantities by path enumeration.
#[derive(Debug, Clone)]
pub struct SingleExact {
    pub log_likelihood: f64,
    /// `p(d_t, r_t | y_{1:t})` per site.
    pub filter: Vec<HashMap<SingleGroupState, f64>>,
    /// `p(r_t = q | y_{1:T})`, site-major.
    pub smooth: Vec<Vec<f64>>,
    /// `∇_θ log p(y_{1:T})` via Fisher's identity.
    pub score: Vec<f64>,
}

fn path_weight(path: &[SingleGroupState], pot: &LogPotentials, params: &SingleGroupParams) -> f64 {
    let mut w = single_transition(&path[0], None, params) * pot.site(0)[path[0].regime].exp();
    for t in 1..path.len() {
        w *= single_transition(&path[t], Some(&path[t - 1]), params) * pot.site(t)[path[t].regime].exp();
    }
    w
}

pub fn single_log_likelihood(params: &SingleGroupParams, pot: &LogPotentials) -> f64 {
    single_paths(params.n_regimes(), pot.sites())
        .iter()
        .map(|p| path_weight(p, pot, params))
        .sum::<f64>()
        .ln()
}

pub fn single_exact(params: &SingleGroupParams, pot: &LogPotentials) -> SingleExact {
    let r = params.n_regimes();
    let sites = pot.sites();
    let mut filter = Vec::with_capacity(sites);
    for t in 0..sites {
        let prefix = LogPotentials::from_values(r, (0..=t).flat_map(|s| pot.site(s).to_vec()).collect());
        let mut m: HashMap<SingleGroupState, f64> = HashMap::new();
        let mut total = 0.0;
        for p in single_paths(r, t + 1) {
            let w = path_weight(&p, &prefix, params);
            total += w;
            *m.entry(p[t]).or_default() += w;
        }
        m.values_mut().for_each(|v| *v /= total);
        filter.push(m);
    }
    let paths = single_paths(r, sites);
    let weights: Vec<f64> = paths.iter().map(|p| path_weight(p, pot, params)).collect();
    let total: f64 = weights.iter().sum();
    let mut smooth = vec![vec![0.0; r]; sites];
    let mut score = vec![0.0; params.dim()];
    for (p, &w) in paths.iter().zip(&weights) {
        let post = w / total;
        if post == 0.0 {
            continue;
        }
        for t in 0..sites {
            smooth[t][p[t].regime] += post;
        }
        for t in 1..sites {
            for (s, g) in score.iter_mut().zip(grad_log_transition(&p[t], &p[t - 1], params)) {
                *s += post * g;
            }
        }
    }
    SingleExact {
        log_likelihood: total.ln(),
        filter,
        smooth,
        score,
    }
}

/// Literal case–control transition probability, configuration by
/// configuration. `cur = None` gives the initial law.
pub fn paired_transition(next: &PairedState, cur: Option<&PairedState>, params: &CaseControlParams) -> f64 {
    let r = params.n_regimes();
    let rf = r as f64;
    if next.merged && next.case != next.control {
        return 0.0;
    }
    if !next.merged && next.case.regime == next.control.regime {
        return 0.0;
    }
    let (qs, qm) = (params.q_split(), params.q_merge());
    let Some(cur) = cur else {
        if next.control.sojourn != 1 || next.case.sojourn != 1 {
            return 0.0;
        }
        let p_split = qs / (qs + qm);
        let control = 1.0 / rf;
        return if next.merged {
            (1.0 - p_split) * control
        } else {
            p_split * control / (rf - 1.0)
        };
    };
    let q = if cur.control.sojourn.min(cur.case.sojourn) >= params.min_z_gap() {
        match (cur.merged, next.merged) {
            (false, false) => 1.0 - qm,
            (false, true) => qm,
            (true, false) => qs,
            (true, true) => 1.0 - qs,
        }
    } else if cur.merged == next.merged {
        1.0
    } else {
        0.0
    };
    let control = single_transition(&next.control, Some(&cur.control), params.control());
    let rc_next = next.control.regime;
    let case_prior = params.case_prior();
    let case_kernel = |from: &SingleGroupState| {
        let rho = literal_hazard(case_prior, from.sojourn);
        if next.case.sojourn == from.sojourn + 1 && next.case.regime == from.regime {
            1.0 - rho
        } else if next.case.sojourn == 1 && next.case.regime != from.regime && next.case.regime != rc_next {
            rho / (rf - 2.0)
        } else {
            0.0
        }
    };
    let case = if next.merged {
        1.0
    } else if !cur.merged && rc_next != cur.case.regime {
        case_kernel(&cur.case)
    } else if !cur.merged {
        // forced change: the new case regime avoids the shared regime only
        if next.case.sojourn == 1 && next.case.regime != cur.case.regime {
            1.0 / (rf - 1.0)
        } else {
            0.0
        }
    } else if next.control.sojourn != 1 {
        if next.case.sojourn == 1 {
            1.0 / (rf - 1.0)
        } else {
            0.0
        }
    } else {
        case_kernel(&cur.case)
    };
    q * control * case
}

/// All structurally valid paired states with both sojourns at most `max_d`.
pub fn paired_states(r: usize, max_d: u32) -> Vec<PairedState> {
    let mut out = Vec::new();
    for dc in 1..=max_d {
        for rc in 0..r {
            out.push(PairedState::merged(dc, rc));
            for dk in 1..=max_d {
                for rk in (0..r).filter(|&k| k != rc) {
                    out.push(PairedState::split(SingleGroupState::new(dc, rc), SingleGroupState::new(dk, rk)));
                }
            }
        }
    }
    out
}

fn paired_potential(x: &PairedState, control: &LogPotentials, case: &LogPotentials, t: usize) -> f64 {
    (control.site(t)[x.control.regime] + case.site(t)[x.case.regime]).exp()
}

/// Exact filtering distributions over packed states and the log-likelihood,
/// by a forward pass over the full product state space.
pub fn paired_exact_filter(
    params: &CaseControlParams,
    control: &LogPotentials,
    case: &LogPotentials,
) -> (Vec<HashMap<u64, f64>>, f64) {
    let r = params.n_regimes();
    let sites = control.sites();
    let mut out: Vec<HashMap<u64, f64>> = Vec::with_capacity(sites);
    let mut log_lik = 0.0;
    let mut prev: Vec<(PairedState, f64)> = Vec::new();
    for t in 0..sites {
        let mut cur: Vec<(PairedState, f64)> = Vec::new();
        for x in paired_states(r, t as u32 + 1) {
            let prior = if t == 0 {
                paired_transition(&x, None, params)
            } else {
                prev.iter().map(|(p, w)| w * paired_transition(&x, Some(p), params)).sum()
            };
            let w = prior * paired_potential(&x, control, case, t);
            if w > 0.0 {
                cur.push((x, w));
            }
        }
        let total: f64 = cur.iter().map(|c| c.1).sum();
        log_lik += total.ln();
        cur.iter_mut().for_each(|c| c.1 /= total);
        out.push(cur.iter().map(|(x, w)| (x.pack(), *w)).collect());
        prev = cur;
    }
    (out, log_lik)
}

/// Posterior probability of every paired path with positive mass.
pub fn paired_exact_paths(
    params: &CaseControlParams,
    control: &LogPotentials,
    case: &LogPotentials,
) -> HashMap<Vec<u64>, f64> {
    let r = params.n_regimes();
    let sites = control.sites();
    let mut paths: Vec<(Vec<PairedState>, f64)> = paired_states(r, 1)
        .into_iter()
        .map(|x| {
            let w = paired_transition(&x, None, params) * paired_potential(&x, control, case, 0);
            (vec![x], w)
        })
        .filter(|p| p.1 > 0.0)
        .collect();
    for t in 1..sites {
        let states = paired_states(r, t as u32 + 1);
        let mut next = Vec::new();
        for (p, w) in &paths {
            let last = p.last().unwrap();
            for x in &states {
                let f = paired_transition(x, Some(last), params);
                if f > 0.0 {
                    let mut q = p.clone();
                    q.push(*x);
                    next.push((q, w * f * paired_potential(x, control, case, t)));
                }
            }
        }
        paths = next;
    }
    let total: f64 = paths.iter().map(|p| p.1).sum();
    paths
        .into_iter()
        .map(|(p, w)| (p.iter().map(PairedState::pack).collect(), w / total))
        .collect()
}
