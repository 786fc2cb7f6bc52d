use super::state::{packed, PairedState};
use crate::error::{Error, Result};
use crate::model::{
    site_log_potential, transition_log_prob, HazardTable, RegimePalette, SingleGroupParams, SiteCounts,
    SojournPrior,
};

const CASE_HAZARD_CACHE: usize = 8192;

/// Parameters of the case–control model.
///
/// The control part is the fitted single-group model. The case group
/// follows its own change-point process while split (`z = 0`), with a
/// regime-independent sojourn prior and uniform regime choices that avoid the
/// control regime. The merge indicator jumps with probabilities `q_split`
/// (merged → split) and `q_merge` (split → merged), but only once both
/// sojourns have reached `min_z_gap`.
#[derive(Debug, Clone)]
pub struct CaseControlParams {
    control: SingleGroupParams,
    q_split: f64,
    q_merge: f64,
    min_z_gap: u32,
    case_hazard: HazardTable,
    /// log Q[z][z'] with index 0 = split, 1 = merged.
    log_q: [[f64; 2]; 2],
    log_initial_z: [f64; 2],
    /// −log(R−1) and −log(R−2).
    log_avoid_one: f64,
    log_avoid_two: f64,
}

impl CaseControlParams {
    pub fn new(
        control: SingleGroupParams,
        q_split: f64,
        q_merge: f64,
        min_z_gap: u32,
        case_prior: SojournPrior,
    ) -> Result<Self> {
        let r = control.n_regimes();
        if r < 3 {
            return Err(Error::Domain(format!(
                "the case–control model needs at least 3 regimes, got {r}"
            )));
        }
        for (name, q) in [("q_split", q_split), ("q_merge", q_merge)] {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Domain(format!("{name} = {q} outside (0, 1)")));
            }
        }
        let p_split = q_split / (q_split + q_merge);
        Ok(Self {
            q_split,
            q_merge,
            min_z_gap,
            case_hazard: case_prior.hazard_table(CASE_HAZARD_CACHE),
            log_q: [
                [(-q_merge).ln_1p(), q_merge.ln()],
                [q_split.ln(), (-q_split).ln_1p()],
            ],
            log_initial_z: [p_split.ln(), (1.0 - p_split).ln()],
            log_avoid_one: -((r - 1) as f64).ln(),
            log_avoid_two: -((r - 2) as f64).ln(),
            control,
        })
    }

    pub fn control(&self) -> &SingleGroupParams {
        &self.control
    }

    pub fn n_regimes(&self) -> usize {
        self.control.n_regimes()
    }

    pub fn palette(&self) -> &RegimePalette {
        self.control.palette()
    }

    pub fn q_split(&self) -> f64 {
        self.q_split
    }

    pub fn q_merge(&self) -> f64 {
        self.q_merge
    }

    pub fn min_z_gap(&self) -> u32 {
        self.min_z_gap
    }

    pub fn case_prior(&self) -> &SojournPrior {
        self.case_hazard.prior()
    }

    /// Probability that the first site is split.
    pub fn initial_split_prob(&self) -> f64 {
        self.log_initial_z[0].exp()
    }

    /// `log Q(z' | x)`; the indicator is frozen until both sojourns reach
    /// the minimum gap.
    #[inline]
    fn log_q(&self, merged: bool, dc: u32, dk: u32, next_merged: bool) -> f64 {
        if dc.min(dk) >= self.min_z_gap {
            self.log_q[usize::from(merged)][usize::from(next_merged)]
        } else if merged == next_merged {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Case change-point kernel while split, with the case regime avoiding
    /// the new control regime `rc_next` (which differs from the current case
    /// regime).
    fn log_case_kernel(&self, next: (u32, usize), cur: (u32, usize), rc_next: usize) -> f64 {
        if next.0 == cur.0 + 1 && next.1 == cur.1 {
            self.case_hazard.log_surv(cur.0)
        } else if next.0 == 1 && next.1 != cur.1 && next.1 != rc_next {
            self.case_hazard.log_rho(cur.0) + self.log_avoid_two
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// `log f(next | cur)` for the case–control model; `cur = None` gives the
/// initial density. Unreachable transitions give `-inf`.
pub fn paired_transition_log_prob(next: &PairedState, cur: Option<&PairedState>, params: &CaseControlParams) -> f64 {
    let r = params.n_regimes();
    if !next.is_valid(r) {
        return f64::NEG_INFINITY;
    }
    let Some(cur) = cur else {
        if next.control.sojourn != 1 || next.case.sojourn != 1 {
            return f64::NEG_INFINITY;
        }
        let control = transition_log_prob(&next.control, None, &params.control);
        let case = if next.merged { 0.0 } else { params.log_avoid_one };
        return params.log_initial_z[usize::from(next.merged)] + control + case;
    };
    let lq = params.log_q(cur.merged, cur.control.sojourn, cur.case.sojourn, next.merged);
    if lq == f64::NEG_INFINITY {
        return lq;
    }
    let lc = transition_log_prob(&next.control, Some(&cur.control), &params.control);
    if lc == f64::NEG_INFINITY {
        return lc;
    }
    let (nk, ck) = (
        (next.case.sojourn, next.case.regime),
        (cur.case.sojourn, cur.case.regime),
    );
    let rc_next = next.control.regime;
    let case = if next.merged {
        // merged: the case substate copies the control substate (validated above)
        0.0
    } else if !cur.merged {
        if rc_next != ck.1 {
            params.log_case_kernel(nk, ck, rc_next)
        } else if nk.0 == 1 && nk.1 != ck.1 {
            // control moved onto the case regime: the case is forced to restart
            params.log_avoid_one
        } else {
            f64::NEG_INFINITY
        }
    } else if next.control.sojourn != 1 {
        // split while the control continues: fresh case segment
        if nk.0 == 1 {
            params.log_avoid_one
        } else {
            f64::NEG_INFINITY
        }
    } else {
        // split at a control change point: the case evolves from the shared
        // substate
        params.log_case_kernel(nk, ck, rc_next)
    };
    lq + lc + case
}

/// Control plus case log potentials of `x` at one site.
pub fn paired_log_potential(
    control: &SiteCounts<'_>,
    case: &SiteCounts<'_>,
    x: &PairedState,
    palette: &RegimePalette,
) -> f64 {
    site_log_potential(control, x.control.regime, palette) + site_log_potential(case, x.case.regime, palette)
}

/// Log-probabilities of the candidates of
/// [`enumerate_successors`](super::enumerate_successors), slot by slot.
pub fn successor_log_probs(x: &PairedState, params: &CaseControlParams) -> Vec<(Option<PairedState>, f64)> {
    super::enumerate_successors(x, params.n_regimes())
        .into_iter()
        .map(|s| {
            let lp = s.map_or(f64::NEG_INFINITY, |s| paired_transition_log_prob(&s, Some(x), params));
            (s, lp)
        })
        .collect()
}

/// Reachable successors of a packed state with their log-probabilities,
/// appended to `out`. Equivalent to filtering [`successor_log_probs`] to
/// finite entries, but evaluated slot by slot without generic dispatch.
pub(crate) fn expand_successors(code: u64, params: &CaseControlParams, out: &mut Vec<(u64, f64)>) {
    let r = params.n_regimes();
    let merged = packed::z(code);
    let (dc, rc) = (packed::control_sojourn(code), packed::control_regime(code));
    let (dk, rk) = (packed::case_sojourn(code), packed::case_regime(code));
    let ctrl = params.control.hazard(rc);
    let c_surv = ctrl.log_surv(dc);
    let c_rho = ctrl.log_rho(dc);
    let k_surv = params.case_hazard.log_surv(dk);
    let k_rho = params.case_hazard.log_rho(dk);
    let lq_same_split = params.log_q(merged, dc, dk, false);
    let lq_merged = params.log_q(merged, dc, dk, true);
    let c_cont = packed::control_bits(dc + 1, rc);
    let mut push = |bits: u64, lp: f64| {
        if lp > f64::NEG_INFINITY {
            out.push((bits, lp));
        }
    };

    // 1: both continue
    if merged {
        push(1 | c_cont | packed::case_bits(dc + 1, rc), lq_merged + c_surv);
    } else {
        push(c_cont | packed::case_bits(dk + 1, rk), lq_same_split + c_surv + k_surv);
        // 2: merge with the continuing control
        push(1 | c_cont | packed::case_bits(dc + 1, rc), lq_merged + c_surv);
    }
    if c_rho > f64::NEG_INFINITY {
        // 3: control change point, case continues
        for rc2 in (0..r).filter(|&q| q != rk && q != rc) {
            push(
                packed::control_bits(1, rc2) | packed::case_bits(dk + 1, rk),
                lq_same_split + c_rho + params.control.log_trans(rc, rc2) + k_surv,
            );
        }
    }
    // 4: case change point, control continues
    if c_surv > f64::NEG_INFINITY {
        for rk2 in (0..r).filter(|&q| q != rc) {
            let case = if merged {
                params.log_avoid_one
            } else if rk2 != rk {
                k_rho + params.log_avoid_two
            } else {
                f64::NEG_INFINITY
            };
            push(c_cont | packed::case_bits(1, rk2), lq_same_split + c_surv + case);
        }
    }
    // 5: joint restarts
    if c_rho > f64::NEG_INFINITY {
        for rc2 in (0..r).filter(|&q| q != rc) {
            let base = c_rho + params.control.log_trans(rc, rc2);
            let cbits = packed::control_bits(1, rc2);
            for rk2 in 0..r {
                if rk2 == rc2 {
                    push(1 | cbits | packed::case_bits(1, rk2), lq_merged + base);
                    continue;
                }
                // A merged state stores the shared substate in both halves,
                // so (dk, rk) is the case substate in either situation.
                let case = if !merged && rc2 == rk {
                    params.log_avoid_one
                } else if rk2 != rk {
                    k_rho + params.log_avoid_two
                } else {
                    f64::NEG_INFINITY
                };
                push(cbits | packed::case_bits(1, rk2), lq_same_split + base + case);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SingleGroupState;
    use crate::paired::enumerate_successors;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn random_params(rng: &mut ChaCha8Rng, r: usize) -> CaseControlParams {
        let moments: Vec<(f64, f64)> = (0..r).map(|i| (0.1 + 0.8 * i as f64 / r as f64, 0.05)).collect();
        let theta: Vec<f64> = (0..r * r).map(|_| rng.random_range(-2.0..2.0)).collect();
        let shifts: Vec<u32> = (0..r).map(|_| rng.random_range(1..4)).collect();
        let sizes: Vec<f64> = (0..r).map(|_| rng.random_range(0.5..3.0)).collect();
        let control =
            SingleGroupParams::new(RegimePalette::new(&moments).unwrap(), theta, shifts, sizes).unwrap();
        let case = SojournPrior::new(rng.random_range(1..4), rng.random_range(0.5..3.0), rng.random_range(0.1..0.95))
            .unwrap();
        CaseControlParams::new(
            control,
            rng.random_range(0.01..0.5),
            rng.random_range(0.01..0.5),
            rng.random_range(0..4),
            case,
        )
        .unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, r: usize, dmax: u32) -> PairedState {
        let dc = rng.random_range(1..=dmax);
        let rc = rng.random_range(0..r);
        if rng.random_bool(0.4) {
            PairedState::merged(dc, rc)
        } else {
            let mut rk = rng.random_range(0..r - 1);
            if rk >= rc {
                rk += 1;
            }
            PairedState::split(SingleGroupState::new(dc, rc), SingleGroupState::new(rng.random_range(1..=dmax), rk))
        }
    }

    /// Every valid state with sojourns up to `dmax`.
    fn all_states(r: usize, dmax: u32) -> Vec<PairedState> {
        let mut out = Vec::new();
        for dc in 1..=dmax {
            for rc in 0..r {
                out.push(PairedState::merged(dc, rc));
                for dk in 1..=dmax {
                    for rk in (0..r).filter(|&q| q != rc) {
                        out.push(PairedState::split(SingleGroupState::new(dc, rc), SingleGroupState::new(dk, rk)));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn merged_continuation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_params(&mut rng, 4);
        let x = PairedState::merged(5, 2);
        let next = PairedState::merged(6, 2);
        let expected = p.control.hazard(2).log_surv(5) + p.log_q(true, 5, 5, true);
        assert!((paired_transition_log_prob(&next, Some(&x), &p) - expected).abs() < 1e-14);
        // merging requires identical substates
        let bad = PairedState {
            merged: true,
            control: SingleGroupState::new(6, 2),
            case: SingleGroupState::new(1, 2),
        };
        assert_eq!(paired_transition_log_prob(&bad, Some(&x), &p), f64::NEG_INFINITY);
    }

    #[test]
    fn two_regimes_rejected() {
        let pal = RegimePalette::new(&[(0.9, 0.05), (0.1, 0.05)]).unwrap();
        let control = SingleGroupParams::uniform(pal, 3, 2.0).unwrap();
        let case = SojournPrior::new(3, 2.0, 0.8).unwrap();
        assert!(CaseControlParams::new(control, 0.01, 0.1, 0, case).is_err());
    }

    #[test]
    fn initial_density_normalises() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for r in 3..6 {
            let p = random_params(&mut rng, r);
            let total: f64 = crate::paired::enumerate_initial(r)
                .iter()
                .map(|x| paired_transition_log_prob(x, None, &p).exp())
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn successors_are_complete_and_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = 3;
        let dmax = 6;
        let universe = all_states(r, dmax + 1);
        for _ in 0..5 {
            let p = random_params(&mut rng, r);
            for x in all_states(r, dmax) {
                let reachable: HashSet<PairedState> = universe
                    .iter()
                    .filter(|y| paired_transition_log_prob(y, Some(&x), &p) > f64::NEG_INFINITY)
                    .copied()
                    .collect();
                let listed: Vec<PairedState> = successor_log_probs(&x, &p)
                    .into_iter()
                    .filter(|(_, lp)| *lp > f64::NEG_INFINITY)
                    .map(|(s, _)| s.unwrap())
                    .collect();
                let listed_set: HashSet<PairedState> = listed.iter().copied().collect();
                assert_eq!(listed.len(), listed_set.len(), "duplicate successor of {x:?}");
                assert_eq!(listed_set, reachable, "successor mismatch for {x:?}");
            }
        }
    }

    #[test]
    fn fast_expansion_matches_generic_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut buf = Vec::new();
        for _ in 0..2000 {
            let r = rng.random_range(3..7);
            let p = random_params(&mut rng, r);
            let x = random_state(&mut rng, r, 8);
            buf.clear();
            expand_successors(x.pack(), &p, &mut buf);
            let generic: Vec<(u64, f64)> = successor_log_probs(&x, &p)
                .into_iter()
                .filter(|(_, lp)| *lp > f64::NEG_INFINITY)
                .map(|(s, lp)| (s.unwrap().pack(), lp))
                .collect();
            assert_eq!(buf.len(), generic.len(), "state {x:?}");
            for ((a, la), (b, lb)) in buf.iter().zip(&generic) {
                assert_eq!(PairedState::unpack(*a), PairedState::unpack(*b), "state {x:?}");
                assert!((la - lb).abs() < 1e-12, "state {x:?}: {la} vs {lb}");
            }
        }
    }

    #[test]
    fn sentinel_slot_for_merged_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_params(&mut rng, 4);
        let slots = successor_log_probs(&PairedState::merged(3, 1), &p);
        assert_eq!(slots.len(), 2 * 4 + 16);
        assert_eq!(slots[1], (None, f64::NEG_INFINITY));
        assert_eq!(enumerate_successors(&PairedState::merged(3, 1), 4)[1], None);
    }

    #[test]
    fn potentials_add_groups() {
        let pal = RegimePalette::default_six();
        let c = SiteCounts::new(&[3], &[10]).unwrap();
        let k = SiteCounts::new(&[9], &[9]).unwrap();
        let x = PairedState::split(SingleGroupState::new(1, 1), SingleGroupState::new(1, 0));
        let expected = site_log_potential(&c, 1, &pal) + site_log_potential(&k, 0, &pal);
        assert!((paired_log_potential(&c, &k, &x, &pal) - expected).abs() < 1e-14);
        let missing = SiteCounts::new(&[0], &[0]).unwrap();
        assert_eq!(paired_log_potential(&missing, &missing, &x, &pal), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn successors_normalise(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = rng.random_range(3..7);
            let p = random_params(&mut rng, r);
            let x = random_state(&mut rng, r, 10);
            let total: f64 = successor_log_probs(&x, &p).iter().map(|(_, lp)| lp.exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "total {}", total);
        }
    }
}
