use crate::model::RegimePalette;
use crate::paired::TrajectorySet;

use super::signal::Signal;

/// Accept/reject decisions with the estimated error rate of the rejected set.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSet {
    pub reject: Vec<bool>,
    pub n_rejected: usize,
    /// Estimated (weighted) mean local fdr of the rejected hypotheses; zero
    /// when nothing is rejected.
    pub estimated_fdr: f64,
}

impl DecisionSet {
    fn from_prefix(n: usize, order: &[usize], k: usize, lfdr: &[f64], weights: Option<&[f64]>) -> Self {
        let mut reject = vec![false; n];
        let (mut num, mut den) = (0.0, 0.0);
        for &i in &order[..k] {
            reject[i] = true;
            let w = weights.map_or(1.0, |w| w[i]);
            num += w * lfdr[i];
            den += w;
        }
        Self {
            reject,
            n_rejected: k,
            estimated_fdr: if den > 0.0 { num / den } else { 0.0 },
        }
    }

    /// Indices of rejected hypotheses in increasing order.
    pub fn rejected(&self) -> Vec<usize> {
        (0..self.reject.len()).filter(|&i| self.reject[i]).collect()
    }
}

/// Indices sorted by increasing key, ties by index.
fn ascending(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    order
}

/// Length of the longest prefix of `order` whose running sum of
/// `term(i)` is nonpositive.
fn longest_prefix(order: &[usize], term: impl Fn(usize) -> f64) -> usize {
    let mut sum = 0.0;
    let mut k = 0;
    for (j, &i) in order.iter().enumerate() {
        sum += term(i);
        if sum <= 0.0 {
            k = j + 1;
        }
    }
    k
}

/// Local fdr per site: the fraction of trajectories without signal.
pub fn site_lfdr(trajs: &TrajectorySet, signal: Signal, palette: &RegimePalette) -> Vec<f64> {
    let k = trajs.count() as f64;
    (0..trajs.sites())
        .map(|t| {
            let null = trajs.site_codes(t).iter().filter(|&&c| !signal.eval_code(c, palette)).count();
            null as f64 / k
        })
        .collect()
}

/// Rejects the `k` hypotheses with the smallest local fdr, where `k` is the
/// largest count whose mean local fdr stays at or below `alpha`.
pub fn stepup(lfdr: &[f64], alpha: f64) -> DecisionSet {
    let order = ascending(lfdr);
    // mean of the first k ≤ α  ⇔  Σ (p − α) ≤ 0
    let k = longest_prefix(&order, |i| lfdr[i] - alpha);
    DecisionSet::from_prefix(lfdr.len(), &order, k, lfdr, None)
}

/// Step-up rule with gains `a` for true discoveries and losses `b` for
/// missed ones. Hypotheses are ranked by
/// `J = a(p − α) / (b(1 − p) + a|p − α|)` and the longest prefix with
/// `Σ a(p − α) ≤ 0` is rejected.
pub fn stepup_weighted(lfdr: &[f64], a: &[f64], b: &[f64], alpha: f64) -> DecisionSet {
    assert_eq!(lfdr.len(), a.len());
    assert_eq!(lfdr.len(), b.len());
    let j: Vec<f64> = (0..lfdr.len())
        .map(|i| {
            let num = a[i] * (lfdr[i] - alpha);
            let den = b[i] * (1.0 - lfdr[i]) + a[i] * (lfdr[i] - alpha).abs();
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect();
    let order = ascending(&j);
    let k = longest_prefix(&order, |i| a[i] * (lfdr[i] - alpha));
    DecisionSet::from_prefix(lfdr.len(), &order, k, lfdr, Some(a))
}

/// Region-level step-up: regions ranked by local fdr, longest prefix whose
/// `w`-weighted mean local fdr is at most `alpha`.
pub fn region_stepup(lfdr: &[f64], w: &[f64], alpha: f64) -> DecisionSet {
    assert_eq!(lfdr.len(), w.len());
    let order = ascending(lfdr);
    let k = longest_prefix(&order, |i| w[i] * (lfdr[i] - alpha));
    DecisionSet::from_prefix(lfdr.len(), &order, k, lfdr, Some(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force: try every k and keep the largest admissible one.
    fn oracle(lfdr: &[f64], alpha: f64) -> Vec<bool> {
        let mut sorted: Vec<(f64, usize)> = lfdr.iter().copied().zip(0..).collect();
        sorted.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
        let mut best = 0;
        for k in 1..=lfdr.len() {
            let mean = sorted[..k].iter().map(|x| x.0).sum::<f64>() / k as f64;
            if mean <= alpha {
                best = k;
            }
        }
        let mut out = vec![false; lfdr.len()];
        for &(_, i) in &sorted[..best] {
            out[i] = true;
        }
        out
    }

    #[test]
    fn hand_example() {
        let d = stepup(&[0.005, 0.02, 0.5], 0.05);
        assert_eq!(d.reject, vec![true, true, false]);
        assert!((d.estimated_fdr - 0.0125).abs() < 1e-15);
        assert_eq!(stepup(&[0.0; 4], 0.01).n_rejected, 4);
        assert_eq!(stepup(&[0.2, 0.3], 0.1).n_rejected, 0);
    }

    #[test]
    fn weighted_single_hypothesis() {
        assert!(stepup_weighted(&[0.01], &[1.0], &[1.0], 0.05).reject[0]);
        assert!(!stepup_weighted(&[0.1], &[1.0], &[1.0], 0.05).reject[0]);
    }

    #[test]
    fn region_hand_example() {
        let d = region_stepup(&[0.001, 0.03], &[1.0, 9.0], 0.01);
        assert_eq!(d.reject, vec![true, false]);
        assert_eq!(region_stepup(&[0.5, 0.3], &[1.0, 2.0], 0.1).n_rejected, 0);
    }

    proptest! {
        #[test]
        fn stepup_matches_oracle(p in proptest::collection::vec(0.0f64..0.2, 1..80), alpha in 0.001f64..0.1) {
            let d = stepup(&p, alpha);
            prop_assert_eq!(&d.reject, &oracle(&p, alpha));
            if d.n_rejected > 0 {
                prop_assert!(d.estimated_fdr <= alpha + 1e-12);
            }
        }

        #[test]
        fn unit_weights_reduce_to_stepup(p in proptest::collection::vec(0.0f64..0.2, 1..80), alpha in 0.001f64..0.1) {
            let ones = vec![1.0; p.len()];
            prop_assert_eq!(stepup_weighted(&p, &ones, &ones, alpha).reject, stepup(&p, alpha).reject.clone());
            prop_assert_eq!(region_stepup(&p, &ones, alpha).reject, stepup(&p, alpha).reject);
        }

        #[test]
        fn weighted_is_scale_invariant(
            rows in proptest::collection::vec((0.0f64..0.3, 0.1f64..3.0, 0.1f64..3.0), 1..60),
            alpha in 0.001f64..0.1,
        ) {
            let p: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let a: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let b: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let a2: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
            let b2: Vec<f64> = b.iter().map(|v| 2.0 * v).collect();
            prop_assert_eq!(stepup_weighted(&p, &a, &b, alpha).reject, stepup_weighted(&p, &a2, &b2, alpha).reject);
        }

        #[test]
        fn monotone_in_alpha(p in proptest::collection::vec(0.0f64..0.2, 1..60), a1 in 0.001f64..0.1, a2 in 0.001f64..0.1) {
            let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
            let w: Vec<f64> = (0..p.len()).map(|i| 1.0 + (i % 5) as f64).collect();
            let (s_lo, s_hi) = (stepup(&p, lo), stepup(&p, hi));
            let (r_lo, r_hi) = (region_stepup(&p, &w, lo), region_stepup(&p, &w, hi));
            for i in 0..p.len() {
                prop_assert!(!s_lo.reject[i] || s_hi.reject[i]);
                prop_assert!(!r_lo.reject[i] || r_hi.reject[i]);
            }
        }

        #[test]
        fn permutation_relabels(p in proptest::collection::vec(0.0f64..0.2, 2..50), alpha in 0.001f64..0.1, shift in 1usize..50) {
            let n = p.len();
            let s = shift % n;
            let rotated: Vec<f64> = (0..n).map(|i| p[(i + s) % n]).collect();
            let d = stepup(&p, alpha);
            let dr = stepup(&rotated, alpha);
            // With distinct values the rejection sets correspond exactly.
            let mut uniq = p.clone();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            prop_assume!(uniq.len() == n);
            for i in 0..n {
                prop_assert_eq!(dr.reject[i], d.reject[(i + s) % n]);
            }
        }
    }
}
