use super::regime::RegimePalette;
use super::sojourn::{HazardTable, SojournPrior};
use crate::error::{Error, Result};
use crate::math::{logit, sigmoid};

/// Sojourn offsets cached per hazard table; longer segments fall back to a
/// direct evaluation.
const HAZARD_CACHE: usize = 8192;

/// Latent state of the single-group model: sojourn `d >= 1` and zero-based
/// regime index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SingleGroupState {
    pub sojourn: u32,
    pub regime: usize,
}

impl SingleGroupState {
    pub fn new(sojourn: u32, regime: usize) -> Self {
        Self { sojourn, regime }
    }
}

/// Index into θ of the logit for moving from `from` to `to` (`to != from`).
#[inline]
pub(crate) fn transition_index(r: usize, from: usize, to: usize) -> usize {
    debug_assert!(from != to);
    (r - 1) * from + if to < from { to } else { to - 1 }
}

/// Index into θ of the sojourn logit of regime `regime`.
#[inline]
pub(crate) fn sojourn_index(r: usize, regime: usize) -> usize {
    r * (r - 1) + regime
}

fn unpack_flat(theta: &[f64], r: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if r < 2 {
        return Err(Error::Domain(format!("need at least 2 regimes, got {r}")));
    }
    if theta.len() != r * r {
        return Err(Error::Domain(format!(
            "theta has length {} but {r} regimes need {}",
            theta.len(),
            r * r
        )));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("theta contains non-finite values".into()));
    }
    let mut p = vec![0.0; r * r];
    for from in 0..r {
        let logits = &theta[(r - 1) * from..(r - 1) * (from + 1)];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
        for to in (0..r).filter(|&to| to != from) {
            p[from * r + to] = (theta[transition_index(r, from, to)] - max).exp() / denom;
        }
    }
    let omega = (0..r).map(|q| sigmoid(theta[sojourn_index(r, q)])).collect();
    Ok((p, omega))
}

/// Maps θ to the transition matrix (rows = current regime) and the sojourn
/// success probabilities.
///
/// Row `r` of the matrix is a softmax over the `R-1` logits
/// `θ[(R-1)r .. (R-1)(r+1)]` placed on the off-diagonal columns in increasing
/// order; the diagonal is zero. `ω_r = sigmoid(θ[R(R-1) + r])`.
pub fn unpack_params(theta: &[f64], r: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (p, omega) = unpack_flat(theta, r)?;
    Ok((p.chunks(r).map(|row| row.to_vec()).collect(), omega))
}

/// Parameters of the single-group change-point model together with the
/// quantities derived from θ.
#[derive(Debug, Clone)]
pub struct SingleGroupParams {
    palette: RegimePalette,
    theta: Vec<f64>,
    shifts: Vec<u32>,
    sizes: Vec<f64>,
    initial: Vec<f64>,
    trans: Vec<f64>,
    log_trans: Vec<f64>,
    hazards: Vec<HazardTable>,
}

impl SingleGroupParams {
    /// `shifts` and `sizes` are per regime and stay fixed; θ is the free
    /// parameter. The initial regime distribution is uniform.
    pub fn new(palette: RegimePalette, theta: Vec<f64>, shifts: Vec<u32>, sizes: Vec<f64>) -> Result<Self> {
        let r = palette.len();
        if shifts.len() != r || sizes.len() != r {
            return Err(Error::Domain(format!(
                "expected {r} shifts and sizes, got {} and {}",
                shifts.len(),
                sizes.len()
            )));
        }
        let mut params = Self {
            initial: vec![1.0 / r as f64; r],
            palette,
            theta: Vec::new(),
            shifts,
            sizes,
            trans: Vec::new(),
            log_trans: Vec::new(),
            hazards: Vec::new(),
        };
        params.set_theta(&theta)?;
        Ok(params)
    }

    /// θ = 0 (uniform transitions, ω = 1/2) with a common shift and size.
    pub fn uniform(palette: RegimePalette, shift: u32, size: f64) -> Result<Self> {
        let r = palette.len();
        Self::new(palette, vec![0.0; r * r], vec![shift; r], vec![size; r])
    }

    /// Builds θ from an explicit transition matrix (row-major, zero diagonal,
    /// positive off-diagonal) and sojourn success probabilities.
    pub fn from_matrix(
        palette: RegimePalette,
        matrix: &[f64],
        omega: &[f64],
        shifts: Vec<u32>,
        sizes: Vec<f64>,
    ) -> Result<Self> {
        let r = palette.len();
        if matrix.len() != r * r || omega.len() != r {
            return Err(Error::Domain("matrix or omega has the wrong size".into()));
        }
        let mut theta = vec![0.0; r * r];
        for from in 0..r {
            for to in (0..r).filter(|&to| to != from) {
                theta[transition_index(r, from, to)] = matrix[from * r + to].max(1e-300).ln();
            }
            if !(omega[from] > 0.0 && omega[from] < 1.0) {
                return Err(Error::Domain(format!("omega {} outside (0, 1)", omega[from])));
            }
            theta[sojourn_index(r, from)] = logit(omega[from]);
        }
        Self::new(palette, theta, shifts, sizes)
    }

    /// Replaces θ and refreshes every derived quantity.
    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        let r = self.palette.len();
        let (trans, omega) = unpack_flat(theta, r)?;
        let hazards = (0..r)
            .map(|q| SojournPrior::new(self.shifts[q], self.sizes[q], omega[q]).map(|p| p.hazard_table(HAZARD_CACHE)))
            .collect::<Result<Vec<_>>>()?;
        self.log_trans = trans.iter().map(|p| p.ln()).collect();
        self.trans = trans;
        self.hazards = hazards;
        self.theta = theta.to_vec();
        Ok(())
    }

    pub fn palette(&self) -> &RegimePalette {
        &self.palette
    }

    pub fn n_regimes(&self) -> usize {
        self.palette.len()
    }

    /// Length of θ, `R²`.
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn shifts(&self) -> &[u32] {
        &self.shifts
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn initial_regime_dist(&self) -> &[f64] {
        &self.initial
    }

    /// Row-major transition matrix.
    pub fn transition_matrix(&self) -> &[f64] {
        &self.trans
    }

    #[inline]
    pub fn trans(&self, from: usize, to: usize) -> f64 {
        self.trans[from * self.palette.len() + to]
    }

    #[inline]
    pub fn log_trans(&self, from: usize, to: usize) -> f64 {
        self.log_trans[from * self.palette.len() + to]
    }

    pub fn omega(&self, regime: usize) -> f64 {
        self.hazards[regime].prior().success
    }

    pub fn sojourn_prior(&self, regime: usize) -> &SojournPrior {
        self.hazards[regime].prior()
    }

    #[inline]
    pub fn hazard(&self, regime: usize) -> &HazardTable {
        &self.hazards[regime]
    }

    /// Adds `scale · ∇_θ log P(to | from)` to `out`.
    #[inline]
    pub(crate) fn add_grad_log_trans(&self, from: usize, to: usize, scale: f64, out: &mut [f64]) {
        let r = self.palette.len();
        for c in (0..r).filter(|&c| c != from) {
            let one_hot = if c == to { 1.0 } else { 0.0 };
            out[transition_index(r, from, c)] += scale * (one_hot - self.trans[from * r + c]);
        }
    }
}

/// `log f(next | cur)`; with `cur = None` the initial density
/// `δ_1(d) ν(r)`. Unreachable transitions give `-inf`.
pub fn transition_log_prob(
    next: &SingleGroupState,
    cur: Option<&SingleGroupState>,
    params: &SingleGroupParams,
) -> f64 {
    let r = params.n_regimes();
    if next.regime >= r || next.sojourn == 0 {
        return f64::NEG_INFINITY;
    }
    match cur {
        None => {
            if next.sojourn == 1 {
                params.initial[next.regime].ln()
            } else {
                f64::NEG_INFINITY
            }
        }
        Some(cur) => {
            let table = params.hazard(cur.regime);
            if next.sojourn == cur.sojourn + 1 && next.regime == cur.regime {
                table.log_surv(cur.sojourn)
            } else if next.sojourn == 1 && next.regime != cur.regime {
                table.log_rho(cur.sojourn) + params.log_trans(cur.regime, next.regime)
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// `∇_θ log f(next | cur)` for a reachable transition.
pub fn grad_log_transition(
    next: &SingleGroupState,
    cur: &SingleGroupState,
    params: &SingleGroupParams,
) -> Vec<f64> {
    let mut out = vec![0.0; params.dim()];
    add_grad_log_transition(next, cur, params, 1.0, &mut out);
    out
}

/// Adds `scale · ∇_θ log f(next | cur)` to `out`.
pub(crate) fn add_grad_log_transition(
    next: &SingleGroupState,
    cur: &SingleGroupState,
    params: &SingleGroupParams,
    scale: f64,
    out: &mut [f64],
) {
    let r = params.n_regimes();
    let point = params.hazard(cur.regime).point(cur.sojourn);
    let w_idx = sojourn_index(r, cur.regime);
    if next.regime == cur.regime {
        out[w_idx] += scale * point.dlog_surv;
    } else {
        out[w_idx] += scale * point.dlog_rho;
        params.add_grad_log_trans(cur.regime, next.regime, scale, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn palette3() -> RegimePalette {
        RegimePalette::new(&[(0.9, 0.05), (0.1, 0.05), (0.5, 0.2)]).unwrap()
    }

    #[test]
    fn zero_theta_unpacks_uniformly() {
        let (p, w) = unpack_params(&[0.0; 9], 3).unwrap();
        for (i, row) in p.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 0.0 } else { 0.5 });
            }
        }
        assert!(w.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn two_regimes_always_swap() {
        let (p, _) = unpack_params(&[3.0, -1.0, 0.2, 0.7], 2).unwrap();
        assert_eq!(p, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn hand_softmax() {
        let mut theta = vec![0.0; 9];
        theta[0] = 1f64.ln();
        theta[1] = 3f64.ln();
        let (p, _) = unpack_params(&theta, 3).unwrap();
        assert!((p[0][1] - 0.25).abs() < 1e-15);
        assert!((p[0][2] - 0.75).abs() < 1e-15);
        assert!(unpack_params(&theta, 2).is_err());
    }

    #[test]
    fn transition_examples() {
        // shift 3, size 2, ω = 0.5: ρ(3) = 0.25; uniform rows: P = 0.5.
        let params = SingleGroupParams::uniform(palette3(), 3, 2.0).unwrap();
        let cur = SingleGroupState::new(3, 0);
        let cont = transition_log_prob(&SingleGroupState::new(4, 0), Some(&cur), &params);
        assert!((cont - 0.75f64.ln()).abs() < 1e-14);
        let chg = transition_log_prob(&SingleGroupState::new(1, 2), Some(&cur), &params);
        assert!((chg - 0.125f64.ln()).abs() < 1e-14);
        let jump = transition_log_prob(&SingleGroupState::new(5, 0), Some(&SingleGroupState::new(2, 0)), &params);
        assert_eq!(jump, f64::NEG_INFINITY);
        let init = transition_log_prob(&SingleGroupState::new(1, 1), None, &params);
        assert!((init - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert_eq!(transition_log_prob(&SingleGroupState::new(2, 1), None, &params), f64::NEG_INFINITY);
    }

    #[test]
    fn two_regime_transition_block_vanishes() {
        let pal = RegimePalette::new(&[(0.9, 0.05), (0.1, 0.05)]).unwrap();
        let params = SingleGroupParams::new(pal, vec![0.3, -0.2, 0.4, 1.1], vec![1, 1], vec![2.0, 2.0]).unwrap();
        let g = grad_log_transition(&SingleGroupState::new(1, 1), &SingleGroupState::new(4, 0), &params);
        assert_eq!(&g[..2], &[0.0, 0.0]);
        assert!(g[2] != 0.0);
    }

    fn random_params(rng: &mut ChaCha8Rng, r: usize) -> SingleGroupParams {
        let moments: Vec<(f64, f64)> = (0..r).map(|i| (0.1 + 0.8 * i as f64 / r as f64, 0.05)).collect();
        let theta: Vec<f64> = (0..r * r).map(|_| rng.random_range(-2.0..2.0)).collect();
        let shifts: Vec<u32> = (0..r).map(|_| rng.random_range(1..4)).collect();
        let sizes: Vec<f64> = (0..r).map(|_| rng.random_range(0.5..3.0)).collect();
        SingleGroupParams::new(RegimePalette::new(&moments).unwrap(), theta, shifts, sizes).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        for _ in 0..20 {
            let r = rng.random_range(2..5);
            let params = random_params(&mut rng, r);
            let cur = SingleGroupState::new(rng.random_range(1..12), rng.random_range(0..r));
            let mut nexts = vec![SingleGroupState::new(cur.sojourn + 1, cur.regime)];
            if cur.sojourn >= params.shifts()[cur.regime] {
                nexts.extend((0..r).filter(|&q| q != cur.regime).map(|q| SingleGroupState::new(1, q)));
            }
            for next in nexts {
                let g = grad_log_transition(&next, &cur, &params);
                for i in 0..params.dim() {
                    let mut tp = params.theta().to_vec();
                    tp[i] += h;
                    let mut tm = params.theta().to_vec();
                    tm[i] -= h;
                    let mut pp = params.clone();
                    pp.set_theta(&tp).unwrap();
                    let mut pm = params.clone();
                    pm.set_theta(&tm).unwrap();
                    let fd = (transition_log_prob(&next, Some(&cur), &pp) - transition_log_prob(&next, Some(&cur), &pm))
                        / (2.0 * h);
                    let tol = 1e-5 * fd.abs().max(1e-2);
                    assert!((g[i] - fd).abs() < tol, "component {i}: {} vs {fd}", g[i]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn transitions_normalise(seed in 0u64..10_000, d in 1u32..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = rng.random_range(2..6);
            let params = random_params(&mut rng, r);
            let cur = SingleGroupState::new(d, rng.random_range(0..r));
            let mut total = transition_log_prob(&SingleGroupState::new(d + 1, cur.regime), Some(&cur), &params).exp();
            for q in 0..r {
                total += transition_log_prob(&SingleGroupState::new(1, q), Some(&cur), &params).exp();
            }
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rows_are_stochastic(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = rng.random_range(2..7);
            let theta: Vec<f64> = (0..r * r).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (p, w) = unpack_params(&theta, r).unwrap();
            for (i, row) in p.iter().enumerate() {
                prop_assert_eq!(row[i], 0.0);
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            prop_assert!(w.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}
