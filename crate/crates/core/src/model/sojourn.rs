use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Shifted negative-binomial prior on the sojourn length `d`:
/// `h(d) = NegBin(d - shift; size, success)` for `d >= shift`, zero below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SojournPrior {
    pub shift: u32,
    pub size: f64,
    pub success: f64,
}

/// Largest tail length used when seeding the backward hazard recurrence.
const MAX_TAIL: usize = 4_000_000;

impl SojournPrior {
    pub fn new(shift: u32, size: f64, success: f64) -> Result<Self> {
        if shift < 1 {
            return Err(Error::Domain("sojourn shift must be at least 1".into()));
        }
        if !(size > 0.0 && size.is_finite()) {
            return Err(Error::Domain(format!("sojourn size must be positive, got {size}")));
        }
        if !(success > 0.0 && success < 1.0) {
            return Err(Error::Domain(format!(
                "sojourn success probability must lie in (0, 1), got {success}"
            )));
        }
        Ok(Self {
            shift,
            size,
            success,
        })
    }

    /// `log h(d)`; `-inf` below the shift.
    pub fn log_pmf(&self, d: u32) -> f64 {
        if d < self.shift {
            return f64::NEG_INFINITY;
        }
        let z = f64::from(d - self.shift);
        let (k, w) = (self.size, self.success);
        ln_gamma(z + k) - ln_gamma(k) - ln_gamma(z + 1.0) + z * w.ln() + k * (-w).ln_1p()
    }

    /// Hazards `rho(shift + z)` for `z = 0..=z_max`.
    ///
    /// With `T(z) = S(z) / h(z)` and `h(z+1)/h(z) = w (z+k)/(z+1)` we have
    /// `T(z) = 1 + w (z+k)/(z+1) T(z+1)` and `rho = 1/T`. The recurrence is
    /// run backwards from a point far enough in the tail that the seed error
    /// has decayed below double precision, so survival mass never has to be
    /// represented explicitly and nothing underflows.
    fn hazard_run(&self, z_max: usize) -> Vec<f64> {
        let (k, w) = (self.size, self.success);
        let decay = -w.ln();
        let tail = if decay > 0.0 {
            ((40.0 / decay).ceil() as usize).saturating_add(32).min(MAX_TAIL)
        } else {
            MAX_TAIL
        };
        // Ratios fall below one only once z(1-w) > wk - 1.
        let contraction_start = ((w * k - 1.0) / (1.0 - w)).max(0.0).ceil() as usize + 1;
        let start = z_max + tail.max(contraction_start.saturating_sub(z_max) + tail / 2);
        let ratio = |z: usize| w * (z as f64 + k) / (z as f64 + 1.0);
        let r0 = ratio(start);
        let mut t = if r0 < 1.0 { 1.0 / (1.0 - r0) } else { 1.0 / (1.0 - w) };
        let mut out = vec![0.0; z_max + 1];
        for z in (0..start).rev() {
            t = 1.0 + ratio(z) * t;
            if z <= z_max {
                out[z] = (1.0 / t).clamp(0.0, 1.0);
            }
        }
        out
    }

    /// Precomputes hazards and their log-derivatives for `d < shift + z_max + 1`.
    pub fn hazard_table(&self, z_max: usize) -> HazardTable {
        let rho = self.hazard_run(z_max + 1);
        HazardTable::from_rho(*self, rho)
    }
}

/// `rho(d) = h(d) / (1 - H(d-1))`, the probability that a change point ends
/// a segment that has lasted `d` sites.
pub fn sojourn_hazard(d: u32, prior: &SojournPrior) -> f64 {
    if d < prior.shift {
        return 0.0;
    }
    let z = (d - prior.shift) as usize;
    prior.hazard_run(z)[z]
}

/// Cached hazards for one sojourn prior, indexed by `z = d - shift`, with
/// derivatives with respect to `logit(success)`.
///
/// Lookups beyond the cached range fall back to a direct evaluation.
#[derive(Debug, Clone)]
pub struct HazardTable {
    prior: SojournPrior,
    rho: Vec<f64>,
    log_rho: Vec<f64>,
    log_surv: Vec<f64>,
    dlog_rho: Vec<f64>,
    dlog_surv: Vec<f64>,
}

/// Hazard quantities at one sojourn length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazardPoint {
    pub rho: f64,
    pub log_rho: f64,
    /// `log(1 - rho)`.
    pub log_surv: f64,
    /// d/dθ of `log rho`, θ = logit(success).
    pub dlog_rho: f64,
    /// d/dθ of `log(1 - rho)`.
    pub dlog_surv: f64,
}

impl HazardPoint {
    const BELOW_SHIFT: HazardPoint = HazardPoint {
        rho: 0.0,
        log_rho: f64::NEG_INFINITY,
        log_surv: 0.0,
        dlog_rho: 0.0,
        dlog_surv: 0.0,
    };
}

impl HazardTable {
    fn from_rho(prior: SojournPrior, rho: Vec<f64>) -> Self {
        // rho holds z = 0..=n; derivative of log(1 - rho) at z needs z + 1.
        let n = rho.len() - 1;
        let (k, w) = (prior.size, prior.success);
        let mut log_rho = Vec::with_capacity(n);
        let mut log_surv = Vec::with_capacity(n);
        let mut dlog_rho = Vec::with_capacity(n);
        let mut dlog_surv = Vec::with_capacity(n);
        for z in 0..n {
            let zf = z as f64;
            log_rho.push(rho[z].ln());
            log_surv.push((-rho[z]).ln_1p());
            // d log S(z) = z rho(z); d log h(z) = z - w (z + k).
            dlog_rho.push(zf - w * (zf + k) - zf * rho[z]);
            dlog_surv.push((zf + 1.0) * rho[z + 1] - zf * rho[z]);
        }
        let mut rho = rho;
        rho.truncate(n);
        Self {
            prior,
            rho,
            log_rho,
            log_surv,
            dlog_rho,
            dlog_surv,
        }
    }

    pub fn prior(&self) -> &SojournPrior {
        &self.prior
    }

    /// Number of cached sojourn offsets.
    pub fn cached(&self) -> usize {
        self.rho.len()
    }

    #[inline]
    pub fn rho(&self, d: u32) -> f64 {
        if d < self.prior.shift {
            return 0.0;
        }
        let z = (d - self.prior.shift) as usize;
        match self.rho.get(z) {
            Some(&r) => r,
            None => self.point_slow(z).rho,
        }
    }

    #[inline]
    pub fn log_surv(&self, d: u32) -> f64 {
        if d < self.prior.shift {
            return 0.0;
        }
        let z = (d - self.prior.shift) as usize;
        match self.log_surv.get(z) {
            Some(&r) => r,
            None => self.point_slow(z).log_surv,
        }
    }

    #[inline]
    pub fn log_rho(&self, d: u32) -> f64 {
        if d < self.prior.shift {
            return f64::NEG_INFINITY;
        }
        let z = (d - self.prior.shift) as usize;
        match self.log_rho.get(z) {
            Some(&r) => r,
            None => self.point_slow(z).log_rho,
        }
    }

    /// All hazard quantities at sojourn `d`.
    pub fn point(&self, d: u32) -> HazardPoint {
        if d < self.prior.shift {
            return HazardPoint::BELOW_SHIFT;
        }
        let z = (d - self.prior.shift) as usize;
        if z < self.rho.len() {
            HazardPoint {
                rho: self.rho[z],
                log_rho: self.log_rho[z],
                log_surv: self.log_surv[z],
                dlog_rho: self.dlog_rho[z],
                dlog_surv: self.dlog_surv[z],
            }
        } else {
            self.point_slow(z)
        }
    }

    #[cold]
    fn point_slow(&self, z: usize) -> HazardPoint {
        let run = self.prior.hazard_run(z + 1);
        let (k, w) = (self.prior.size, self.prior.success);
        let zf = z as f64;
        let rho = run[z];
        HazardPoint {
            rho,
            log_rho: rho.ln(),
            log_surv: (-rho).ln_1p(),
            dlog_rho: zf - w * (zf + k) - zf * rho,
            dlog_surv: (zf + 1.0) * run[z + 1] - zf * rho,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// rho(d) from the definition h(d) / (1 - H(d-1)). Near the shift the
    /// CDF form is used directly; further out the survival mass is summed
    /// from the tail to avoid cancellation.
    fn literal_hazard(d: u32, p: &SojournPrior) -> f64 {
        let h = p.log_pmf(d).exp();
        if d < p.shift + 3 {
            let cdf: f64 = (1..d).map(|i| p.log_pmf(i).exp()).sum();
            return h / (1.0 - cdf);
        }
        let tail: f64 = (d..d + 20_000).map(|i| p.log_pmf(i).exp()).sum();
        h / tail
    }

    #[test]
    fn hazard_examples() {
        let p = SojournPrior::new(3, 2.0, 0.5).unwrap();
        assert_eq!(sojourn_hazard(2, &p), 0.0);
        assert!((sojourn_hazard(3, &p) - 0.25).abs() < 1e-14);
        assert!((sojourn_hazard(4, &p) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn log_h_derivative_at_shift() {
        // d/dθ log h(u) = 0 - w (0 + k) with w = 0.5, k = 2.
        let p = SojournPrior::new(3, 2.0, 0.5).unwrap();
        let t = p.hazard_table(8);
        // At z = 0, d log rho = d log h since S(0) = 1.
        assert!((t.point(3).dlog_rho - (-1.0)).abs() < 1e-14);
    }

    #[test]
    fn table_matches_literal_definition() {
        for &(u, k, w) in &[(1, 2.0, 0.8), (3, 1.3, 0.6), (5, 2.7, 0.95), (2, 0.5, 0.2)] {
            let p = SojournPrior::new(u, k, w).unwrap();
            let t = p.hazard_table(30);
            for d in 1..(u + 25) {
                let lit = literal_hazard(d, &p);
                assert!((t.rho(d) - lit).abs() < 1e-10 * lit.max(1e-3), "d={d} {} vs {lit}", t.rho(d));
            }
        }
    }

    #[test]
    fn slow_path_matches_table() {
        let p = SojournPrior::new(3, 2.0, 0.8).unwrap();
        let small = p.hazard_table(4);
        let big = p.hazard_table(400);
        for d in [3, 7, 20, 150, 390] {
            let (a, b) = (small.point(d), big.point(d));
            assert!((a.rho - b.rho).abs() < 1e-14);
            assert!((a.dlog_surv - b.dlog_surv).abs() < 1e-10);
            assert!((a.dlog_rho - b.dlog_rho).abs() < 1e-10);
        }
    }

    #[test]
    fn extreme_sojourns_stay_proper() {
        let p = SojournPrior::new(3, 2.0, 0.5).unwrap();
        let r = sojourn_hazard(1_000_000, &p);
        assert!(r > 0.0 && r <= 1.0);
        // Hazard tends to 1 - w for long segments.
        assert!((r - 0.5).abs() < 1e-5);
    }

    fn with_logit(p: &SojournPrior, delta: f64) -> SojournPrior {
        let th = crate::math::logit(p.success) + delta;
        SojournPrior::new(p.shift, p.size, crate::math::sigmoid(th)).unwrap()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for &(u, k, w) in &[(3, 2.0, 0.5), (1, 1.5, 0.8), (4, 2.5, 0.3)] {
            let p = SojournPrior::new(u, k, w).unwrap();
            let t = p.hazard_table(40);
            let tp = with_logit(&p, h).hazard_table(40);
            let tm = with_logit(&p, -h).hazard_table(40);
            for d in u..u + 30 {
                let fd_rho = (tp.log_rho(d) - tm.log_rho(d)) / (2.0 * h);
                let fd_surv = (tp.log_surv(d) - tm.log_surv(d)) / (2.0 * h);
                let pt = t.point(d);
                assert!((pt.dlog_rho - fd_rho).abs() < 1e-6 * fd_rho.abs().max(1.0));
                assert!((pt.dlog_surv - fd_surv).abs() < 1e-6 * fd_surv.abs().max(1.0));
            }
        }
    }

    #[test]
    fn survival_derivative_matches_finite_sum() {
        // d/dθ log(1 - rho(d)) = d/dθ [log S(z+1) - log S(z)], with
        // S(z) = 1 - sum_{i<z} h(i) and d h(i) = h(i) (i - w(i + k)).
        let p = SojournPrior::new(2, 2.0, 0.7).unwrap();
        let t = p.hazard_table(30);
        let (k, w) = (p.size, p.success);
        let h = |i: u32| p.log_pmf(i + p.shift).exp();
        let dh = |i: u32| h(i) * (f64::from(i) - w * (f64::from(i) + k));
        let s = |z: u32| 1.0 - (0..z).map(h).sum::<f64>();
        let ds = |z: u32| -(0..z).map(dh).sum::<f64>();
        for z in 0..20u32 {
            let expected = ds(z + 1) / s(z + 1) - ds(z) / s(z);
            let got = t.point(z + p.shift).dlog_surv;
            assert!((got - expected).abs() < 1e-9, "z={z}: {got} vs {expected}");
        }
    }

    #[test]
    fn rejects_invalid_priors() {
        assert!(SojournPrior::new(0, 2.0, 0.5).is_err());
        assert!(SojournPrior::new(3, 0.0, 0.5).is_err());
        assert!(SojournPrior::new(3, 2.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn hazard_in_unit_interval(u in 1u32..8, k in 0.2f64..5.0, w in 0.01f64..0.99, d in 1u32..200) {
            let p = SojournPrior::new(u, k, w).unwrap();
            let r = sojourn_hazard(d, &p);
            prop_assert!((0.0..=1.0).contains(&r));
            if d < u {
                prop_assert_eq!(r, 0.0);
            }
        }
    }
}
