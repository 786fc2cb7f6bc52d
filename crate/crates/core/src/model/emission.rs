use statrs::function::gamma::ln_gamma;

use super::regime::RegimePalette;
use crate::error::{Error, Result};

/// Read counts of one group at one site: `methylated[s] <= total[s]`,
/// `total[s] == 0` marks a missing sample.
#[derive(Debug, Clone, Copy)]
pub struct SiteCounts<'a> {
    pub methylated: &'a [u32],
    pub total: &'a [u32],
}

impl<'a> SiteCounts<'a> {
    pub fn new(methylated: &'a [u32], total: &'a [u32]) -> Result<Self> {
        if methylated.len() != total.len() {
            return Err(Error::Domain(format!(
                "{} methylated counts but {} totals",
                methylated.len(),
                total.len()
            )));
        }
        if let Some(s) = (0..total.len()).find(|&s| methylated[s] > total[s]) {
            return Err(Error::Domain(format!(
                "sample {s}: methylated count {} exceeds total {}",
                methylated[s], total[s]
            )));
        }
        Ok(Self { methylated, total })
    }

    pub fn is_missing(&self) -> bool {
        self.total.iter().all(|&n| n == 0)
    }
}

/// Read counts of one group over a run of sites, row-major `T × samples`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountMatrix {
    samples: usize,
    methylated: Vec<u32>,
    total: Vec<u32>,
}

impl CountMatrix {
    pub fn new(samples: usize, methylated: Vec<u32>, total: Vec<u32>) -> Result<Self> {
        if samples == 0 || methylated.len() != total.len() || !total.len().is_multiple_of(samples) {
            return Err(Error::Domain(
                "count arrays do not form a sites × samples table".into(),
            ));
        }
        if let Some(i) = (0..total.len()).find(|&i| methylated[i] > total[i]) {
            return Err(Error::Domain(format!(
                "site {}, sample {}: methylated count {} exceeds total {}",
                i / samples,
                i % samples,
                methylated[i],
                total[i]
            )));
        }
        Ok(Self { samples, methylated, total })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn sites(&self) -> usize {
        self.total.len() / self.samples
    }

    pub fn methylated(&self) -> &[u32] {
        &self.methylated
    }

    pub fn total(&self) -> &[u32] {
        &self.total
    }

    #[inline]
    pub fn site(&self, t: usize) -> SiteCounts<'_> {
        let r = t * self.samples..(t + 1) * self.samples;
        SiteCounts {
            methylated: &self.methylated[r.clone()],
            total: &self.total[r],
        }
    }

    /// Copy of the sites in `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let r = range.start * self.samples..range.end * self.samples;
        Self {
            samples: self.samples,
            methylated: self.methylated[r.clone()].to_vec(),
            total: self.total[r].to_vec(),
        }
    }

    pub fn log_potentials(&self, palette: &RegimePalette) -> Result<LogPotentials> {
        LogPotentials::from_counts(&self.methylated, &self.total, self.samples, palette)
    }
}

#[inline]
fn ln_choose(n: u32, k: u32) -> f64 {
    ln_gamma(f64::from(n) + 1.0) - ln_gamma(f64::from(k) + 1.0) - ln_gamma(f64::from(n - k) + 1.0)
}

#[inline]
fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log-probability of `y` successes out of `n` under a beta-binomial law.
pub fn beta_binomial_log_pmf(y: u32, n: u32, a: f64, b: f64) -> Result<f64> {
    if y > n {
        return Err(Error::Domain(format!("y = {y} exceeds n = {n}")));
    }
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("shapes must be positive, got ({a}, {b})")));
    }
    Ok(bb_log_pmf(y, n, a, b, ln_beta(a, b)))
}

#[inline]
fn bb_log_pmf(y: u32, n: u32, a: f64, b: f64, ln_beta_ab: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    ln_choose(n, y) + ln_beta(f64::from(y) + a, f64::from(n - y) + b) - ln_beta_ab
}

/// Log emission potential of a site under one regime (zero-based index):
/// the sum of the per-sample beta-binomial terms. Missing samples add 0.
pub fn site_log_potential(counts: &SiteCounts<'_>, regime: usize, palette: &RegimePalette) -> f64 {
    let spec = palette.get(regime);
    let lb = ln_beta(spec.shape_a, spec.shape_b);
    counts
        .methylated
        .iter()
        .zip(counts.total)
        .map(|(&y, &n)| bb_log_pmf(y, n, spec.shape_a, spec.shape_b, lb))
        .sum()
}

/// Site-by-regime table of log potentials for one group, row-major `T × R`.
///
/// Potentials do not depend on the fitted transition parameters, so they are
/// computed once per dataset and reused by every pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPotentials {
    regimes: usize,
    values: Vec<f64>,
}

impl LogPotentials {
    /// Evaluates every site; `methylated` and `total` are row-major
    /// `T × samples` arrays.
    pub fn from_counts(
        methylated: &[u32],
        total: &[u32],
        samples: usize,
        palette: &RegimePalette,
    ) -> Result<Self> {
        if methylated.len() != total.len() || samples == 0 || !total.len().is_multiple_of(samples) {
            return Err(Error::Domain(
                "count arrays do not form a sites × samples table".into(),
            ));
        }
        let r = palette.len();
        let lbs: Vec<f64> = palette.iter().map(|s| ln_beta(s.shape_a, s.shape_b)).collect();
        let sites = total.len() / samples;
        let mut values = vec![0.0; sites * r];
        for t in 0..sites {
            let row = &mut values[t * r..(t + 1) * r];
            for s in 0..samples {
                let (y, n) = (methylated[t * samples + s], total[t * samples + s]);
                if n == 0 {
                    continue;
                }
                if y > n {
                    return Err(Error::Domain(format!(
                        "site {t}, sample {s}: methylated count {y} exceeds total {n}"
                    )));
                }
                let choose = ln_choose(n, y);
                for (q, spec) in palette.iter().enumerate() {
                    row[q] += choose
                        + ln_beta(f64::from(y) + spec.shape_a, f64::from(n - y) + spec.shape_b)
                        - lbs[q];
                }
            }
        }
        Ok(Self { regimes: r, values })
    }

    /// Wraps precomputed values (row-major `T × R`).
    pub fn from_values(regimes: usize, values: Vec<f64>) -> Self {
        assert!(regimes > 0 && values.len().is_multiple_of(regimes));
        Self { regimes, values }
    }

    pub fn sites(&self) -> usize {
        self.values.len() / self.regimes
    }

    pub fn regimes(&self) -> usize {
        self.regimes
    }

    #[inline]
    pub fn site(&self, t: usize) -> &[f64] {
        &self.values[t * self.regimes..(t + 1) * self.regimes]
    }
}
