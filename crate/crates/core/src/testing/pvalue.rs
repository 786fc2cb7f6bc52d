use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stepup::DecisionSet;
use crate::error::Error;

/// Classical corrections for per-site p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PValueMethod {
    Bonferroni,
    BenjaminiHochberg,
    BenjaminiYekutieli,
    /// Benjamini–Hochberg with a Storey-type null proportion estimate.
    AdaptiveBH,
}

/// Tuning parameter of the null proportion estimate.
const STOREY_LAMBDA: f64 = 0.5;

impl PValueMethod {
    pub const ALL: [PValueMethod; 4] = [
        PValueMethod::Bonferroni,
        PValueMethod::BenjaminiHochberg,
        PValueMethod::BenjaminiYekutieli,
        PValueMethod::AdaptiveBH,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PValueMethod::Bonferroni => "bonf",
            PValueMethod::BenjaminiHochberg => "bh",
            PValueMethod::BenjaminiYekutieli => "by",
            PValueMethod::AdaptiveBH => "abh",
        }
    }
}

impl fmt::Display for PValueMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PValueMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PValueMethod::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown p-value method '{s}'")))
    }
}

/// Storey's estimate of the null proportion, capped at one.
pub(crate) fn null_proportion(p: &[f64]) -> f64 {
    let t = p.len() as f64;
    let above = p.iter().filter(|&&v| v > STOREY_LAMBDA).count() as f64;
    ((1.0 + above) / (t * (1.0 - STOREY_LAMBDA))).min(1.0)
}

/// Rejects `P_(1..k)` where `k` is the largest rank with `P_(k) <= c_k`.
/// The critical values are `α/T` (Bonferroni), `kα/T` (BH),
/// `kα/(T Σ_{i≤T} 1/i)` (BY) and `kα/(π̂₀ T)` (adaptive BH).
pub fn pvalue_adjust(p: &[f64], method: PValueMethod, alpha: f64) -> DecisionSet {
    let n = p.len();
    let t = n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let scale = match method {
        PValueMethod::Bonferroni | PValueMethod::BenjaminiHochberg => 1.0,
        PValueMethod::BenjaminiYekutieli => (1..=n).map(|i| 1.0 / i as f64).sum::<f64>(),
        PValueMethod::AdaptiveBH => {
            if n == 0 {
                1.0
            } else {
                null_proportion(p)
            }
        }
    };
    let critical = |k: usize| match method {
        PValueMethod::Bonferroni => alpha / t,
        _ => k as f64 * alpha / (scale * t),
    };
    let mut k = 0;
    for (j, &i) in order.iter().enumerate() {
        if p[i] <= critical(j + 1) {
            k = j + 1;
        }
    }
    let mut reject = vec![false; n];
    for &i in &order[..k] {
        reject[i] = true;
    }
    DecisionSet {
        reject,
        n_rejected: k,
        estimated_fdr: 0.0,
    }
}
