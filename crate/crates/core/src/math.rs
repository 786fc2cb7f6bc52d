//! Small numeric helpers shared across the filters.

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log of the sum of exponentials; `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Turns log weights into normalised weights.
///
/// Returns the normalising constant in log space, or `None` when every
/// weight is zero (or the input is empty).
pub fn normalize_log_weights(log_w: &[f64], out: &mut Vec<f64>) -> Option<f64> {
    let lse = log_sum_exp(log_w);
    if !lse.is_finite() {
        return None;
    }
    out.clear();
    out.extend(log_w.iter().map(|&v| (v - lse).exp()));
    Some(lse)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Index of the category selected by `u ∈ [0, 1)` under the cumulative
/// weights `cumulative` (last entry is the total mass).
pub fn pick_cumulative(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().expect("non-empty cumulative weights");
    let target = u * total;
    // First index whose cumulative mass strictly exceeds the target, so that
    // zero-mass categories are never chosen.
    let idx = cumulative.partition_point(|&c| c <= target);
    idx.min(cumulative.len() - 1)
}

/// Seed for an independent random stream derived from `base` and a stream
/// index (splitmix64 finaliser).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let v = [0.1f64.ln(), 0.2f64.ln(), 0.7f64.ln()];
        assert!((log_sum_exp(&v)).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((log_add_exp(-1000.0, -1000.0) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_inverts_logit() {
        for &p in &[1e-9, 0.1, 0.5, 0.8, 0.999] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn pick_skips_zero_mass() {
        let cum = [0.0, 0.5, 0.5, 1.0];
        assert_eq!(pick_cumulative(&cum, 0.0), 1);
        assert_eq!(pick_cumulative(&cum, 0.49), 1);
        assert_eq!(pick_cumulative(&cum, 0.5), 3);
        assert_eq!(pick_cumulative(&cum, 0.999), 3);
    }
}
