use rand::Rng;

/// Output of [`optimal_resample`].
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    /// Selected particle indices in increasing order.
    pub ancestors: Vec<usize>,
    /// Threshold constant `C`; particles with `C·W >= 1` are kept
    /// deterministically. Infinite when no pruning was needed.
    pub constant: f64,
}

/// Indices sorted by decreasing weight, ties by index.
fn descending(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order
}

/// Solves `Σ min(1, C·W) = M` for `C`, returning `C` and the number of
/// deterministic keeps. Requires more than `m` positive weights.
fn solve_constant(weights: &[f64], order: &[usize], m: usize) -> (f64, usize) {
    let n = order.len();
    let mut tail = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + weights[order[k]];
    }
    let mut kept = 0;
    let mut c = m as f64 / tail[0];
    while kept < m {
        c = (m - kept) as f64 / tail[kept];
        if c * weights[order[kept]] >= 1.0 {
            kept += 1;
        } else {
            break;
        }
    }
    (c, kept)
}

/// The threshold constant `C` for normalised `weights` and target size `m`;
/// infinite when at most `m` weights are positive.
pub fn resample_constant(weights: &[f64], m: usize) -> f64 {
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if positive <= m {
        return f64::INFINITY;
    }
    let order = descending(weights);
    solve_constant(weights, &order, m).0
}

/// Optimal finite-state resampling of `weights` (normalised) down to `m`
/// particles.
///
/// Particles with `C·W >= 1` survive once each; the remaining `L` slots are
/// filled by systematic resampling with probabilities `C·W / L`, so each
/// particle appears with probability `min(1, C·W)`. When no more than `m`
/// weights are positive every positive particle is kept and `C = ∞`.
pub fn optimal_resample<R: Rng + ?Sized>(weights: &[f64], m: usize, rng: &mut R) -> Resampled {
    assert!(m > 0, "resampling target must be positive");
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if positive <= m {
        return Resampled {
            ancestors: (0..weights.len()).filter(|&i| weights[i] > 0.0).collect(),
            constant: f64::INFINITY,
        };
    }
    let order = descending(weights);
    let (c, kept) = solve_constant(weights, &order, m);
    let mut ancestors: Vec<usize> = order[..kept].to_vec();
    let slots = m - kept;
    if slots > 0 {
        let mut rest: Vec<usize> = order[kept..].to_vec();
        rest.sort_unstable();
        let step = 1.0 / slots as f64;
        let mut point = rng.random::<f64>() * step;
        let mut cum = 0.0;
        let mut taken = 0;
        for (j, &i) in rest.iter().enumerate() {
            cum += c * weights[i] * step;
            let last = j + 1 == rest.len();
            if taken < slots && (point < cum || last) {
                ancestors.push(i);
                taken += 1;
                point += step;
            }
        }
    }
    ancestors.sort_unstable();
    Resampled {
        ancestors,
        constant: c,
    }
}
