/// Realised error statistics of a decision vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    /// Weighted false discoveries.
    pub v: f64,
    /// Weighted rejections.
    pub r: f64,
    /// Weighted missed signals (`b` weights).
    pub u: f64,
    /// Weighted true discoveries.
    pub tp: f64,
    /// `V / max(R, 1)`.
    pub fdp: f64,
    /// `U / |H1|_b`, zero without signals.
    pub fnp: f64,
}

/// Scores `reject` against the true signal indicators. `a` weights
/// rejections (false and true discoveries), `b` weights missed signals.
pub fn score_decisions(reject: &[bool], truth: &[bool], a: &[f64], b: &[f64]) -> Score {
    assert_eq!(reject.len(), truth.len());
    assert_eq!(reject.len(), a.len());
    assert_eq!(reject.len(), b.len());
    let (mut v, mut r, mut u, mut tp, mut h1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..reject.len() {
        if reject[i] {
            r += a[i];
            if truth[i] {
                tp += a[i];
            } else {
                v += a[i];
            }
        }
        if truth[i] {
            h1 += b[i];
            if !reject[i] {
                u += b[i];
            }
        }
    }
    Score {
        v,
        r,
        u,
        tp,
        fdp: v / r.max(1.0),
        fnp: if h1 > 0.0 { u / h1 } else { 0.0 },
    }
}
