//! Site-by-site beta-binomial Wald test without spatial pooling, used as a
//! reference point for the model-based procedures.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::CountMatrix;

/// Largest overdispersion the moment estimator may return.
const MAX_DISPERSION: f64 = 0.99;

/// Moment estimate of the intra-class correlation `φ` shared by all sites
/// and groups, where `Var(y) = nμ(1-μ)(1 + (n-1)φ)`.
pub fn estimate_dispersion(groups: &[&CountMatrix]) -> f64 {
    let (mut ss, mut a_sum, mut b_sum) = (0.0, 0.0, 0.0);
    for g in groups {
        for t in 0..g.sites() {
            let c = g.site(t);
            let n_tot: f64 = c.total.iter().map(|&n| f64::from(n)).sum();
            if n_tot == 0.0 {
                continue;
            }
            let y_tot: f64 = c.methylated.iter().map(|&y| f64::from(y)).sum();
            let mu = y_tot / n_tot;
            let v = mu * (1.0 - mu);
            if v <= 0.0 {
                continue;
            }
            let c2: f64 = c.total.iter().map(|&n| (f64::from(n) / n_tot).powi(2)).sum();
            for (&y, &n) in c.methylated.iter().zip(c.total) {
                let (y, n) = (f64::from(y), f64::from(n));
                let f = 1.0 - 2.0 * n / n_tot + c2;
                ss += (y - n * mu).powi(2) / v;
                a_sum += n * f;
                b_sum += n * (n - 1.0) * f;
            }
        }
    }
    if b_sum <= 0.0 {
        return 0.0;
    }
    ((ss - a_sum) / b_sum).clamp(0.0, MAX_DISPERSION)
}

/// Two-sided p-values of the Wald test for equal methylation levels at each
/// site. Sites where either group has no reads get p = 1.
pub fn wald_pvalues(control: &CountMatrix, case: &CountMatrix, dispersion: f64) -> Result<Vec<f64>> {
    if control.sites() != case.sites() {
        return Err(Error::Domain(format!(
            "{} control sites but {} case sites",
            control.sites(),
            case.sites()
        )));
    }
    if !(0.0..1.0).contains(&dispersion) {
        return Err(Error::Domain(format!("dispersion {dispersion} outside [0, 1)")));
    }
    let summary = |g: &CountMatrix, t: usize| {
        let c = g.site(t);
        let (mut y, mut n, mut eff) = (0.0, 0.0, 0.0);
        for (&ys, &ns) in c.methylated.iter().zip(c.total) {
            let ns = f64::from(ns);
            y += f64::from(ys);
            n += ns;
            eff += ns * (1.0 + (ns - 1.0) * dispersion);
        }
        (y, n, eff)
    };
    Ok((0..control.sites())
        .map(|t| {
            let (y0, n0, e0) = summary(control, t);
            let (y1, n1, e1) = summary(case, t);
            if n0 == 0.0 || n1 == 0.0 {
                return 1.0;
            }
            let mu = (y0 + y1) / (n0 + n1);
            let var = mu * (1.0 - mu) * (e0 / (n0 * n0) + e1 / (n1 * n1));
            let diff = y0 / n0 - y1 / n1;
            if var <= 0.0 {
                return if diff == 0.0 { 1.0 } else { 0.0 };
            }
            erfc(diff.abs() / (2.0 * var).sqrt())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Beta, Binomial, Distribution};

    fn draw(rng: &mut ChaCha8Rng, sites: usize, samples: usize, a: f64, b: f64, depth: u64) -> CountMatrix {
        let beta = Beta::new(a, b).unwrap();
        let mut y = Vec::new();
        let mut n = Vec::new();
        for _ in 0..sites * samples {
            let nn = rng.random_range(1..=depth);
            let p = beta.sample(rng);
            y.push(Binomial::new(nn, p).unwrap().sample(rng) as u32);
            n.push(nn as u32);
        }
        CountMatrix::new(samples, y, n).unwrap()
    }

    #[test]
    fn recovers_known_dispersion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // φ = 1 / (a + b + 1)
        let (a, b) = (3.0, 5.0);
        let g0 = draw(&mut rng, 4000, 4, a, b, 30);
        let g1 = draw(&mut rng, 4000, 4, a, b, 30);
        let phi = estimate_dispersion(&[&g0, &g1]);
        assert!((phi - 1.0 / 9.0).abs() < 0.01, "phi = {phi}");
    }

    #[test]
    fn binomial_data_gives_small_dispersion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = draw(&mut rng, 4000, 3, 2000.0, 2000.0, 30);
        assert!(estimate_dispersion(&[&g]) < 0.005);
    }

    #[test]
    fn null_pvalues_are_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g0 = draw(&mut rng, 5000, 3, 4.0, 4.0, 25);
        let g1 = draw(&mut rng, 5000, 3, 4.0, 4.0, 25);
        let phi = estimate_dispersion(&[&g0, &g1]);
        let p = wald_pvalues(&g0, &g1, phi).unwrap();
        let frac = p.iter().filter(|&&v| v <= 0.05).count() as f64 / p.len() as f64;
        assert!((0.03..0.08).contains(&frac), "size {frac}");
    }

    #[test]
    fn missing_group_is_uninformative() {
        let a = CountMatrix::new(1, vec![3], vec![5]).unwrap();
        let b = CountMatrix::new(1, vec![0], vec![0]).unwrap();
        assert_eq!(wald_pvalues(&a, &b, 0.1).unwrap(), vec![1.0]);
    }

    #[test]
    fn strong_difference_is_detected() {
        let a = CountMatrix::new(2, vec![30, 29], vec![30, 30]).unwrap();
        let b = CountMatrix::new(2, vec![1, 0], vec![30, 30]).unwrap();
        assert!(wald_pvalues(&a, &b, 0.05).unwrap()[0] < 1e-6);
    }
}
