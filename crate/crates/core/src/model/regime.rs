use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Beta shape parameters `(a, b)` with the given mean and standard deviation.
pub fn regime_shape(mean: f64, sd: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0 && mean < 1.0) {
        return Err(Error::Domain(format!("regime mean {mean} outside (0, 1)")));
    }
    let var_max = mean * (1.0 - mean);
    if !(sd > 0.0 && sd * sd < var_max) {
        return Err(Error::Domain(format!(
            "regime sd {sd} must lie in (0, {}) for mean {mean}",
            var_max.sqrt()
        )));
    }
    let nu = var_max / (sd * sd) - 1.0;
    Ok((mean * nu, (1.0 - mean) * nu))
}

/// One beta emission regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    /// One-based label.
    pub id: usize,
    pub mean: f64,
    pub sd: f64,
    pub shape_a: f64,
    pub shape_b: f64,
}

impl RegimeSpec {
    pub fn new(id: usize, mean: f64, sd: f64) -> Result<Self> {
        let (shape_a, shape_b) = regime_shape(mean, sd)?;
        Ok(Self {
            id,
            mean,
            sd,
            shape_a,
            shape_b,
        })
    }
}

/// The ordered set of regimes. Regimes are addressed by zero-based index in
/// the API; `RegimeSpec::id` keeps the one-based label for output.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePalette {
    regimes: Vec<RegimeSpec>,
}

/// `(mean, sd)` rows used by the simulation study; `None` marks a regime that
/// is absent from that row.
pub const SIMULATION_PALETTES: [[Option<(f64, f64)>; 6]; 10] = {
    const U12: f64 = 0.288_675_134_594_812_9; // 1/sqrt(12)
    const U9: f64 = 1.0 / 3.0;
    [
        [Some((0.95, 0.08)), Some((0.15, 0.08)), Some((0.05, 0.08)), Some((0.85, 0.08)), Some((0.5, 0.08)), Some((0.5, U12))],
        [Some((0.95, 0.1)), Some((0.15, 0.04)), Some((0.05, 0.1)), Some((0.85, 0.04)), Some((0.5, 0.1)), Some((0.5, U12))],
        [Some((0.95, 0.1)), Some((0.2, 0.08)), Some((0.05, 0.1)), Some((0.8, 0.08)), Some((0.5, 0.08)), Some((0.5, U12))],
        [Some((0.95, 0.05)), Some((0.15, 0.05)), Some((0.05, 0.05)), Some((0.85, 0.05)), Some((0.5, 0.08)), Some((0.5, U9))],
        [Some((0.95, 0.05)), Some((0.2, 0.1)), Some((0.05, 0.05)), Some((0.8, 0.1)), Some((0.5, 0.08)), Some((0.5, U9))],
        [Some((0.95, 0.05)), Some((0.2, 0.05)), Some((0.05, 0.05)), Some((0.8, 0.05)), Some((0.5, 0.1)), Some((0.5, U9))],
        [Some((0.95, 0.05)), Some((0.2, 0.05)), Some((0.05, 0.05)), Some((0.8, 0.05)), Some((0.5, 0.05)), Some((0.5, U12))],
        [Some((0.95, 0.05)), Some((0.2, 0.1)), Some((0.05, 0.05)), Some((0.8, 0.1)), Some((0.5, 0.1)), Some((0.5, U12))],
        [Some((0.95, 0.1)), Some((0.25, 0.1)), Some((0.05, 0.1)), Some((0.75, 0.1)), Some((0.5, 0.05)), Some((0.5, U12))],
        [Some((0.95, 0.05)), Some((0.2, 0.1)), Some((0.05, 0.05)), Some((0.8, 0.1)), Some((0.5, 0.1)), None],
    ]
};

impl RegimePalette {
    /// Builds a palette from `(mean, sd)` pairs, labelling them `1..=R`.
    pub fn new(moments: &[(f64, f64)]) -> Result<Self> {
        if moments.len() < 2 {
            return Err(Error::Domain(format!(
                "a palette needs at least 2 regimes, got {}",
                moments.len()
            )));
        }
        if moments.len() > crate::paired::MAX_REGIMES {
            return Err(Error::Domain(format!(
                "at most {} regimes are supported",
                crate::paired::MAX_REGIMES
            )));
        }
        let regimes = moments
            .iter()
            .enumerate()
            .map(|(i, &(m, s))| RegimeSpec::new(i + 1, m, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { regimes })
    }

    /// The six default regimes: very high, very low, high, low and
    /// intermediate methylation, plus a uniform "chaotic" regime.
    pub fn default_six() -> Self {
        Self::new(&[
            (0.95, 0.05),
            (0.05, 0.05),
            (0.8, 0.1),
            (0.2, 0.1),
            (0.5, 0.1),
            (0.5, 1.0 / 12f64.sqrt()),
        ])
        .expect("default palette is admissible")
    }

    /// Row `row` (zero-based, `0..10`) of the simulation palettes.
    pub fn simulation_row(row: usize) -> Result<Self> {
        let spec = SIMULATION_PALETTES
            .get(row)
            .ok_or_else(|| Error::Domain(format!("simulation palette row {row} out of range 0..10")))?;
        let moments: Vec<(f64, f64)> = spec.iter().flatten().copied().collect();
        Self::new(&moments)
    }

    pub fn len(&self) -> usize {
        self.regimes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regimes.is_empty()
    }

    pub fn get(&self, regime: usize) -> &RegimeSpec {
        &self.regimes[regime]
    }

    pub fn iter(&self) -> impl Iterator<Item = &RegimeSpec> {
        self.regimes.iter()
    }

    pub fn moments(&self) -> Vec<(f64, f64)> {
        self.regimes.iter().map(|r| (r.mean, r.sd)).collect()
    }
}
