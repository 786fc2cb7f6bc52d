use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{RegimePalette, SingleGroupParams, SojournPrior};
use crate::paired::{CaseControlParams, PairedRunConfig};
use crate::single::{FitConfig, OptimizerKind};
use crate::testing::Signal;

/// Every knob of an analysis run, as a flat key/value record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub palette_means: Vec<f64>,
    pub palette_sds: Vec<f64>,
    /// Particles of the single-group filter.
    pub fit_particles: usize,
    /// Particles of the case–control filter.
    pub filter_particles: usize,
    pub backward_samples: usize,
    pub runs: usize,
    pub smoothing_epsilon: f64,
    pub max_lag: Option<usize>,
    pub step_size: f64,
    pub decay_rate: f64,
    pub decay_updates: f64,
    pub update_interval: usize,
    pub passes: usize,
    pub optimizer: OptimizerKind,
    /// Minimum sojourn `u_r`, shared by all control regimes.
    pub sojourn_shift: u32,
    /// Negative-binomial size `κ_r`, shared by all control regimes.
    pub sojourn_size: f64,
    pub q_split: f64,
    pub q_merge: f64,
    pub case_success: f64,
    pub case_shift: u32,
    pub case_size: f64,
    pub z_min_gap: u32,
    pub alpha: f64,
    pub gamma: Vec<f64>,
    pub region_threshold: f64,
    pub seed: u64,
    pub signals: Vec<Signal>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let palette = RegimePalette::default_six().moments();
        let fit = FitConfig::default();
        let paired = PairedRunConfig::default();
        Self {
            palette_means: palette.iter().map(|m| m.0).collect(),
            palette_sds: palette.iter().map(|m| m.1).collect(),
            fit_particles: fit.particles,
            filter_particles: paired.particles,
            backward_samples: paired.backward,
            runs: paired.runs,
            smoothing_epsilon: fit.epsilon,
            max_lag: fit.max_lag,
            step_size: fit.step_size,
            decay_rate: fit.decay_rate,
            decay_updates: fit.decay_updates,
            update_interval: fit.update_interval,
            passes: fit.passes,
            optimizer: fit.optimizer,
            sojourn_shift: 3,
            sojourn_size: 2.0,
            q_split: 0.01,
            q_merge: 0.1,
            case_success: 0.8,
            case_shift: 3,
            case_size: 2.0,
            z_min_gap: 0,
            alpha: 0.01,
            gamma: vec![0.5, 0.99],
            region_threshold: 0.99,
            seed: 1,
            signals: vec![Signal::RegimeDiff, Signal::MeanDiff],
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Applies `key=value` overrides; values are read as TOML and fall back
    /// to plain strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(&self.to_toml()).expect("round trip");
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{item}' is not key=value")))?;
            let key = key.trim().replace('-', "_");
            let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
            table.insert(key, value);
        }
        Self::from_toml(&toml::to_string(&table).expect("table serialises"))
    }

    /// Hex SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.palette_means.len() != self.palette_sds.len() {
            return bad("palette_means and palette_sds differ in length".into());
        }
        self.palette()?;
        self.fit_config().validate()?;
        if self.filter_particles == 0 || self.backward_samples == 0 || self.runs == 0 {
            return bad("filter_particles, backward_samples and runs must be positive".into());
        }
        if self.sojourn_shift == 0 || self.case_shift == 0 {
            return bad("sojourn shifts must be at least 1".into());
        }
        if !(self.sojourn_size > 0.0 && self.case_size > 0.0) {
            return bad("sojourn sizes must be positive".into());
        }
        for (name, v) in [("q_split", self.q_split), ("q_merge", self.q_merge), ("case_success", self.case_success)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} = {v} outside (0, 1)"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} outside (0, 1)", self.alpha));
        }
        if let Some(g) = self.gamma.iter().find(|g| !(0.0..1.0).contains(*g)) {
            return bad(format!("gamma = {g} outside [0, 1)"));
        }
        if !(self.region_threshold > 0.0 && self.region_threshold < 1.0) {
            return bad(format!("region_threshold = {} outside (0, 1)", self.region_threshold));
        }
        Ok(())
    }

    pub fn palette(&self) -> Result<RegimePalette> {
        let moments: Vec<(f64, f64)> = self.palette_means.iter().copied().zip(self.palette_sds.iter().copied()).collect();
        RegimePalette::new(&moments).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            particles: self.fit_particles,
            epsilon: self.smoothing_epsilon,
            max_lag: self.max_lag,
            step_size: self.step_size,
            decay_rate: self.decay_rate,
            decay_updates: self.decay_updates,
            update_interval: self.update_interval,
            passes: self.passes,
            optimizer: self.optimizer,
        }
    }

    pub fn paired_config(&self) -> PairedRunConfig {
        PairedRunConfig {
            particles: self.filter_particles,
            backward: self.backward_samples,
            runs: self.runs,
        }
    }

    /// Starting point of the single-group fit.
    pub fn initial_params(&self) -> Result<SingleGroupParams> {
        SingleGroupParams::uniform(self.palette()?, self.sojourn_shift, self.sojourn_size)
    }

    pub fn case_control(&self, control: SingleGroupParams) -> Result<CaseControlParams> {
        let case = SojournPrior::new(self.case_shift, self.case_size, self.case_success)?;
        CaseControlParams::new(control, self.q_split, self.q_merge, self.z_min_gap, case)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), c);
        assert_eq!((c.fit_particles, c.filter_particles, c.backward_samples, c.runs), (100, 50, 25, 10));
        assert_eq!((c.q_split, c.q_merge, c.case_success, c.case_shift), (0.01, 0.1, 0.8, 3));
    }

    #[test]
    fn overrides() {
        let c = RunConfig::default()
            .with_overrides(&["runs=3", "optimizer=sgd", "signals=[\"split\"]", "filter-particles = 7"])
            .unwrap();
        assert_eq!(c.runs, 3);
        assert_eq!(c.filter_particles, 7);
        assert_eq!(c.optimizer, OptimizerKind::Sgd);
        assert_eq!(c.signals, vec![Signal::Split]);
        assert!(RunConfig::default().with_overrides(&["nonsense=1"]).is_err());
        assert!(RunConfig::default().with_overrides(&["alpha=2"]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = a.with_overrides(&["seed=2"]).unwrap();
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
