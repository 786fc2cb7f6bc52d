use rand::Rng;
use serde::{Deserialize, Serialize};

use super::filter::{filter_init, filter_step};
use super::gradient::{GradientStats, OptimizerKind, StepSchedule};
use super::smoother::AdaptiveLagSmoother;
use crate::error::{Error, Result};
use crate::model::{LogPotentials, SingleGroupParams};

/// Settings for single-group estimation and smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Particle budget `M`.
    pub particles: usize,
    /// Retirement threshold for the adaptive-lag smoother.
    pub epsilon: f64,
    /// Optional hard cap on the smoothing lag.
    pub max_lag: Option<usize>,
    pub step_size: f64,
    pub decay_rate: f64,
    /// Number of updates over which the step size shrinks by `decay_rate`.
    pub decay_updates: f64,
    /// Sites between parameter updates (`ℓ`).
    pub update_interval: usize,
    /// Estimation passes over the data before the final smoothing pass.
    pub passes: usize,
    pub optimizer: OptimizerKind,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            particles: 100,
            epsilon: 1e-4,
            max_lag: None,
            step_size: 0.01,
            decay_rate: 0.1,
            decay_updates: 2000.0,
            update_interval: 200,
            passes: 2,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("particle budget must be positive".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config("smoothing epsilon must be nonnegative".into()));
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config("step size must be finite and nonnegative".into()));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(Error::Config("decay rate must lie in (0, 1]".into()));
        }
        if !(self.decay_updates > 0.0) {
            return Err(Error::Config("decay_updates must be positive".into()));
        }
        if self.update_interval == 0 {
            return Err(Error::Config("update interval must be positive".into()));
        }
        Ok(())
    }

    fn schedule(&self) -> StepSchedule {
        StepSchedule {
            initial: self.step_size,
            decay_rate: self.decay_rate,
            decay_updates: self.decay_updates,
        }
    }
}

/// Site-by-regime table of smoothed regime probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePosteriors {
    regimes: usize,
    values: Vec<f64>,
}

impl RegimePosteriors {
    pub fn new(sites: usize, regimes: usize) -> Self {
        Self {
            regimes,
            values: vec![0.0; sites * regimes],
        }
    }

    pub fn sites(&self) -> usize {
        self.values.len() / self.regimes
    }

    pub fn regimes(&self) -> usize {
        self.regimes
    }

    pub fn site(&self, t: usize) -> &[f64] {
        &self.values[t * self.regimes..(t + 1) * self.regimes]
    }

    fn set(&mut self, t: usize, probs: &[f64]) {
        self.values[t * self.regimes..(t + 1) * self.regimes].copy_from_slice(probs);
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: SingleGroupParams,
    pub posteriors: RegimePosteriors,
    /// Log-likelihood estimate from the final smoothing pass.
    pub log_likelihood: f64,
    /// Parameter updates performed.
    pub updates: usize,
}

fn estimation_pass<G: Rng + ?Sized>(
    pot: &LogPotentials,
    params: &mut SingleGroupParams,
    stats: &mut GradientStats,
    config: &FitConfig,
    rng: &mut G,
) -> Result<()> {
    let mut cloud = filter_init(pot.site(0), params, 0)?;
    stats.start(&cloud);
    if stats.due(0) {
        let theta = stats.apply(params.theta());
        params.set_theta(&theta)?;
    }
    for t in 1..pot.sites() {
        let next = filter_step(&cloud, pot.site(t), params, config.particles, rng, t)?;
        stats.propagate(&cloud, &next, params);
        cloud = next;
        if stats.due(t) {
            let theta = stats.apply(params.theta());
            params.set_theta(&theta)?;
        }
    }
    Ok(())
}

/// Runs the filter and adaptive-lag smoother once with fixed parameters.
/// Returns the regime posterior table and the log-likelihood estimate.
pub fn smooth_single_group<G: Rng + ?Sized>(
    pot: &LogPotentials,
    params: &SingleGroupParams,
    particles: usize,
    epsilon: f64,
    max_lag: Option<usize>,
    rng: &mut G,
) -> Result<(RegimePosteriors, f64)> {
    let sites = pot.sites();
    let mut post = RegimePosteriors::new(sites, params.n_regimes());
    if sites == 0 {
        return Ok((post, 0.0));
    }
    let mut smoother = AdaptiveLagSmoother::new(params.n_regimes(), epsilon, max_lag);
    let mut cloud = filter_init(pot.site(0), params, 0)?;
    let mut log_lik = cloud.log_evidence;
    for est in smoother.start(&cloud, 0) {
        post.set(est.site, &est.probs);
    }
    for t in 1..sites {
        let next = filter_step(&cloud, pot.site(t), params, particles, rng, t)?;
        log_lik += next.log_evidence;
        for est in smoother.update(&cloud, &next, params, t) {
            post.set(est.site, &est.probs);
        }
        cloud = next;
    }
    for est in smoother.finish(&cloud) {
        post.set(est.site, &est.probs);
    }
    Ok((post, log_lik))
}

/// Estimates θ by online gradient ascent over `config.passes` passes, then
/// smooths the regime indicators under the estimate.
pub fn fit_single_group<G: Rng + ?Sized>(
    pot: &LogPotentials,
    init: SingleGroupParams,
    config: &FitConfig,
    rng: &mut G,
) -> Result<FitResult> {
    config.validate()?;
    if pot.regimes() != init.n_regimes() {
        return Err(Error::Domain(format!(
            "potentials have {} regimes but parameters have {}",
            pot.regimes(),
            init.n_regimes()
        )));
    }
    let mut params = init;
    let mut stats = GradientStats::new(params.dim(), config.update_interval, config.schedule(), config.optimizer);
    if pot.sites() > 0 {
        for _ in 0..config.passes {
            estimation_pass(pot, &mut params, &mut stats, config, rng)?;
        }
    }
    let (posteriors, log_likelihood) =
        smooth_single_group(pot, &params, config.particles, config.epsilon, config.max_lag, rng)?;
    Ok(FitResult {
        params,
        posteriors,
        log_likelihood,
        updates: stats.updates(),
    })
}
