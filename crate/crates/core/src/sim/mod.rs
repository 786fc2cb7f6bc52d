//! Synthetic case–control datasets drawn from the model prior.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::model::{CountMatrix, RegimePalette, SingleGroupParams, SojournPrior};
use crate::paired::{
    enumerate_initial, expand_successors, packed, paired_transition_log_prob, CaseControlParams,
    PairedState,
};
use crate::testing::Signal;

/// Settings of one simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub sites: usize,
    pub samples: usize,
    /// Mean read depth per sample and site.
    pub depth: f64,
    /// Zero-based row of [`crate::model::SIMULATION_PALETTES`].
    pub palette_row: usize,
    pub seed: u64,
    /// Odd indices swap the roles of the two groups.
    pub dataset_index: u64,
    pub chromosome: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sites: 10_000,
            samples: 4,
            depth: 10.0,
            palette_row: 0,
            seed: 1,
            dataset_index: 0,
            chromosome: "chr1".into(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 || self.samples == 0 {
            return Err(Error::Config("sites and samples must be positive".into()));
        }
        if !(self.depth >= 0.0 && self.depth.is_finite()) {
            return Err(Error::Config(format!("depth {} must be finite and nonnegative", self.depth)));
        }
        Ok(())
    }
}

/// Parameters of the data-generating prior.
#[derive(Debug, Clone, PartialEq)]
pub struct SimHyperparams {
    pub shifts: Vec<u32>,
    /// Negative-binomial size shared by all regimes and the case group.
    pub size: f64,
    pub omega: Vec<f64>,
    /// Row-major transition matrix with zero diagonal.
    pub matrix: Vec<f64>,
    pub q_split: f64,
    pub q_merge: f64,
    pub case_success: f64,
    pub case_shift: u32,
    pub min_z_gap: u32,
}

const CONTROL_SUCCESS: f64 = 0.8;
const CASE_SHIFT: u32 = 3;
const DIRICHLET_CONCENTRATION: f64 = 2.0 / 3.0;

fn log_uniform<G: Rng + ?Sized>(rng: &mut G, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

/// Draws the prior parameters for `regimes` regimes.
pub fn sample_hyperparams<G: Rng + ?Sized>(regimes: usize, rng: &mut G) -> SimHyperparams {
    let shifts = (0..regimes).map(|_| rng.random_range(3.0..=6.0f64).round() as u32).collect();
    let q_merge = log_uniform(rng, 0.01, 0.5);
    let q_split = log_uniform(rng, 0.001, 0.05);
    let size = rng.random_range(1.0..=3.0);
    let case_success = rng.random_range(0.6..=0.99);
    let gamma = Gamma::new(DIRICHLET_CONCENTRATION, 1.0).expect("valid gamma shape");
    let mut matrix = vec![0.0; regimes * regimes];
    for from in 0..regimes {
        let row = &mut matrix[from * regimes..(from + 1) * regimes];
        loop {
            for (to, v) in row.iter_mut().enumerate() {
                *v = if to == from { 0.0 } else { gamma.sample(rng) };
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 && row.iter().enumerate().all(|(to, &v)| to == from || v > 0.0) {
                row.iter_mut().for_each(|v| *v /= total);
                break;
            }
        }
    }
    SimHyperparams {
        shifts,
        size,
        omega: vec![CONTROL_SUCCESS; regimes],
        matrix,
        q_split,
        q_merge,
        case_success,
        case_shift: CASE_SHIFT,
        min_z_gap: 0,
    }
}

impl SimHyperparams {
    pub fn case_control(&self, palette: &RegimePalette) -> Result<CaseControlParams> {
        let r = palette.len();
        let control = SingleGroupParams::from_matrix(
            palette.clone(),
            &self.matrix,
            &self.omega,
            self.shifts.clone(),
            vec![self.size; r],
        )?;
        let case = SojournPrior::new(self.case_shift, self.size, self.case_success)?;
        CaseControlParams::new(control, self.q_split, self.q_merge, self.min_z_gap, case)
    }
}

fn draw_log_categorical<G: Rng + ?Sized>(items: &[(u64, f64)], rng: &mut G) -> u64 {
    let max = items.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = items.iter().map(|p| (p.1 - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for &(code, lp) in items {
        u -= (lp - max).exp();
        if u < 0.0 {
            return code;
        }
    }
    items.last().expect("nonempty support").0
}

/// Forward simulation of the paired prior; packed state codes per site.
pub fn sample_path<G: Rng + ?Sized>(params: &CaseControlParams, sites: usize, rng: &mut G) -> Vec<u64> {
    let mut path = Vec::with_capacity(sites);
    if sites == 0 {
        return path;
    }
    let initial: Vec<(u64, f64)> = enumerate_initial(params.n_regimes())
        .iter()
        .map(|x| (x.pack(), paired_transition_log_prob(x, None, params)))
        .filter(|p| p.1 > f64::NEG_INFINITY)
        .collect();
    let mut code = draw_log_categorical(&initial, rng);
    path.push(code);
    let mut buf = Vec::new();
    for _ in 1..sites {
        buf.clear();
        expand_successors(code, params, &mut buf);
        code = draw_log_categorical(&buf, rng);
        path.push(code);
    }
    path
}

/// Exchanges the control and case substates of a packed state.
pub fn swap_roles(code: u64) -> u64 {
    if packed::z(code) {
        return code;
    }
    let x = PairedState::unpack(code);
    PairedState::split(x.case, x.control).pack()
}

/// Beta-binomial read counts for a sequence of regimes. Depths are Poisson;
/// a zero mean depth gives an all-missing table.
pub fn sample_counts<G: Rng + ?Sized>(
    regimes: &[usize],
    palette: &RegimePalette,
    samples: usize,
    depth: f64,
    rng: &mut G,
) -> Result<CountMatrix> {
    let poisson = if depth > 0.0 {
        Some(Poisson::new(depth).map_err(|e| Error::Domain(format!("depth {depth}: {e}")))?)
    } else {
        None
    };
    let betas = palette
        .iter()
        .map(|s| Beta::new(s.shape_a, s.shape_b).map_err(|e| Error::Domain(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut y = Vec::with_capacity(regimes.len() * samples);
    let mut n = Vec::with_capacity(regimes.len() * samples);
    for &q in regimes {
        for _ in 0..samples {
            let total = poisson.as_ref().map_or(0, |p| p.sample(rng) as u64);
            let meth = if total == 0 {
                0
            } else {
                let p = betas[q].sample(rng);
                Binomial::new(total, p).expect("probability in [0, 1]").sample(rng)
            };
            y.push(meth as u32);
            n.push(total as u32);
        }
    }
    CountMatrix::new(samples, y, n)
}

/// A simulated dataset with its latent truth.
#[derive(Debug, Clone)]
pub struct SimDataset {
    pub config: SimConfig,
    pub palette: RegimePalette,
    pub hyper: SimHyperparams,
    /// Latent path as seen by the emitted groups (after role switching).
    pub path: Vec<u64>,
    pub control: CountMatrix,
    pub case: CountMatrix,
}

impl SimDataset {
    /// Per-site signal labels recomputed from the path.
    pub fn truth(&self, signal: Signal) -> Vec<bool> {
        self.path.iter().map(|&c| signal.eval_code(c, &self.palette)).collect()
    }

    pub fn control_regimes(&self) -> Vec<usize> {
        self.path.iter().map(|&c| packed::control_regime(c)).collect()
    }

    pub fn case_regimes(&self) -> Vec<usize> {
        self.path.iter().map(|&c| packed::case_regime(c)).collect()
    }
}

/// Draws a full dataset; deterministic in `seed ^ dataset_index`.
pub fn simulate_dataset(config: &SimConfig) -> Result<SimDataset> {
    config.validate()?;
    let palette = RegimePalette::simulation_row(config.palette_row)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ config.dataset_index);
    let hyper = sample_hyperparams(palette.len(), &mut rng);
    let params = hyper.case_control(&palette)?;
    let mut path = sample_path(&params, config.sites, &mut rng);
    if config.dataset_index % 2 == 1 {
        path.iter_mut().for_each(|c| *c = swap_roles(*c));
    }
    let rc: Vec<usize> = path.iter().map(|&c| packed::control_regime(c)).collect();
    let rk: Vec<usize> = path.iter().map(|&c| packed::case_regime(c)).collect();
    let control = sample_counts(&rc, &palette, config.samples, config.depth, &mut rng)?;
    let case = sample_counts(&rk, &palette, config.samples, config.depth, &mut rng)?;
    Ok(SimDataset {
        config: config.clone(),
        palette,
        hyper,
        path,
        control,
        case,
    })
}

/// Simulates a dataset and writes `control.tsv`, `case.tsv` and `truth.tsv`
/// into `dir`.
pub fn generate_dataset(config: &SimConfig, dir: &Path) -> Result<SimDataset> {
    let data = simulate_dataset(config)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let positions: Vec<u64> = (1..=config.sites as u64).collect();
    let names = |prefix: &str| (1..=config.samples).map(|s| format!("{prefix}{s}")).collect::<Vec<_>>();
    for (file, counts, prefix) in [("control.tsv", &data.control, "control"), ("case.tsv", &data.case, "case")] {
        let table = crate::io::CountTable::single(&config.chromosome, positions.clone(), names(prefix), counts.clone())?;
        crate::io::write_counts(&dir.join(file), &table)?;
    }
    crate::io::write_truth(&dir.join("truth.tsv"), &config.chromosome, &positions, &data.path, &data.palette)?;
    Ok(data)
}
