//! End-to-end analysis: per-chromosome fitting on the control group,
//! posterior path sampling for the case–control model, and pooled testing.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{ChromosomeCounts, CountTable, RegionRow, RunConfig, SiteRow, TruthTable};
use crate::math::derive_seed;
use crate::model::{RegimePalette, SingleGroupParams};
use crate::paired::{sample_posterior_paths, TrajectorySet};
use crate::single::{fit_single_group, FitResult};
use crate::testing::{
    build_regions, region_lfdr, region_signal_fraction, region_stepup, score_decisions, site_lfdr, stepup,
    stepup_weighted, Score, Signal,
};

/// Seed stream of a chromosome, derived from its label so that results do
/// not depend on the order or subset of chromosomes processed.
pub fn chromosome_seed(base: u64, chrom: &str, stage: u64) -> u64 {
    let digest = Sha256::digest(chrom.as_bytes());
    let label = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    derive_seed(derive_seed(base, label), stage)
}

const FIT_STAGE: u64 = 0;
const PAIRED_STAGE: u64 = 1;

/// Fits the single-group model to one chromosome of control counts.
pub fn fit_chromosome(config: &RunConfig, chrom: &ChromosomeCounts) -> Result<FitResult> {
    let run = || -> Result<FitResult> {
        let init = config.initial_params()?;
        let pot = chrom.counts.log_potentials(init.palette())?;
        let mut rng = ChaCha8Rng::seed_from_u64(chromosome_seed(config.seed, &chrom.name, FIT_STAGE));
        fit_single_group(&pot, init, &config.fit_config(), &mut rng)
    };
    run().map_err(|e| e.in_chromosome(&chrom.name))
}

pub fn fit_table(config: &RunConfig, control: &CountTable) -> Result<Vec<FitResult>> {
    control.chromosomes.par_iter().map(|c| fit_chromosome(config, c)).collect()
}

fn check_matching(control: &ChromosomeCounts, case: &ChromosomeCounts) -> Result<()> {
    if control.positions != case.positions {
        return Err(Error::Domain(format!(
            "control and case positions differ on chromosome {}",
            control.name
        )));
    }
    Ok(())
}

/// Samples posterior paths of the case–control model for one chromosome,
/// with the control dynamics fixed at `params`.
pub fn infer_chromosome(
    config: &RunConfig,
    params: &SingleGroupParams,
    control: &ChromosomeCounts,
    case: &ChromosomeCounts,
) -> Result<TrajectorySet> {
    let run = || -> Result<TrajectorySet> {
        check_matching(control, case)?;
        let cc = config.case_control(params.clone())?;
        let cp = control.counts.log_potentials(cc.palette())?;
        let kp = case.counts.log_potentials(cc.palette())?;
        let seed = chromosome_seed(config.seed, &control.name, PAIRED_STAGE);
        sample_posterior_paths(&cp, &kp, &cc, &config.paired_config(), seed)
    };
    run().map_err(|e| e.in_chromosome(&control.name))
}

/// Pairs each control chromosome with the case chromosome of the same name.
pub fn pair_tables<'a>(control: &'a CountTable, case: &'a CountTable) -> Result<Vec<(&'a ChromosomeCounts, &'a ChromosomeCounts)>> {
    if control.chromosomes.len() != case.chromosomes.len() {
        return Err(Error::Domain("control and case tables cover different chromosomes".into()));
    }
    control
        .chromosomes
        .iter()
        .map(|c| {
            case.chromosome(&c.name)
                .map(|k| (c, k))
                .ok_or_else(|| Error::Domain(format!("chromosome {} missing from the case table", c.name)))
        })
        .collect()
}

/// Local fdrs of one signal at every site, pooled over chromosomes and
/// tested jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTest {
    pub signal: Signal,
    /// Per chromosome, per site.
    pub lfdr: Vec<Vec<f64>>,
    pub reject: Vec<Vec<bool>>,
    pub n_rejected: usize,
    pub estimated_fdr: f64,
}

fn split_like<T: Clone>(flat: &[T], lens: &[usize]) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(lens.len());
    let mut at = 0;
    for &l in lens {
        out.push(flat[at..at + l].to_vec());
        at += l;
    }
    out
}

pub fn test_positions(trajs: &[&TrajectorySet], signal: Signal, palette: &RegimePalette, alpha: f64) -> SiteTest {
    let lfdr: Vec<Vec<f64>> = trajs.par_iter().map(|t| site_lfdr(t, signal, palette)).collect();
    let lens: Vec<usize> = lfdr.iter().map(Vec::len).collect();
    let pooled: Vec<f64> = lfdr.concat();
    let d = stepup(&pooled, alpha);
    SiteTest {
        signal,
        reject: split_like(&d.reject, &lens),
        lfdr,
        n_rejected: d.n_rejected,
        estimated_fdr: d.estimated_fdr,
    }
}

/// Region-level test of one signal at tolerance `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTest {
    pub signal: Signal,
    pub gamma: f64,
    /// Per chromosome: site-index ranges, weights, local fdrs and decisions.
    pub regions: Vec<Vec<Range<usize>>>,
    pub weights: Vec<Vec<f64>>,
    pub lfdr: Vec<Vec<f64>>,
    pub reject: Vec<Vec<bool>>,
    pub n_rejected: usize,
    pub estimated_fdr: f64,
}

/// Regions where the posterior probability of the groups being split
/// reaches `threshold` on at least one site run, one per chromosome.
pub fn candidate_regions(trajs: &TrajectorySet, threshold: f64) -> crate::testing::RegionSet {
    let post: Vec<f64> = (0..trajs.sites()).map(|t| trajs.prob_split(t)).collect();
    build_regions(&post, threshold)
}

pub fn test_regions(
    trajs: &[&TrajectorySet],
    signal: Signal,
    palette: &RegimePalette,
    gamma: f64,
    threshold: f64,
    alpha: f64,
) -> Result<RegionTest> {
    let per: Vec<(crate::testing::RegionSet, Vec<f64>)> = trajs
        .par_iter()
        .map(|t| {
            let regions = candidate_regions(t, threshold);
            let lfdr = region_lfdr(t, &regions, gamma, signal, palette)?;
            Ok((regions, lfdr))
        })
        .collect::<Result<_>>()?;
    let lens: Vec<usize> = per.iter().map(|p| p.1.len()).collect();
    let pooled_lfdr: Vec<f64> = per.iter().flat_map(|p| p.1.iter().copied()).collect();
    let pooled_w: Vec<f64> = per.iter().flat_map(|p| p.0.weights.iter().copied()).collect();
    let d = region_stepup(&pooled_lfdr, &pooled_w, alpha);
    Ok(RegionTest {
        signal,
        gamma,
        reject: split_like(&d.reject, &lens),
        weights: per.iter().map(|p| p.0.weights.clone()).collect(),
        regions: per.iter().map(|p| p.0.regions.clone()).collect(),
        lfdr: per.into_iter().map(|p| p.1).collect(),
        n_rejected: d.n_rejected,
        estimated_fdr: d.estimated_fdr,
    })
}

/// Everything an analysis run produces.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub chromosomes: Vec<String>,
    pub positions: Vec<Vec<u64>>,
    pub fits: Vec<FitResult>,
    /// Present when case data were supplied.
    pub trajectories: Option<Vec<TrajectorySet>>,
    pub site_tests: Vec<SiteTest>,
    pub region_tests: Vec<RegionTest>,
}

/// Fits every chromosome on the control group and, given case data,
/// samples posterior paths once and tests every configured signal on them.
pub fn run_pipeline(config: &RunConfig, control: &CountTable, case: Option<&CountTable>) -> Result<ResultBundle> {
    config.validate()?;
    let fits = fit_table(config, control)?;
    let mut bundle = ResultBundle {
        chromosomes: control.chromosomes.iter().map(|c| c.name.clone()).collect(),
        positions: control.chromosomes.iter().map(|c| c.positions.clone()).collect(),
        fits,
        trajectories: None,
        site_tests: Vec::new(),
        region_tests: Vec::new(),
    };
    let Some(case) = case else {
        return Ok(bundle);
    };
    let pairs = pair_tables(control, case)?;
    let trajs: Vec<TrajectorySet> = pairs
        .par_iter()
        .zip(bundle.fits.par_iter())
        .map(|((c, k), fit)| infer_chromosome(config, &fit.params, c, k))
        .collect::<Result<_>>()?;
    let palette = config.palette()?;
    let refs: Vec<&TrajectorySet> = trajs.iter().collect();
    for &signal in &config.signals {
        bundle.site_tests.push(test_positions(&refs, signal, &palette, config.alpha));
        for &gamma in &config.gamma {
            bundle
                .region_tests
                .push(test_regions(&refs, signal, &palette, gamma, config.region_threshold, config.alpha)?);
        }
    }
    bundle.trajectories = Some(trajs);
    Ok(bundle)
}

/// As [`test_positions`], ranking by the weighted rule with per-site
/// weights `a` (discoveries) and `b` (missed signals).
pub fn test_positions_weighted(
    trajs: &[&TrajectorySet],
    signal: Signal,
    palette: &RegimePalette,
    alpha: f64,
    a: &[Vec<f64>],
    b: &[Vec<f64>],
) -> SiteTest {
    let lfdr: Vec<Vec<f64>> = trajs.par_iter().map(|t| site_lfdr(t, signal, palette)).collect();
    let lens: Vec<usize> = lfdr.iter().map(Vec::len).collect();
    let d = stepup_weighted(&lfdr.concat(), &a.concat(), &b.concat(), alpha);
    SiteTest {
        signal,
        reject: split_like(&d.reject, &lens),
        lfdr,
        n_rejected: d.n_rejected,
        estimated_fdr: d.estimated_fdr,
    }
}

fn truth_index(truth: &TruthTable) -> FxHashMap<(&str, u64), usize> {
    truth
        .chrom
        .iter()
        .zip(&truth.positions)
        .enumerate()
        .map(|(i, (c, &p))| ((c.as_str(), p), i))
        .collect()
}

/// Realised error rates of site decisions against simulated truth, one
/// score per signal in order of first appearance.
pub fn score_sites(rows: &[SiteRow], truth: &TruthTable, palette: &RegimePalette) -> Result<Vec<(Signal, Score)>> {
    let index = truth_index(truth);
    let mut signals: Vec<Signal> = Vec::new();
    for r in rows {
        if !signals.contains(&r.signal) {
            signals.push(r.signal);
        }
    }
    signals
        .into_iter()
        .map(|signal| {
            let (mut reject, mut labels) = (Vec::new(), Vec::new());
            for r in rows.iter().filter(|r| r.signal == signal) {
                let &i = index.get(&(r.chrom.as_str(), r.pos)).ok_or_else(|| {
                    Error::Domain(format!("site {}:{} is missing from the truth table", r.chrom, r.pos))
                })?;
                reject.push(r.reject);
                labels.push(signal.eval_code(truth.codes[i], palette));
            }
            let ones = vec![1.0; reject.len()];
            Ok((signal, score_decisions(&reject, &labels, &ones, &ones)))
        })
        .collect()
}

/// Realised region-level error rates: a region carries signal when more
/// than a fraction `gamma` of its sites do. Rejections and misses are
/// weighted by the region weights.
pub fn score_regions(
    rows: &[RegionRow],
    truth: &TruthTable,
    palette: &RegimePalette,
) -> Result<Vec<(Signal, f64, Score)>> {
    // Truth rows of each chromosome are contiguous with increasing positions.
    let mut chrom_spans: FxHashMap<&str, Range<usize>> = FxHashMap::default();
    for (i, c) in truth.chrom.iter().enumerate() {
        chrom_spans.entry(c.as_str()).or_insert(i..i).end = i + 1;
    }
    let mut keys: Vec<(Signal, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0 == r.signal && k.1 == r.gamma) {
            keys.push((r.signal, r.gamma));
        }
    }
    keys.into_iter()
        .map(|(signal, gamma)| {
            let (mut reject, mut labels, mut w) = (Vec::new(), Vec::new(), Vec::new());
            for r in rows.iter().filter(|r| r.signal == signal && r.gamma == gamma) {
                let span = chrom_spans.get(r.chrom.as_str()).cloned().unwrap_or(0..0);
                let pos = &truth.positions[span.clone()];
                let lo = span.start + pos.partition_point(|&p| p <= r.start);
                let hi = span.start + pos.partition_point(|&p| p <= r.end);
                let inside: Vec<bool> = truth.codes[lo..hi.max(lo)]
                    .iter()
                    .map(|&c| signal.eval_code(c, palette))
                    .collect();
                if inside.is_empty() {
                    return Err(Error::Domain(format!(
                        "region {}:{}-{} covers no truth sites",
                        r.chrom, r.start, r.end
                    )));
                }
                reject.push(r.reject);
                labels.push(region_signal_fraction(&inside, &(0..inside.len())) > gamma);
                w.push(r.weight);
            }
            Ok((signal, gamma, score_decisions(&reject, &labels, &w, &w)))
        })
        .collect()
}
