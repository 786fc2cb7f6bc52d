use std::fmt::Write as _;
use std::path::Path;

use super::config::RunConfig;
use super::output::{write_fit_record, write_trajectories, ChromosomeFit, ChromosomeTrajectories, FitRecord};
use crate::error::{Error, Result};
use crate::model::RegimePalette;
use crate::paired::TrajectorySet;
use crate::pipeline::{RegionTest, ResultBundle, SiteTest};
use crate::single::{FitResult, RegimePosteriors};
use crate::testing::{site_lfdr, Signal};

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One tested site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteRow {
    pub signal: Signal,
    pub chrom: String,
    pub pos: u64,
    pub lfdr: f64,
    pub reject: bool,
}

/// One tested region. `start..end` is half-open and zero-based in genomic
/// coordinates: a region covering sites at positions `p1 <= ... <= pn`
/// (one-based) is written as `start = p1 - 1`, `end = pn`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub signal: Signal,
    pub gamma: f64,
    pub chrom: String,
    pub start: u64,
    pub end: u64,
    pub sites: usize,
    pub weight: f64,
    pub lfdr: f64,
    pub reject: bool,
}

impl SiteTest {
    pub fn rows(&self, chroms: &[String], positions: &[Vec<u64>]) -> Vec<SiteRow> {
        let mut rows = Vec::new();
        for (c, name) in chroms.iter().enumerate() {
            for (t, &pos) in positions[c].iter().enumerate() {
                rows.push(SiteRow {
                    signal: self.signal,
                    chrom: name.clone(),
                    pos,
                    lfdr: self.lfdr[c][t],
                    reject: self.reject[c][t],
                });
            }
        }
        rows
    }
}

impl RegionTest {
    pub fn rows(&self, chroms: &[String], positions: &[Vec<u64>]) -> Vec<RegionRow> {
        let mut rows = Vec::new();
        for (c, name) in chroms.iter().enumerate() {
            for (k, r) in self.regions[c].iter().enumerate() {
                rows.push(RegionRow {
                    signal: self.signal,
                    gamma: self.gamma,
                    chrom: name.clone(),
                    start: positions[c][r.start].saturating_sub(1),
                    end: positions[c][r.end - 1],
                    sites: r.len(),
                    weight: self.weights[c][k],
                    lfdr: self.lfdr[c][k],
                    reject: self.reject[c][k],
                });
            }
        }
        rows
    }
}

const SITE_HEADER: &str = "signal\tchrom\tpos\tlfdr\treject";
const REGION_HEADER: &str = "signal\tgamma\tchrom\tstart\tend\tsites\tweight\tlfdr\treject";

pub fn write_site_decisions(path: &Path, rows: &[SiteRow]) -> Result<()> {
    let mut out = format!("{SITE_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.signal, r.chrom, r.pos, r.lfdr, u8::from(r.reject));
    }
    write_text(path, &out)
}

pub fn write_region_decisions(path: &Path, rows: &[RegionRow]) -> Result<()> {
    let mut out = format!("{REGION_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.signal,
            r.gamma,
            r.chrom,
            r.start,
            r.end,
            r.sites,
            r.weight,
            r.lfdr,
            u8::from(r.reject)
        );
    }
    write_text(path, &out)
}

fn read_rows<T>(path: &Path, header: &str, parse: impl Fn(&[&str]) -> Option<T>) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: &str| Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(err(1, &format!("expected header '{header}'")));
    }
    let arity = header.split('\t').count();
    lines
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != arity {
                return Err(err(i + 2, &format!("expected {arity} fields")));
            }
            parse(&f).ok_or_else(|| err(i + 2, "malformed row"))
        })
        .collect()
}

fn flag(s: &str) -> Option<bool> {
    match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

pub fn read_site_decisions(path: &Path) -> Result<Vec<SiteRow>> {
    read_rows(path, SITE_HEADER, |f| {
        Some(SiteRow {
            signal: f[0].parse().ok()?,
            chrom: f[1].to_string(),
            pos: f[2].parse().ok()?,
            lfdr: f[3].parse().ok()?,
            reject: flag(f[4])?,
        })
    })
}

pub fn read_region_decisions(path: &Path) -> Result<Vec<RegionRow>> {
    read_rows(path, REGION_HEADER, |f| {
        Some(RegionRow {
            signal: f[0].parse().ok()?,
            gamma: f[1].parse().ok()?,
            chrom: f[2].to_string(),
            start: f[3].parse().ok()?,
            end: f[4].parse().ok()?,
            sites: f[5].parse().ok()?,
            weight: f[6].parse().ok()?,
            lfdr: f[7].parse().ok()?,
            reject: flag(f[8])?,
        })
    })
}

/// Smoothed regime probabilities, wide (`chrom pos regime_1 ...`) or long
/// (`chrom pos regime prob`, one row per site and regime).
pub fn write_regime_posteriors(
    path: &Path,
    chroms: &[String],
    positions: &[Vec<u64>],
    posteriors: &[&RegimePosteriors],
    long: bool,
) -> Result<()> {
    let regimes = posteriors.first().map_or(0, |p| p.regimes());
    let mut out = String::from("chrom\tpos");
    if long {
        out.push_str("\tregime\tprob");
    } else {
        for q in 1..=regimes {
            let _ = write!(out, "\tregime_{q}");
        }
    }
    out.push('\n');
    for (c, name) in chroms.iter().enumerate() {
        for (t, pos) in positions[c].iter().enumerate() {
            let row = posteriors[c].site(t);
            if long {
                for (q, p) in row.iter().enumerate() {
                    let _ = writeln!(out, "{name}\t{pos}\t{}\t{p}", q + 1);
                }
            } else {
                let _ = write!(out, "{name}\t{pos}");
                for p in row {
                    let _ = write!(out, "\t{p}");
                }
                out.push('\n');
            }
        }
    }
    write_text(path, &out)
}

/// Posterior probability that the groups are split, and of each signal,
/// at every site.
pub fn write_paired_posteriors(
    path: &Path,
    chroms: &[String],
    positions: &[Vec<u64>],
    trajs: &[&TrajectorySet],
    palette: &RegimePalette,
    signals: &[Signal],
) -> Result<()> {
    let mut out = String::from("chrom\tpos\tsplit");
    for s in signals {
        let _ = write!(out, "\t{s}");
    }
    out.push('\n');
    for (c, name) in chroms.iter().enumerate() {
        let probs: Vec<Vec<f64>> = signals.iter().map(|&s| site_lfdr(trajs[c], s, palette)).collect();
        for (t, pos) in positions[c].iter().enumerate() {
            let _ = write!(out, "{name}\t{pos}\t{}", trajs[c].prob_split(t));
            for p in &probs {
                let _ = write!(out, "\t{}", 1.0 - p[t]);
            }
            out.push('\n');
        }
    }
    write_text(path, &out)
}

pub fn fit_record(config: &RunConfig, chroms: &[String], fits: &[FitResult]) -> FitRecord {
    FitRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config_hash: config.hash(),
        palette_means: config.palette_means.clone(),
        palette_sds: config.palette_sds.clone(),
        chromosomes: chroms
            .iter()
            .zip(fits)
            .map(|(name, f)| ChromosomeFit {
                name: name.clone(),
                theta: f.params.theta().to_vec(),
                shifts: f.params.shifts().to_vec(),
                sizes: f.params.sizes().to_vec(),
                log_likelihood: f.log_likelihood,
                updates: f.updates,
            })
            .collect(),
    }
}

/// Writes every table of a run into `dir`: `fit.toml`, `posteriors.tsv`,
/// and with case data `paired_posteriors.tsv`, `trajectories.bin`,
/// `sites.tsv` and `regions.tsv`. With `plot_data`, long-format copies
/// go to `plot_regimes.tsv`.
pub fn write_bundle(dir: &Path, bundle: &ResultBundle, config: &RunConfig, plot_data: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let record = fit_record(config, &bundle.chromosomes, &bundle.fits);
    write_fit_record(&dir.join("fit.toml"), &record)?;
    let post: Vec<&RegimePosteriors> = bundle.fits.iter().map(|f| &f.posteriors).collect();
    write_regime_posteriors(&dir.join("posteriors.tsv"), &bundle.chromosomes, &bundle.positions, &post, false)?;
    if plot_data {
        write_regime_posteriors(&dir.join("plot_regimes.tsv"), &bundle.chromosomes, &bundle.positions, &post, true)?;
    }
    let Some(trajs) = &bundle.trajectories else {
        return Ok(());
    };
    let refs: Vec<&TrajectorySet> = trajs.iter().collect();
    write_paired_posteriors(
        &dir.join("paired_posteriors.tsv"),
        &bundle.chromosomes,
        &bundle.positions,
        &refs,
        &config.palette()?,
        &config.signals,
    )?;
    let chroms: Vec<ChromosomeTrajectories> = bundle
        .chromosomes
        .iter()
        .zip(&bundle.positions)
        .zip(trajs)
        .map(|((n, p), t)| ChromosomeTrajectories {
            name: n.clone(),
            positions: p.clone(),
            trajectories: t.clone(),
        })
        .collect();
    write_trajectories(&dir.join("trajectories.bin"), &chroms)?;
    let sites: Vec<SiteRow> = bundle
        .site_tests
        .iter()
        .flat_map(|s| s.rows(&bundle.chromosomes, &bundle.positions))
        .collect();
    write_site_decisions(&dir.join("sites.tsv"), &sites)?;
    let regions: Vec<RegionRow> = bundle
        .region_tests
        .iter()
        .flat_map(|r| r.rows(&bundle.chromosomes, &bundle.positions))
        .collect();
    write_region_decisions(&dir.join("regions.tsv"), &regions)
}
