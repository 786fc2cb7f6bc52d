use std::fmt::Write as _;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RegimePalette, SingleGroupParams};
use crate::paired::{packed, TrajectorySet};
use crate::testing::Signal;

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Latent truth of a simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable {
    pub chrom: Vec<String>,
    pub positions: Vec<u64>,
    /// Packed latent states.
    pub codes: Vec<u64>,
}

impl TruthTable {
    pub fn signal(&self, signal: Signal, palette: &RegimePalette) -> Vec<bool> {
        self.codes.iter().map(|&c| signal.eval_code(c, palette)).collect()
    }
}

/// Writes the truth sidecar: `chrom pos z control_regime case_regime
/// control_sojourn case_sojourn` (regimes one-based, `z = 1` when merged)
/// followed by one 0/1 column per signal.
pub fn write_truth(path: &Path, chrom: &str, positions: &[u64], codes: &[u64], palette: &RegimePalette) -> Result<()> {
    let mut out = String::from("chrom\tpos\tz\tcontrol_regime\tcase_regime\tcontrol_sojourn\tcase_sojourn");
    for s in Signal::ALL {
        let _ = write!(out, "\t{s}");
    }
    out.push('\n');
    for (&p, &c) in positions.iter().zip(codes) {
        let _ = write!(
            out,
            "{chrom}\t{p}\t{}\t{}\t{}\t{}\t{}",
            u8::from(packed::z(c)),
            packed::control_regime(c) + 1,
            packed::case_regime(c) + 1,
            packed::control_sojourn(c),
            packed::case_sojourn(c)
        );
        for s in Signal::ALL {
            let _ = write!(out, "\t{}", u8::from(s.eval_code(c, palette)));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_truth(path: &Path) -> Result<TruthTable> {
    let text = read_text(path)?;
    let src = path.display().to_string();
    let mut table = TruthTable {
        chrom: Vec::new(),
        positions: Vec::new(),
        codes: Vec::new(),
    };
    for (i, line) in text.lines().enumerate().skip(1) {
        let err = |msg: &str| Error::Parse {
            path: src.clone(),
            line: i + 1,
            msg: msg.to_string(),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 7 {
            return Err(err("truncated row"));
        }
        let num = |k: usize| f[k].parse::<u64>().map_err(|_| err(&format!("invalid number '{}'", f[k])));
        let (z, rc, rk, dc, dk) = (num(2)?, num(3)?, num(4)?, num(5)?, num(6)?);
        if rc == 0 || rk == 0 || z > 1 {
            return Err(err("invalid state"));
        }
        let code = if z == 1 {
            crate::paired::PairedState::merged(dc as u32, rc as usize - 1).pack()
        } else {
            crate::paired::PairedState::split(
                crate::model::SingleGroupState::new(dc as u32, rc as usize - 1),
                crate::model::SingleGroupState::new(dk as u32, rk as usize - 1),
            )
            .pack()
        };
        let pos = num(1)?;
        match table.chrom.last() {
            Some(last) if last == f[0] => {
                if table.positions.last().is_some_and(|&p| pos <= p) {
                    return Err(err("positions must increase within a chromosome"));
                }
            }
            _ if table.chrom.iter().any(|c| c == f[0]) => {
                return Err(err("rows of a chromosome must be contiguous"));
            }
            _ => {}
        }
        table.chrom.push(f[0].to_string());
        table.positions.push(pos);
        table.codes.push(code);
    }
    Ok(table)
}

/// Fitted single-group parameters of one chromosome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChromosomeFit {
    pub name: String,
    pub theta: Vec<f64>,
    pub shifts: Vec<u32>,
    pub sizes: Vec<f64>,
    pub log_likelihood: f64,
    pub updates: usize,
}

/// Fitted parameters with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub palette_means: Vec<f64>,
    pub palette_sds: Vec<f64>,
    pub chromosomes: Vec<ChromosomeFit>,
}

impl FitRecord {
    pub fn params(&self, chrom: &str) -> Result<SingleGroupParams> {
        let fit = self
            .chromosomes
            .iter()
            .find(|c| c.name == chrom)
            .ok_or_else(|| Error::Config(format!("no fitted parameters for chromosome {chrom}")))?;
        let moments: Vec<(f64, f64)> = self.palette_means.iter().copied().zip(self.palette_sds.iter().copied()).collect();
        SingleGroupParams::new(RegimePalette::new(&moments)?, fit.theta.clone(), fit.shifts.clone(), fit.sizes.clone())
    }
}

pub fn write_fit_record(path: &Path, record: &FitRecord) -> Result<()> {
    let text = toml::to_string(record).map_err(|e| Error::Config(e.to_string()))?;
    write_text(path, &text)
}

pub fn read_fit_record(path: &Path) -> Result<FitRecord> {
    toml::from_str(&read_text(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Posterior paths of one chromosome, keyed by position.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromosomeTrajectories {
    pub name: String,
    pub positions: Vec<u64>,
    pub trajectories: TrajectorySet,
}

const TRAJECTORY_MAGIC: &[u8; 8] = b"MSMCTRJ1";

/// Binary trajectory file, little endian: magic, chromosome count, then per
/// chromosome its name (length-prefixed, zero-padded to 8 bytes), site count, positions, trajectory
/// count and the site-major packed states.
pub fn write_trajectories(path: &Path, chroms: &[ChromosomeTrajectories]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut go = || -> std::io::Result<()> {
        w.write_all(TRAJECTORY_MAGIC)?;
        w.write_all(&(chroms.len() as u64).to_le_bytes())?;
        for c in chroms {
            w.write_all(&(c.name.len() as u64).to_le_bytes())?;
            w.write_all(c.name.as_bytes())?;
            w.write_all(&[0u8; 8][..(8 - c.name.len() % 8) % 8])?;
            w.write_all(&(c.positions.len() as u64).to_le_bytes())?;
            for p in &c.positions {
                w.write_all(&p.to_le_bytes())?;
            }
            w.write_all(&(c.trajectories.count() as u64).to_le_bytes())?;
            for code in c.trajectories.codes() {
                w.write_all(&code.to_le_bytes())?;
            }
        }
        w.flush()
    };
    go().map_err(|e| Error::io(path, e))
}

pub fn read_trajectories(path: &Path) -> Result<Vec<ChromosomeTrajectories>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |msg: &str| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: msg.to_string(),
    };
    let mut word = || -> Result<u64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
        Ok(u64::from_le_bytes(b))
    };
    if word()?.to_le_bytes() != *TRAJECTORY_MAGIC {
        return Err(bad("not a trajectory file"));
    }
    let n = word()?;
    let mut out = Vec::new();
    for _ in 0..n {
        let len = word()? as usize;
        let mut name = Vec::with_capacity(len);
        for chunk in 0..len.div_ceil(8) {
            let bytes = word()?.to_le_bytes();
            name.extend_from_slice(&bytes[..(len - chunk * 8).min(8)]);
        }
        let name = String::from_utf8(name).map_err(|_| bad("chromosome name is not UTF-8"))?;
        let sites = word()? as usize;
        let positions = (0..sites).map(|_| word()).collect::<Result<Vec<_>>>()?;
        let count = word()? as usize;
        let codes = (0..sites * count).map(|_| word()).collect::<Result<Vec<_>>>()?;
        out.push(ChromosomeTrajectories {
            name,
            positions,
            trajectories: TrajectorySet::from_codes(sites, count, codes)?,
        });
    }
    Ok(out)
}
