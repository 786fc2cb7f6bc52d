use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::CountMatrix;

/// Counts of one group on one chromosome.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromosomeCounts {
    pub name: String,
    /// Strictly increasing site positions.
    pub positions: Vec<u64>,
    pub counts: CountMatrix,
}

/// Read counts of one group: every chromosome shares the sample columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub samples: Vec<String>,
    pub chromosomes: Vec<ChromosomeCounts>,
}

impl CountTable {
    pub fn new(samples: Vec<String>, chromosomes: Vec<ChromosomeCounts>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("a count table needs at least one sample".into()));
        }
        for (i, c) in chromosomes.iter().enumerate() {
            if c.counts.samples() != samples.len() || c.counts.sites() != c.positions.len() {
                return Err(Error::Domain(format!("chromosome {} has a malformed count matrix", c.name)));
            }
            if c.positions.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Domain(format!("positions on {} are not strictly increasing", c.name)));
            }
            if chromosomes[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Domain(format!("chromosome {} appears twice", c.name)));
            }
        }
        Ok(Self { samples, chromosomes })
    }

    pub fn single(chrom: &str, positions: Vec<u64>, samples: Vec<String>, counts: CountMatrix) -> Result<Self> {
        Self::new(
            samples,
            vec![ChromosomeCounts {
                name: chrom.to_string(),
                positions,
                counts,
            }],
        )
    }

    pub fn sites(&self) -> usize {
        self.chromosomes.iter().map(|c| c.positions.len()).sum()
    }

    pub fn chromosome(&self, name: &str) -> Option<&ChromosomeCounts> {
        self.chromosomes.iter().find(|c| c.name == name)
    }
}

/// Parses a count table. Columns: `chrom`, `pos`, then a
/// `<sample>_meth`, `<sample>_total` pair per sample. Rows of one chromosome
/// must be contiguous with strictly increasing positions; `0 0` marks a
/// missing sample.
pub fn parse_counts_str(text: &str, source: &str) -> Result<CountTable> {
    let err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 4 || !cols.len().is_multiple_of(2) {
        return Err(err(hl + 1, format!("expected chrom, pos and column pairs, found {} columns", cols.len())));
    }
    let samples: Vec<String> = cols[2..]
        .chunks(2)
        .map(|p| p[0].strip_suffix("_meth").unwrap_or(p[0]).to_string())
        .collect();
    let s = samples.len();

    let mut chromosomes: Vec<ChromosomeCounts> = Vec::new();
    let (mut pos, mut meth, mut total) = (Vec::new(), Vec::new(), Vec::new());
    let mut current: Option<String> = None;
    let mut flush = |name: String, pos: &mut Vec<u64>, meth: &mut Vec<u32>, total: &mut Vec<u32>, line: usize| -> Result<()> {
        let counts = CountMatrix::new(s, std::mem::take(meth), std::mem::take(total)).map_err(|e| err(line, e.to_string()))?;
        chromosomes.push(ChromosomeCounts {
            name,
            positions: std::mem::take(pos),
            counts,
        });
        Ok(())
    };
    let mut seen: Vec<String> = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != cols.len() {
            return Err(err(ln, format!("expected {} fields, found {}", cols.len(), fields.len())));
        }
        let chrom = fields[0];
        let p: u64 = fields[1].parse().map_err(|_| err(ln, format!("invalid position '{}'", fields[1])))?;
        if current.as_deref() != Some(chrom) {
            if seen.iter().any(|c| c == chrom) {
                return Err(err(ln, format!("rows of {chrom} are not contiguous")));
            }
            if let Some(name) = current.take() {
                flush(name, &mut pos, &mut meth, &mut total, ln)?;
            }
            seen.push(chrom.to_string());
            current = Some(chrom.to_string());
        } else if pos.last().is_some_and(|&last| p <= last) {
            return Err(err(ln, format!("position {p} does not increase on {chrom}")));
        }
        pos.push(p);
        for (k, pair) in fields[2..].chunks(2).enumerate() {
            let y: u32 = pair[0].parse().map_err(|_| err(ln, format!("invalid count '{}'", pair[0])))?;
            let n: u32 = pair[1].parse().map_err(|_| err(ln, format!("invalid count '{}'", pair[1])))?;
            if y > n {
                return Err(err(ln, format!("sample {}: methylated count {y} exceeds total {n}", samples[k])));
            }
            meth.push(y);
            total.push(n);
        }
    }
    if let Some(name) = current.take() {
        flush(name, &mut pos, &mut meth, &mut total, text.lines().count())?;
    }
    CountTable::new(samples, chromosomes).map_err(|e| err(hl + 1, e.to_string()))
}

pub fn parse_counts(path: &Path) -> Result<CountTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_counts_str(&text, &path.display().to_string())
}

pub fn format_counts(table: &CountTable) -> String {
    let mut out = String::from("chrom\tpos");
    for s in &table.samples {
        let _ = write!(out, "\t{s}_meth\t{s}_total");
    }
    out.push('\n');
    for c in &table.chromosomes {
        for (t, p) in c.positions.iter().enumerate() {
            let _ = write!(out, "{}\t{p}", c.name);
            let site = c.counts.site(t);
            for (y, n) in site.methylated.iter().zip(site.total) {
                let _ = write!(out, "\t{y}\t{n}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_counts(path: &Path, table: &CountTable) -> Result<()> {
    std::fs::write(path, format_counts(table)).map_err(|e| Error::io(path, e))
}
