use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use methsmc::io::{
    fit_record, parse_counts, read_fit_record, read_region_decisions, read_site_decisions, read_trajectories,
    read_truth, write_bundle, write_fit_record, write_paired_posteriors, write_regime_posteriors,
    write_region_decisions, write_site_decisions, write_trajectories, ChromosomeTrajectories, RunConfig,
};
use methsmc::model::{RegimePalette, SIMULATION_PALETTES};
use methsmc::paired::TrajectorySet;
use methsmc::pipeline::{
    fit_table, infer_chromosome, pair_tables, run_pipeline, score_regions, score_sites, test_positions,
    test_positions_weighted, test_regions,
};
use methsmc::sim::{generate_dataset, SimConfig};
use methsmc::single::RegimePosteriors;

#[derive(Parser)]
#[command(name = "methsmc", version, about = "Change-point inference and differential testing for methylation counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Run configuration (TOML); defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set runs=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(base.with_overrides(&self.overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate case–control datasets with known truth.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        sites: usize,
        #[arg(long, default_value_t = 4)]
        samples: usize,
        /// Mean read depth per sample and site.
        #[arg(long, default_value_t = 10.0)]
        depth: f64,
        /// Regime table row (1-10); dataset `i` uses row `(i mod 10) + 1` when omitted.
        #[arg(long)]
        palette_row: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of datasets; each goes to `<out>/dataset_<iii>`, or straight into `<out>` when there is one.
        #[arg(long, default_value_t = 1)]
        datasets: u64,
        /// Index of the first dataset.
        #[arg(long, default_value_t = 0)]
        first_index: u64,
        #[arg(long, default_value = "chr1")]
        chromosome: String,
        /// Also write a matching `config.toml` (palette of the dataset) next to the data.
        #[arg(long)]
        write_config: bool,
    },
    /// Fit the single-group model to control counts and smooth regimes.
    Fit {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        control: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write long-format tables for plotting.
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Sample posterior paths of the case–control model.
    Infer {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        control: PathBuf,
        #[arg(long)]
        case: PathBuf,
        /// Fitted parameters from `fit`; fitted afresh when omitted.
        #[arg(long)]
        fit: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Run every test as well and write the full result set.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Site-level step-up testing of the configured signals.
    TestPositions {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        trajectories: PathBuf,
        /// Optional per-site weights: `chrom pos a b` with a header row.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Region construction and region-level step-up testing.
    TestRegions {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Realised FDP, FNP and TP of decisions against a simulation truth file.
    Score {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        sites: Option<PathBuf>,
        #[arg(long)]
        regions: Option<PathBuf>,
    },
}

fn palette_config(row: usize) -> Result<RunConfig> {
    let moments = RegimePalette::simulation_row(row)?.moments();
    Ok(RunConfig {
        palette_means: moments.iter().map(|m| m.0).collect(),
        palette_sds: moments.iter().map(|m| m.1).collect(),
        ..RunConfig::default()
    })
}

fn write_config(path: &Path, config: &RunConfig) -> Result<()> {
    std::fs::write(path, config.to_toml()).with_context(|| format!("writing {}", path.display()))
}

fn load_trajectories(path: &Path) -> Result<(Vec<String>, Vec<Vec<u64>>, Vec<TrajectorySet>)> {
    let chroms = read_trajectories(path)?;
    let names = chroms.iter().map(|c| c.name.clone()).collect();
    let positions = chroms.iter().map(|c| c.positions.clone()).collect();
    let trajs = chroms.into_iter().map(|c| c.trajectories).collect();
    Ok((names, positions, trajs))
}

type SiteWeights = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn read_weights(path: &Path, names: &[String], positions: &[Vec<u64>]) -> Result<SiteWeights> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map: HashMap<(String, u64), (f64, f64)> = HashMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let parsed = (f.len() == 4)
            .then(|| Some((f[1].parse::<u64>().ok()?, f[2].parse::<f64>().ok()?, f[3].parse::<f64>().ok()?)))
            .flatten();
        let Some((pos, a, b)) = parsed.filter(|p| p.1 >= 0.0 && p.2 >= 0.0) else {
            bail!("{}:{}: expected chrom, pos and two nonnegative weights", path.display(), i + 1);
        };
        map.insert((f[0].to_string(), pos), (a, b));
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (name, pos) in names.iter().zip(positions) {
        let mut ca = Vec::with_capacity(pos.len());
        let mut cb = Vec::with_capacity(pos.len());
        for &p in pos {
            let &(wa, wb) = map
                .get(&(name.clone(), p))
                .with_context(|| format!("no weights for {name}:{p}"))?;
            ca.push(wa);
            cb.push(wb);
        }
        a.push(ca);
        b.push(cb);
    }
    Ok((a, b))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            out,
            sites,
            samples,
            depth,
            palette_row,
            seed,
            datasets,
            first_index,
            chromosome,
            write_config: with_config,
        } => {
            if let Some(row) = palette_row {
                if !(1..=SIMULATION_PALETTES.len()).contains(&row) {
                    bail!("palette row must lie in 1..={}", SIMULATION_PALETTES.len());
                }
            }
            for index in first_index..first_index + datasets {
                let row = palette_row.map_or((index % SIMULATION_PALETTES.len() as u64) as usize, |r| r - 1);
                let config = SimConfig {
                    sites,
                    samples,
                    depth,
                    palette_row: row,
                    seed,
                    dataset_index: index,
                    chromosome: chromosome.clone(),
                };
                let dir = if datasets == 1 { out.clone() } else { out.join(format!("dataset_{index:03}")) };
                generate_dataset(&config, &dir)?;
                if with_config {
                    write_config(&dir.join("config.toml"), &palette_config(row)?)?;
                }
                info!("wrote dataset {index} to {}", dir.display());
            }
        }
        Command::Fit {
            cfg,
            control,
            out,
            emit_plot_data,
        } => {
            let config = cfg.load()?;
            let table = parse_counts(&control)?;
            let fits = fit_table(&config, &table)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let names: Vec<String> = table.chromosomes.iter().map(|c| c.name.clone()).collect();
            let positions: Vec<Vec<u64>> = table.chromosomes.iter().map(|c| c.positions.clone()).collect();
            write_fit_record(&out.join("fit.toml"), &fit_record(&config, &names, &fits))?;
            let post: Vec<&RegimePosteriors> = fits.iter().map(|f| &f.posteriors).collect();
            write_regime_posteriors(&out.join("posteriors.tsv"), &names, &positions, &post, false)?;
            if emit_plot_data {
                write_regime_posteriors(&out.join("plot_regimes.tsv"), &names, &positions, &post, true)?;
            }
        }
        Command::Infer {
            cfg,
            control,
            case,
            fit,
            out,
            all,
            emit_plot_data,
        } => {
            let config = cfg.load()?;
            let control = parse_counts(&control)?;
            let case = parse_counts(&case)?;
            if all {
                let bundle = run_pipeline(&config, &control, Some(&case))?;
                write_bundle(&out, &bundle, &config, emit_plot_data)?;
                for t in &bundle.site_tests {
                    println!("{}\tsites\trejected {}\testimated_fdr {:.4}", t.signal, t.n_rejected, t.estimated_fdr);
                }
                for t in &bundle.region_tests {
                    println!(
                        "{}\tregions gamma={}\trejected {}\testimated_fdr {:.4}",
                        t.signal, t.gamma, t.n_rejected, t.estimated_fdr
                    );
                }
                return Ok(());
            }
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let pairs = pair_tables(&control, &case)?;
            let params = match fit {
                Some(path) => {
                    let record = read_fit_record(&path)?;
                    if record.palette_means != config.palette_means || record.palette_sds != config.palette_sds {
                        bail!("the fitted parameters use a different regime palette than the configuration");
                    }
                    pairs.iter().map(|(c, _)| record.params(&c.name)).collect::<methsmc::Result<Vec<_>>>()?
                }
                None => {
                    let fits = fit_table(&config, &control)?;
                    let names: Vec<String> = control.chromosomes.iter().map(|c| c.name.clone()).collect();
                    write_fit_record(&out.join("fit.toml"), &fit_record(&config, &names, &fits))?;
                    fits.into_iter().map(|f| f.params).collect()
                }
            };
            let mut chroms = Vec::new();
            for ((c, k), p) in pairs.iter().zip(&params) {
                info!("sampling paths on {}", c.name);
                chroms.push(ChromosomeTrajectories {
                    name: c.name.clone(),
                    positions: c.positions.clone(),
                    trajectories: infer_chromosome(&config, p, c, k)?,
                });
            }
            write_trajectories(&out.join("trajectories.bin"), &chroms)?;
            let names: Vec<String> = chroms.iter().map(|c| c.name.clone()).collect();
            let positions: Vec<Vec<u64>> = chroms.iter().map(|c| c.positions.clone()).collect();
            let refs: Vec<&TrajectorySet> = chroms.iter().map(|c| &c.trajectories).collect();
            write_paired_posteriors(
                &out.join("paired_posteriors.tsv"),
                &names,
                &positions,
                &refs,
                &config.palette()?,
                &config.signals,
            )?;
        }
        Command::TestPositions {
            cfg,
            trajectories,
            weights,
            out,
        } => {
            let config = cfg.load()?;
            let palette = config.palette()?;
            let (names, positions, trajs) = load_trajectories(&trajectories)?;
            let refs: Vec<&TrajectorySet> = trajs.iter().collect();
            let w = weights.map(|p| read_weights(&p, &names, &positions)).transpose()?;
            let mut rows = Vec::new();
            for &signal in &config.signals {
                let test = match &w {
                    Some((a, b)) => test_positions_weighted(&refs, signal, &palette, config.alpha, a, b),
                    None => test_positions(&refs, signal, &palette, config.alpha),
                };
                println!("{signal}\trejected {}\testimated_fdr {:.4}", test.n_rejected, test.estimated_fdr);
                rows.extend(test.rows(&names, &positions));
            }
            write_site_decisions(&out, &rows)?;
        }
        Command::TestRegions { cfg, trajectories, out } => {
            let config = cfg.load()?;
            let palette = config.palette()?;
            let (names, positions, trajs) = load_trajectories(&trajectories)?;
            let refs: Vec<&TrajectorySet> = trajs.iter().collect();
            let mut rows = Vec::new();
            for &signal in &config.signals {
                for &gamma in &config.gamma {
                    let test = test_regions(&refs, signal, &palette, gamma, config.region_threshold, config.alpha)?;
                    println!(
                        "{signal}\tgamma={gamma}\trejected {}\testimated_fdr {:.4}",
                        test.n_rejected, test.estimated_fdr
                    );
                    rows.extend(test.rows(&names, &positions));
                }
            }
            write_region_decisions(&out, &rows)?;
        }
        Command::Score {
            cfg,
            truth,
            sites,
            regions,
        } => {
            if sites.is_none() && regions.is_none() {
                bail!("pass --sites and/or --regions");
            }
            let config = cfg.load()?;
            let palette = config.palette()?;
            let truth = read_truth(&truth)?;
            println!("level\tsignal\tgamma\tfdp\tfnp\ttp\trejected");
            if let Some(path) = sites {
                for (signal, s) in score_sites(&read_site_decisions(&path)?, &truth, &palette)? {
                    println!("site\t{signal}\t-\t{:.6}\t{:.6}\t{}\t{}", s.fdp, s.fnp, s.tp, s.r);
                }
            }
            if let Some(path) = regions {
                for (signal, gamma, s) in score_regions(&read_region_decisions(&path)?, &truth, &palette)? {
                    println!("region\t{signal}\t{gamma}\t{:.6}\t{:.6}\t{}\t{}", s.fdp, s.fnp, s.tp, s.r);
                }
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
