use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use landopt::dataset::synth::{synth_generate, SynthConfig};
use landopt::dataset::Dataset;
use landopt::evolution::EvolutionConfig;
use landopt::heuristics::{default_thresholds, heuristic_sweep, sweep_csv, HeuristicKind};
use landopt::land::{CellContext, LandUseVector};
use landopt::pipeline::{evolve_on_dataset, holdout_mae, train_with_holdout, Family};
use landopt::predictors::{conversion_heatmap, FeatureSchema, Predictor};
use landopt::service::{serve, ModelStore};

#[derive(Debug, Parser)]
#[command(
    name = "landopt",
    version,
    about = "Surrogate-assisted evolutionary land-use optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cells: usize,
        /// Inclusive year range, e.g. 2000:2009.
        #[arg(long, default_value = "2000:2009", value_parser = parse_years)]
        years: (i32, i32),
        /// Interaction strength of the nonlinear term.
        #[arg(long)]
        interaction: Option<f64>,
        /// Standard deviation of the additive noise.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a predictor on the early years and report train and held-out MAE.
    Train {
        #[arg(long)]
        model: Family,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "global")]
        region: String,
        /// Feature groups: `full`, `deltas-only`, or a comma list of
        /// usage, deltas, area, latlon, year.
        #[arg(long, default_value = "full")]
        schema: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Held-out MAE of a saved predictor on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Predicted ELUC of every full conversion between land types, as CSV.
    Heatmap {
        #[arg(long)]
        model: PathBuf,
        /// Take location, area and year from the first cell of this dataset.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve prescriptors against a saved predictor.
    Evolve {
        #[arg(long)]
        predictor: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// JSON evolution config; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a conversion-to-secdf heuristic at thresholds 10..100.
    Sweep {
        #[arg(long)]
        kind: HeuristicKind,
        #[arg(long)]
        predictor: PathBuf,
        /// Linear regression whose delta weights order the linear heuristic.
        #[arg(long)]
        linreg: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Share of rows used as evaluation contexts.
        #[arg(long, default_value_t = 0.01)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the what-if API and UI assets from a store directory.
    Serve {
        #[arg(long)]
        store: PathBuf,
        /// Overridden by LANDOPT_PORT.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

fn parse_years(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected A:B, got `{s}`"))?;
    let a: i32 = a
        .trim()
        .parse()
        .map_err(|e| format!("bad start year: {e}"))?;
    let b: i32 = b.trim().parse().map_err(|e| format!("bad end year: {e}"))?;
    if a > b {
        return Err(format!("start year {a} is after end year {b}"));
    }
    Ok((a, b))
}

fn load_predictor(path: &Path) -> anyhow::Result<Predictor> {
    Predictor::load(path).with_context(|| format!("loading predictor {}", path.display()))
}

fn load_data(path: &Path) -> anyhow::Result<Dataset> {
    Dataset::load_csv(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn heatmap_baseline(data: Option<&Path>) -> anyhow::Result<CellContext> {
    if let Some(path) = data {
        if let Some(c) = load_data(path)?.latest_per_cell().into_iter().next() {
            return Ok(c);
        }
    }
    Ok(CellContext {
        cell_id: "baseline".into(),
        lat: 0.125,
        lon: 0.125,
        area: 76_900.0,
        year: 2000,
        usage: LandUseVector::from_pairs(&[], 1.0),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth {
            seed,
            cells,
            years,
            interaction,
            noise,
            out,
        } => {
            let defaults = SynthConfig::default();
            let cfg = SynthConfig {
                seed,
                n_cells: cells,
                years,
                interaction_coeff: interaction.unwrap_or(defaults.interaction_coeff),
                noise_std: noise.unwrap_or(defaults.noise_std),
                ..defaults
            };
            let ds = synth_generate(&cfg)?;
            ds.save_csv(&out)?;
            println!("wrote {} rows to {}", ds.len(), out.display());
        }
        Command::Train {
            model,
            data,
            region,
            schema,
            seed,
            out,
        } => {
            let ds = load_data(&data)?.filter_region(&region)?;
            let schema = FeatureSchema::parse(&schema)?;
            let (p, report) = train_with_holdout(model, &ds, schema, seed)?;
            p.save(&out)?;
            println!(
                "model {} trained on {} rows; train MAE {} ; test MAE {} ({} rows)",
                p.model_id(),
                report.train_rows,
                report.train_mae,
                report.test_mae,
                report.test_rows
            );
        }
        Command::Eval { model, data } => {
            let p = load_predictor(&model)?;
            let mae = holdout_mae(&p, &load_data(&data)?)?;
            println!("test MAE {mae}");
        }
        Command::Heatmap { model, data, out } => {
            let p = load_predictor(&model)?;
            let base = heatmap_baseline(data.as_deref())?;
            write_text(&out, &conversion_heatmap(&p, &base)?.to_csv())?;
            println!("wrote {}", out.display());
        }
        Command::Evolve {
            predictor,
            data,
            config,
            seed,
            out,
        } => {
            let mut cfg: EvolutionConfig = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading config {}", path.display()))?;
                    serde_json::from_str(&text)
                        .with_context(|| format!("parsing config {}", path.display()))?
                }
                None => EvolutionConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let p = load_predictor(&predictor)?;
            let (result, fits) = evolve_on_dataset(&cfg, &load_data(&data)?, &p)?;
            for f in fits.iter().filter(|f| !f.met) {
                eprintln!(
                    "landopt: warning: seed missed its target ({} = {}, target {}); injected anyway",
                    f.what, f.achieved, f.target
                );
            }
            result.write_dir(&cfg, &out)?;
            let last = result
                .stats
                .last()
                .expect("generation 0 is always recorded");
            println!(
                "{}: {} generations, archive of {} (hypervolume {}) written to {}",
                result.run_id,
                cfg.generations,
                result.archive.len(),
                last.archive_hypervolume,
                out.display()
            );
        }
        Command::Sweep {
            kind,
            predictor,
            linreg,
            data,
            fraction,
            seed,
            out,
        } => {
            let p = load_predictor(&predictor)?;
            let lin = match linreg.as_deref().map(load_predictor).transpose()? {
                Some(Predictor::Linreg(m)) => Some(m),
                Some(other) => bail!("--linreg must be a linreg model, got {}", other.family()),
                None => None,
            };
            let ctxs = load_data(&data)?
                .sample_fraction(fraction, seed)?
                .contexts();
            let points = heuristic_sweep(kind, &ctxs, &default_thresholds(), &p, lin.as_ref())?;
            write_text(&out, &sweep_csv(&points))?;
            println!("wrote {} points to {}", points.len(), out.display());
        }
        Command::Serve { store, port, host } => {
            let port = match std::env::var("LANDOPT_PORT") {
                Ok(v) => v
                    .parse()
                    .with_context(|| format!("LANDOPT_PORT `{v}` is not a port"))?,
                Err(_) => port,
            };
            let store = ModelStore::load(&store)?;
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new()?;
            println!("serving on http://{addr}");
            rt.block_on(serve(store, addr))
                .with_context(|| format!("serving on {addr}"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("landopt: error: {msg}");
            ExitCode::FAILURE
        }
    }
}
