use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsr_core::data::Split;
use gsr_core::experiment::{
    degraded_stats, emit_report, load_dataset, run_experiment, transfer_eval, write_metrics, ExperimentConfig,
    ModelSpec,
};
use gsr_core::{par, Error, Result};

/// Graph signal restoration with unrolled ADMM models.
#[derive(Debug, Parser)]
#[command(name = "gsr", version)]
struct Cli {
    /// Worker threads for data-parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to the configured one, then `runs/<id>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or ingest the configured dataset and write it as a bundle.
    GenData(Common),
    /// Train the configured GraphDAU or NestDAU model and evaluate it.
    Train(Common),
    /// Evaluate a trained parameter file on the configured dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params: PathBuf,
    },
    /// Grid-search the configured baseline on the validation split.
    GridSearch(Common),
    /// Apply parameters trained elsewhere to the configured target dataset.
    Transfer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params: PathBuf,
    },
    /// Consolidate every metrics.csv under a directory.
    Report {
        /// Directory holding experiment outputs.
        #[arg(long)]
        dir: PathBuf,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load_json(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| Path::new("runs").join(&cfg.id));
    Ok((cfg, out))
}

fn print_rows(rows: &[gsr_core::experiment::MetricsRow]) {
    for r in rows {
        println!("{:<24} {:?} rmse {:.4} ± {:.4} params {}", r.full_name(), r.split, r.mean_rmse, r.std_rmse, r.param_count);
    }
}

fn evaluate_params(common: &Common, params: &Path) -> Result<()> {
    let (cfg, out) = load(common)?;
    let ds = load_dataset(&cfg.data, cfg.seed)?;
    let row = transfer_eval(params, &cfg)?;
    let mut noisy = row.clone();
    noisy.model = "Noisy".into();
    noisy.variant.clear();
    noisy.param_count = 0;
    noisy.wall_time = 0.0;
    let s = degraded_stats(&ds, Split::Test);
    noisy.mean_rmse = s.mean;
    noisy.std_rmse = s.std;
    let rows = vec![noisy, row];
    std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
    write_metrics(&out.join("metrics.csv"), &rows)?;
    print_rows(&rows);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        par::set_threads(cli.threads);
    }
    match cli.command {
        Command::GenData(common) => {
            let (cfg, out) = load(&common)?;
            let ds = load_dataset(&cfg.data, cfg.seed)?;
            ds.save_bundle(&out)?;
            println!("wrote {} samples on {} graph(s) to {}", ds.samples.len(), ds.graphs.len(), out.display());
        }
        Command::Train(common) => {
            let (cfg, out) = load(&common)?;
            if matches!(cfg.model, ModelSpec::Baseline { .. }) {
                return Err(Error::Config("`train` needs a graphdau or nestdau model; use `grid-search` for baselines".into()));
            }
            let res = run_experiment(&cfg, &out)?;
            print_rows(&res.rows);
        }
        Command::GridSearch(common) => {
            let (cfg, out) = load(&common)?;
            if !matches!(cfg.model, ModelSpec::Baseline { .. }) {
                return Err(Error::Config("`grid-search` needs a baseline model".into()));
            }
            let res = run_experiment(&cfg, &out)?;
            print_rows(&res.rows);
        }
        Command::Eval { common, params } | Command::Transfer { common, params } => evaluate_params(&common, &params)?,
        Command::Report { dir } => {
            let report = emit_report(&dir)?;
            println!("{} rows, {} plot files written under {}", report.rows.len(), report.plot_files.len(), dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
