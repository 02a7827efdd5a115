//! Experiment configuration, orchestration and reporting.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{evaluate_baseline, grid_search, BaselineGrid, BaselineSpec};
use crate::context::Accel;
use crate::dau::{DauParams, Variant, DEFAULT_LAYERS};
use crate::data::{generate, load_csv_dataset, CsvGraphConfig, Dataset, RmseStats, Split, Splits, SynthSpec};
use crate::error::{Error, Result};
use crate::graph::SynthKind;
use crate::linalg::rmse;
use crate::model::Model;
use crate::nest::{NestParams, DEFAULT_OUTER_LAYERS};
use crate::train::{evaluate_model, train, write_history, TrainConfig};

/// Largest graph for which the EVD path is attempted during transfer.
pub const EVD_MAX_NODES: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Denoise,
    Interpolate,
}

fn default_layers() -> usize {
    DEFAULT_LAYERS
}

fn default_outer() -> usize {
    DEFAULT_OUTER_LAYERS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Graphdau {
        variant: Variant,
        accel: Accel,
        #[serde(rename = "L", default = "default_layers")]
        layers: usize,
        #[serde(rename = "K", default)]
        order: Option<usize>,
    },
    Nestdau {
        variant: Variant,
        accel: Accel,
        #[serde(rename = "P", default = "default_outer")]
        outer_layers: usize,
        #[serde(rename = "L", default = "default_layers")]
        layers: usize,
        #[serde(rename = "K", default)]
        order: Option<usize>,
    },
    Baseline {
        spec: BaselineSpec,
        /// Search lattice; `null` evaluates `spec` as given.
        #[serde(default)]
        grid: Option<BaselineGrid>,
    },
}

impl ModelSpec {
    fn check_order(accel: Accel, order: Option<usize>) -> Result<usize> {
        match (accel, order) {
            (Accel::Cheb, None) => Err(Error::Config("the cheb accel requires `K`".into())),
            (Accel::Cheb, Some(0)) => Err(Error::Config("`K` must be at least 1".into())),
            (Accel::Cheb, Some(k)) => Ok(k),
            (Accel::Evd, Some(_)) => Err(Error::Config("`K` is only valid with the cheb accel".into())),
            (Accel::Evd, None) => Ok(0),
        }
    }

    /// Untrained parameters for a learned model; `None` for baselines.
    pub fn initial_model(&self) -> Result<Option<Model>> {
        Ok(match *self {
            ModelSpec::Graphdau {
                variant,
                accel,
                layers,
                order,
            } => {
                let k = Self::check_order(accel, order)?;
                Some(Model::Dau(DauParams::init(variant, accel, layers, k)))
            }
            ModelSpec::Nestdau {
                variant,
                accel,
                outer_layers,
                layers,
                order,
            } => {
                let k = Self::check_order(accel, order)?;
                Some(Model::Nest(NestParams::init(variant, accel, outer_layers, layers, k)))
            }
            ModelSpec::Baseline { .. } => None,
        })
    }
}

/// CSV ingestion plus the degradation applied to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub nodes: PathBuf,
    pub signals: PathBuf,
    pub graph: CsvGraphConfig,
    pub splits: Splits,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub missing_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SynthSpec),
    Csv(CsvSource),
    Bundle { dir: PathBuf },
}

impl DataSource {
    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            DataSource::Synthetic(s) => {
                let g = match s.graph {
                    SynthKind::Community { .. } => "community",
                    SynthKind::Sensor { .. } => "sensor",
                };
                let sig = serde_json::to_value(s.signal).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                let p = if s.perturbed { "-perturbed" } else { "" };
                format!("{g}{}-{sig}{p}", s.n)
            }
            DataSource::Csv(c) => format!("csv:{}", c.signals.display()),
            DataSource::Bundle { dir } => format!("bundle:{}", dir.display()),
        }
    }

    pub fn missing_rate(&self) -> Option<f64> {
        match self {
            DataSource::Synthetic(s) => Some(s.missing_rate),
            DataSource::Csv(c) => Some(c.missing_rate),
            DataSource::Bundle { .. } => None,
        }
    }
}

/// Build or load the dataset described by `source`.
pub fn load_dataset(source: &DataSource, seed: u64) -> Result<Dataset> {
    match source {
        DataSource::Synthetic(spec) => generate(spec, seed),
        DataSource::Csv(c) => {
            let (_, mut ds) = load_csv_dataset(&c.nodes, &c.signals, c.graph, c.splits)?;
            ds.meta.seed = seed;
            ds.degrade(c.sigma, c.missing_rate, seed)?;
            Ok(ds)
        }
        DataSource::Bundle { dir } => Dataset::load_bundle(dir),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub task: Task,
    pub model: ModelSpec,
    pub data: DataSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            return Err(Error::Config("`id` must be a nonempty plain name".into()));
        }
        match (self.task, self.data.missing_rate()) {
            (Task::Interpolate, Some(r)) if r <= 0.0 => {
                return Err(Error::Config("the interpolate task requires a positive `missing_rate`".into()))
            }
            (Task::Denoise, Some(r)) if r > 0.0 => {
                return Err(Error::Config("the denoise task must not set `missing_rate`".into()))
            }
            _ => {}
        }
        if let ModelSpec::Baseline { spec, .. } = &self.model {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.model.initial_model()?;
        self.train.validate()
    }
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub experiment_id: String,
    pub task: Task,
    pub dataset: String,
    pub model: String,
    pub variant: String,
    pub sigma: f64,
    pub missing_rate: f64,
    pub split: Split,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub param_count: usize,
    pub wall_time: f64,
    /// Chosen baseline hyperparameters as JSON, if any.
    pub details: String,
}

impl MetricsRow {
    /// `model-variant`, e.g. `GraphDAU-TV-E`.
    pub fn full_name(&self) -> String {
        if self.variant.is_empty() {
            self.model.clone()
        } else {
            format!("{}-{}", self.model, self.variant)
        }
    }
}

fn split_name(name: &str) -> (String, String) {
    match name.split_once('-') {
        Some((m, v)) => (m.to_string(), v.to_string()),
        None => (name.to_string(), String::new()),
    }
}

struct RowBase<'a> {
    id: &'a str,
    task: Task,
    dataset: String,
    ds: &'a Dataset,
}

impl RowBase<'_> {
    fn row(&self, name: &str, stats: RmseStats, params: usize, wall: f64, details: String) -> MetricsRow {
        let (model, variant) = split_name(name);
        MetricsRow {
            experiment_id: self.id.to_string(),
            task: self.task,
            dataset: self.dataset.clone(),
            model,
            variant,
            sigma: self.ds.meta.sigma,
            missing_rate: self.ds.meta.missing_rate,
            split: Split::Test,
            mean_rmse: stats.mean,
            std_rmse: stats.std,
            param_count: params,
            wall_time: wall,
            details,
        }
    }
}

/// RMSE statistics of the degraded inputs themselves.
pub fn degraded_stats(ds: &Dataset, split: Split) -> RmseStats {
    let v: Vec<f64> = ds.split(split).iter().map(|s| rmse(&s.degraded, &s.clean)).collect();
    RmseStats::from_values(&v)
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn write_plotdata(path: &Path, ds: &Dataset, restored: &[f64]) -> Result<()> {
    let s = &ds.split(Split::Test)[0];
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    w.write_record(["node", "clean", "degraded", "restored", "abs_error"])?;
    for (i, ((c, d), r)) in s.clean.iter().zip(&s.degraded).zip(restored).enumerate() {
        w.write_record([
            i.to_string(),
            c.to_string(),
            d.to_string(),
            r.to_string(),
            (r - c).abs().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Everything [`run_experiment`] produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Degraded-input row followed by the model row.
    pub rows: Vec<MetricsRow>,
    pub model: Option<Model>,
    pub baseline: Option<BaselineSpec>,
    /// `(iteration, validation RMSE)` for trained models.
    pub validation_curve: Vec<(usize, f64)>,
    pub out_dir: PathBuf,
}

/// Generate or load data, train or grid-search, evaluate on the test split
/// and write `metrics.csv`, `plotdata.csv`, and either `params.json` with
/// `history.csv` or `baseline.json` with `grid.csv` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    config.validate()?;
    create_dir(out_dir)?;
    let ds = load_dataset(&config.data, config.seed)?;
    if ds.split(Split::Test).is_empty() {
        return Err(Error::Config("test split is empty".into()));
    }
    let base = RowBase {
        id: &config.id,
        task: config.task,
        dataset: config.data.label(),
        ds: &ds,
    };
    let mut rows = vec![base.row("Noisy", degraded_stats(&ds, Split::Test), 0, 0.0, String::new())];
    let start = Instant::now();
    let test = ds.split(Split::Test);

    let mut outcome = ExperimentOutcome {
        rows: Vec::new(),
        model: None,
        baseline: None,
        validation_curve: Vec::new(),
        out_dir: out_dir.to_path_buf(),
    };
    match &config.model {
        ModelSpec::Baseline { spec, grid } => {
            let contexts = ds.contexts(Accel::Evd)?;
            let chosen = match grid {
                Some(grid) => {
                    let r = grid_search(spec, grid, ds.split(Split::Valid), &contexts)?;
                    let mut w = csv::Writer::from_path(out_dir.join("grid.csv"))?;
                    w.write_record(["point", "spec", "valid_rmse"])?;
                    for (i, (p, v)) in r.evaluated.iter().enumerate() {
                        w.write_record([i.to_string(), serde_json::to_string(p)?, v.to_string()])?;
                    }
                    w.flush().map_err(|e| Error::io(out_dir.join("grid.csv"), e))?;
                    r.best
                }
                None => spec.clone(),
            };
            let stats = evaluate_baseline(&chosen, test, &contexts)?;
            let restored = chosen.apply(&test[0].degraded, &test[0].degradation(), &contexts[test[0].graph])?;
            write_plotdata(&out_dir.join("plotdata.csv"), &ds, &restored)?;
            let details = serde_json::to_string(&chosen)?;
            let path = out_dir.join("baseline.json");
            std::fs::write(&path, serde_json::to_string_pretty(&chosen)? + "\n").map_err(|e| Error::io(&path, e))?;
            rows.push(base.row(chosen.name(), stats, 0, start.elapsed().as_secs_f64(), details));
            outcome.baseline = Some(chosen);
        }
        spec => {
            let init = spec.initial_model()?.expect("learned model");
            let contexts = ds.contexts(init.accel())?;
            let mut tc = config.train.clone();
            tc.seed = config.seed.wrapping_add(tc.seed);
            let trained = train(&init, &ds, &contexts, &tc)?;
            write_history(&out_dir.join("history.csv"), &trained.history)?;
            trained.model.save_json(&out_dir.join("params.json"))?;
            let stats = evaluate_model(&trained.model, &ds, &contexts, Split::Test)?;
            if !stats.mean.is_finite() {
                return Err(Error::Numeric("test RMSE is not finite".into()));
            }
            let restored = trained.model.restore(&contexts[test[0].graph], &test[0].degraded, &test[0].degradation())?;
            write_plotdata(&out_dir.join("plotdata.csv"), &ds, &restored)?;
            rows.push(base.row(
                &trained.model.name(),
                stats,
                trained.model.param_count(),
                start.elapsed().as_secs_f64(),
                String::new(),
            ));
            outcome.validation_curve = trained.validation_curve();
            outcome.model = Some(trained.model);
        }
    }
    write_metrics(&out_dir.join("metrics.csv"), &rows)?;
    outcome.rows = rows;
    Ok(outcome)
}

/// Apply an already-trained model to the test split of `ds` without
/// retraining. The model's acceleration path is used as is.
pub fn evaluate_transfer(model: &Model, ds: &Dataset, id: &str, task: Task, dataset: &str) -> Result<MetricsRow> {
    let start = Instant::now();
    if model.accel() == Accel::Evd {
        if let Some(g) = ds.graphs.iter().find(|g| g.n_nodes() > EVD_MAX_NODES) {
            return Err(Error::Config(format!(
                "{} uses the EVD path but the target graph has {} nodes (limit {EVD_MAX_NODES}); use Chebyshev parameters",
                model.name(),
                g.n_nodes()
            )));
        }
    }
    let contexts = ds.contexts(model.accel())?;
    let stats = evaluate_model(model, ds, &contexts, Split::Test)?;
    let base = RowBase {
        id,
        task,
        dataset: dataset.to_string(),
        ds,
    };
    Ok(base.row(&model.name(), stats, model.param_count(), start.elapsed().as_secs_f64(), String::new()))
}

/// Load parameters from `params_file` and evaluate them on `target`.
pub fn transfer_eval(params_file: &Path, target: &ExperimentConfig) -> Result<MetricsRow> {
    let model = Model::load_json(params_file)?;
    let ds = load_dataset(&target.data, target.seed)?;
    evaluate_transfer(&model, &ds, &target.id, target.task, &target.data.label())
}

/// Consolidated results written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct Report {
    pub rows: Vec<MetricsRow>,
    pub plot_files: Vec<PathBuf>,
}

fn find_named(dir: &Path, name: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_named(&p, name, out)?;
        } else if p.file_name().is_some_and(|f| f == name) {
            out.push(p);
        }
    }
    Ok(())
}

/// Gather every `metrics.csv` under `dir` into `summary.csv` and
/// `summary.md`, and copy each experiment's plot data to
/// `plotdata_<id>.csv` at the top level.
pub fn emit_report(dir: &Path) -> Result<Report> {
    let mut files = Vec::new();
    find_named(dir, "metrics.csv", &mut files)?;
    if files.is_empty() {
        return Err(Error::Config(format!("no metrics.csv found under {}", dir.display())));
    }
    let mut rows = Vec::new();
    let mut plot_files = Vec::new();
    for f in &files {
        let mut r = read_metrics(f)?;
        let parent = f.parent().unwrap_or(dir);
        let plot = parent.join("plotdata.csv");
        if let (true, Some(first)) = (plot.exists(), r.first()) {
            let target = dir.join(format!("plotdata_{}.csv", first.experiment_id));
            std::fs::copy(&plot, &target).map_err(|e| Error::io(&target, e))?;
            plot_files.push(target);
        }
        rows.append(&mut r);
    }
    rows.sort_by(|a, b| {
        (a.task, &a.dataset)
            .cmp(&(b.task, &b.dataset))
            .then(a.sigma.total_cmp(&b.sigma))
            .then(a.missing_rate.total_cmp(&b.missing_rate))
            .then(a.full_name().cmp(&b.full_name()))
            .then(a.experiment_id.cmp(&b.experiment_id))
    });
    write_metrics(&dir.join("summary.csv"), &rows)?;

    let mut md = String::from("| task | dataset | sigma | missing | model | RMSE | std | params |\n");
    md.push_str("|---|---|---|---|---|---|---|---|\n");
    for r in &rows {
        let task = if r.task == Task::Denoise { "denoise" } else { "interpolate" };
        md.push_str(&format!(
            "| {task} | {} | {} | {} | {} | {:.4} | {:.4} | {} |\n",
            r.dataset,
            r.sigma,
            r.missing_rate,
            r.full_name(),
            r.mean_rmse,
            r.std_rmse,
            r.param_count
        ));
    }
    let md_path = dir.join("summary.md");
    std::fs::write(&md_path, md).map_err(|e| Error::io(&md_path, e))?;
    Ok(Report { rows, plot_files })
}
