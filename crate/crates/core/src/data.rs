//! Synthetic signal families, degradations, dataset splits and on-disk
//! bundles.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::context::{Accel, GraphContext};
use crate::error::{Error, Result};
use crate::graph::{extract_subgraph, knn_graph, read_nodes_csv, synth_graph, Graph, SigmaMode, SynthKind};
use crate::nest::DegradationOp;
use crate::par;
use crate::partition::{partition, Partition};
use crate::spectral::eigendecompose;

const STREAM_SIGNAL: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_MASK: u64 = 3;

pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    /// Piecewise constant: one integer in `1..=6` per cluster.
    Pwc,
    /// Piecewise smooth: per-cluster span of the first three subgraph eigenvectors.
    Pws,
    /// Globally smooth: span of the first five graph eigenvectors.
    Gs,
}

/// Precomputed bases for repeated draws of one signal family on one graph.
#[derive(Debug, Clone)]
pub struct SignalGenerator {
    kind: SignalKind,
    n: usize,
    labels: Vec<usize>,
    /// Per block: node indices and a column-major basis restricted to them.
    blocks: Vec<(Vec<usize>, Vec<Vec<f64>>)>,
}

fn leading_vectors(g: &Graph, count: usize) -> Result<Vec<Vec<f64>>> {
    let d = eigendecompose(&g.laplacian())?;
    Ok((0..count.min(g.n_nodes())).map(|k| d.vector(k)).collect())
}

impl SignalGenerator {
    pub fn new(kind: SignalKind, g: &Graph, part: Option<&Partition>) -> Result<Self> {
        let n = g.n_nodes();
        let need_part = || {
            part.ok_or_else(|| Error::param(format!("{kind:?} signals require a partition")))
        };
        let mut gen = Self {
            kind,
            n,
            labels: Vec::new(),
            blocks: Vec::new(),
        };
        match kind {
            SignalKind::Pwc => {
                let p = need_part()?;
                Error::check_len(n, p.labels().len(), "partition labels")?;
                gen.labels = p.labels().to_vec();
                gen.blocks = (0..p.k()).map(|c| (p.members(c), Vec::new())).collect();
            }
            SignalKind::Pws => {
                let p = need_part()?;
                Error::check_len(n, p.labels().len(), "partition labels")?;
                for c in 0..p.k() {
                    let nodes = p.members(c);
                    if nodes.is_empty() {
                        return Err(Error::param(format!("cluster {c} is empty")));
                    }
                    let (sub, _) = extract_subgraph(g, &nodes)?;
                    gen.blocks.push((nodes, leading_vectors(&sub, 3)?));
                }
            }
            SignalKind::Gs => {
                gen.blocks.push(((0..n).collect(), leading_vectors(g, 5)?));
            }
        }
        Ok(gen)
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    /// Draw a signal with expansion coefficients uniform on `[0, 5]`.
    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let mut rng = seeded_rng(seed, STREAM_SIGNAL);
        let mut x = vec![0.0; self.n];
        match self.kind {
            SignalKind::Pwc => {
                let values: Vec<f64> = (0..self.blocks.len())
                    .map(|_| rng.random_range(1..=6) as f64)
                    .collect();
                for (xi, &l) in x.iter_mut().zip(&self.labels) {
                    *xi = values[l];
                }
            }
            SignalKind::Pws | SignalKind::Gs => {
                for (nodes, basis) in &self.blocks {
                    let coeffs: Vec<f64> = basis.iter().map(|_| rng.random_range(0.0..=5.0)).collect();
                    self.synth_block(&mut x, nodes, basis, &coeffs);
                }
            }
        }
        x
    }

    /// Signal from explicit per-block coefficients (`Pws`, `Gs`).
    pub fn from_coefficients(&self, coeffs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if self.kind == SignalKind::Pwc {
            return Err(Error::param("pwc signals have no expansion coefficients"));
        }
        Error::check_len(self.blocks.len(), coeffs.len(), "coefficient blocks")?;
        let mut x = vec![0.0; self.n];
        for ((nodes, basis), c) in self.blocks.iter().zip(coeffs) {
            Error::check_len(basis.len(), c.len(), "block coefficients")?;
            self.synth_block(&mut x, nodes, basis, c);
        }
        Ok(x)
    }

    fn synth_block(&self, x: &mut [f64], nodes: &[usize], basis: &[Vec<f64>], coeffs: &[f64]) {
        for (v, c) in basis.iter().zip(coeffs) {
            for (&node, vi) in nodes.iter().zip(v) {
                x[node] += c * vi;
            }
        }
    }
}

/// One draw of a signal family; see [`SignalGenerator`] for repeated draws.
pub fn gen_signal(kind: SignalKind, g: &Graph, part: Option<&Partition>, seed: u64) -> Result<Vec<f64>> {
    Ok(SignalGenerator::new(kind, g, part)?.sample(seed))
}

/// `x + n` with `n ~ N(0, σ²I)`.
pub fn add_awgn(x: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("noise level must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(x.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
    let mut rng = seeded_rng(seed, STREAM_NOISE);
    Ok(x.iter().map(|v| v + normal.sample(&mut rng)).collect())
}

/// Mask with exactly `round(rate·n)` unobserved nodes chosen uniformly.
pub fn make_mask(n: usize, missing_rate: f64, seed: u64) -> Result<DegradationOp> {
    if !(0.0..1.0).contains(&missing_rate) {
        return Err(Error::param(format!("missing rate must lie in [0, 1), got {missing_rate}")));
    }
    let missing = (missing_rate * n as f64).round() as usize;
    if missing == 0 {
        return Ok(DegradationOp::Identity);
    }
    let mut rng = seeded_rng(seed, STREAM_MASK);
    let mut observed = vec![true; n];
    for i in sample_indices(&mut rng, n, missing) {
        observed[i] = false;
    }
    Ok(DegradationOp::Mask(observed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// Sample counts; samples are stored train first, then valid, then test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl Splits {
    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }

    pub fn range(&self, split: Split) -> std::ops::Range<usize> {
        match split {
            Split::Train => 0..self.train,
            Split::Valid => self.train..self.train + self.valid,
            Split::Test => self.train + self.valid..self.total(),
        }
    }

    pub fn split_of(&self, index: usize) -> Split {
        if index < self.train {
            Split::Train
        } else if index < self.train + self.valid {
            Split::Valid
        } else {
            Split::Test
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Index into [`Dataset::graphs`].
    pub graph: usize,
    pub clean: Vec<f64>,
    pub degraded: Vec<f64>,
    /// Observed-node flags; `None` means fully observed.
    pub mask: Option<Vec<bool>>,
}

impl Sample {
    pub fn degradation(&self) -> DegradationOp {
        match &self.mask {
            Some(m) => DegradationOp::Mask(m.clone()),
            None => DegradationOp::Identity,
        }
    }
}

/// How a dataset came to be; enough to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    #[serde(default)]
    pub signal: Option<SignalKind>,
    pub sigma: f64,
    pub missing_rate: f64,
    pub seed: u64,
    pub splits: Splits,
    #[serde(default)]
    pub synth: Option<SynthSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub samples: Vec<Sample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Sample] {
        &self.samples[self.meta.splits.range(split)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.meta.splits.total() != self.samples.len() {
            return Err(Error::Config(format!(
                "splits cover {} samples but the dataset holds {}",
                self.meta.splits.total(),
                self.samples.len()
            )));
        }
        for (i, s) in self.samples.iter().enumerate() {
            let g = self
                .graphs
                .get(s.graph)
                .ok_or_else(|| Error::Config(format!("sample {i} refers to missing graph {}", s.graph)))?;
            let n = g.n_nodes();
            let ok = s.clean.len() == n
                && s.degraded.len() == n
                && s.mask.as_ref().is_none_or(|m| m.len() == n);
            if !ok {
                return Err(Error::Config(format!(
                    "sample {i} signal lengths do not match its {n}-node graph"
                )));
            }
        }
        Ok(())
    }

    /// Replace every degraded signal by masked AWGN of the clean one. Sample
    /// `i` draws noise and mask from seed `seed + i`.
    pub fn degrade(&mut self, sigma: f64, missing_rate: f64, seed: u64) -> Result<()> {
        let graphs = &self.graphs;
        let out = par::map_indexed(self.samples.len(), |i| -> Result<(Vec<f64>, Option<Vec<bool>>)> {
            let s = &self.samples[i];
            let sd = seed.wrapping_add(i as u64);
            let noisy = add_awgn(&s.clean, sigma, sd)?;
            match make_mask(graphs[s.graph].n_nodes(), missing_rate, sd)? {
                DegradationOp::Identity => Ok((noisy, None)),
                DegradationOp::Mask(m) => {
                    let y = noisy.iter().zip(&m).map(|(v, &o)| if o { *v } else { 0.0 }).collect();
                    Ok((y, Some(m)))
                }
            }
        });
        for (s, r) in self.samples.iter_mut().zip(out) {
            let (y, m) = r?;
            s.degraded = y;
            s.mask = m;
        }
        self.meta.sigma = sigma;
        self.meta.missing_rate = missing_rate;
        Ok(())
    }

    /// Graph contexts for every graph, index-aligned with [`Dataset::graphs`].
    pub fn contexts(&self, accel: Accel) -> Result<Vec<GraphContext>> {
        par::map_indexed(self.graphs.len(), |i| GraphContext::new(&self.graphs[i], accel))
            .into_iter()
            .collect()
    }

    /// Write `graph_<i>.json`, `signals.csv`, `degraded.csv`, `masks.csv`
    /// (when any sample is masked) and `meta.json` into `dir`.
    pub fn save_bundle(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, g) in self.graphs.iter().enumerate() {
            g.save_json(&dir.join(format!("graph_{i}.json")))?;
        }
        let width = self.graphs.iter().map(Graph::n_nodes).max().unwrap_or(0);
        let fmt = |v: &f64| v.to_string();
        write_wide(&dir.join("signals.csv"), width, self.samples.iter().map(|s| (s.graph, s.clean.iter().map(fmt).collect())))?;
        write_wide(&dir.join("degraded.csv"), width, self.samples.iter().map(|s| (s.graph, s.degraded.iter().map(fmt).collect())))?;
        if self.samples.iter().any(|s| s.mask.is_some()) {
            write_wide(
                &dir.join("masks.csv"),
                width,
                self.samples.iter().map(|s| {
                    let n = s.clean.len();
                    let m = s.mask.clone().unwrap_or_else(|| vec![true; n]);
                    (s.graph, m.iter().map(|&o| if o { "1".into() } else { "0".into() }).collect())
                }),
            )?;
        }
        let meta = dir.join("meta.json");
        std::fs::write(&meta, serde_json::to_string_pretty(&self.meta)? + "\n").map_err(|e| Error::io(&meta, e))
    }

    pub fn load_bundle(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta.json");
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: DatasetMeta = serde_json::from_str(&text)?;
        let clean = read_wide(&dir.join("signals.csv"))?;
        let degraded = read_wide(&dir.join("degraded.csv"))?;
        let masks_path = dir.join("masks.csv");
        let masks = if masks_path.exists() { Some(read_wide(&masks_path)?) } else { None };
        if degraded.len() != clean.len() || masks.as_ref().is_some_and(|m| m.len() != clean.len()) {
            return Err(Error::Config(format!("bundle {} has inconsistent sample counts", dir.display())));
        }
        let n_graphs = clean.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let graphs = (0..n_graphs)
            .map(|i| Graph::load_json(&dir.join(format!("graph_{i}.json"))))
            .collect::<Result<Vec<_>>>()?;
        let mut samples = Vec::with_capacity(clean.len());
        for (i, (g, c)) in clean.into_iter().enumerate() {
            let mask = masks.as_ref().map(|m| m[i].1.iter().map(|&v| v != 0.0).collect::<Vec<bool>>());
            samples.push(Sample {
                graph: g,
                clean: c,
                degraded: degraded[i].1.clone(),
                mask: mask.filter(|m| m.iter().any(|o| !o)),
            });
        }
        let ds = Dataset { graphs, samples, meta };
        ds.validate()?;
        Ok(ds)
    }
}

fn write_wide(path: &Path, width: usize, rows: impl Iterator<Item = (usize, Vec<String>)>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut header = vec!["sample_id".to_string(), "graph".to_string()];
    header.extend((0..width).map(|i| i.to_string()));
    w.write_record(&header)?;
    for (i, (g, vals)) in rows.enumerate() {
        let mut rec = vec![i.to_string(), g.to_string()];
        rec.extend(vals);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_wide(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let location = format!("{} row {}", path.display(), row + 1);
        let parse = |c: &str| {
            c.trim().parse::<f64>().map_err(|_| Error::Parse {
                location: location.clone(),
                message: format!("non-numeric cell `{c}`"),
            })
        };
        let g = rec.get(1).ok_or_else(|| Error::Parse {
            location: location.clone(),
            message: "missing graph column".into(),
        })?;
        let g = g.trim().parse::<usize>().map_err(|_| Error::Parse {
            location: location.clone(),
            message: format!("invalid graph index `{g}`"),
        })?;
        let vals = rec.iter().skip(2).map(parse).collect::<Result<Vec<f64>>>()?;
        out.push((g, vals));
    }
    Ok(out)
}

/// Graph construction for CSV ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvGraphConfig {
    pub k: usize,
    #[serde(default = "default_weight")]
    pub weight: SigmaMode,
}

fn default_weight() -> SigmaMode {
    SigmaMode::MeanDistance
}

/// Build a kNN graph from `id,x,y[,z]` coordinates and read a wide signal
/// matrix (`sample_id,<node ids…>`, one row per sample). Columns are
/// matched to nodes by id. Signals are clean; degraded copies are set equal
/// until [`Dataset::degrade`] is applied.
pub fn load_csv_dataset(
    nodes_csv: &Path,
    signals_csv: &Path,
    graph_cfg: CsvGraphConfig,
    splits: Splits,
) -> Result<(Graph, Dataset)> {
    let (ids, coords) = read_nodes_csv(nodes_csv)?;
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if index.len() != ids.len() {
        return Err(Error::Parse {
            location: nodes_csv.display().to_string(),
            message: "duplicate node ids".into(),
        });
    }
    let g = knn_graph(&coords, graph_cfg.k, graph_cfg.weight)?;
    let n = g.n_nodes();

    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(signals_csv)
        .map_err(|e| Error::Parse {
            location: signals_csv.display().to_string(),
            message: e.to_string(),
        })?;
    let headers = rdr.headers()?.clone();
    let header_loc = format!("{} header", signals_csv.display());
    if headers.get(0).map(str::trim) != Some("sample_id") {
        return Err(Error::Parse {
            location: header_loc,
            message: "first column must be `sample_id`".into(),
        });
    }
    let mut column_node = Vec::with_capacity(headers.len() - 1);
    let mut seen = vec![false; n];
    for h in headers.iter().skip(1) {
        let &node = index.get(h.trim()).ok_or_else(|| Error::Parse {
            location: header_loc.clone(),
            message: format!("node id `{h}` not present in the nodes file"),
        })?;
        if std::mem::replace(&mut seen[node], true) {
            return Err(Error::Parse {
                location: header_loc.clone(),
                message: format!("node id `{h}` repeated"),
            });
        }
        column_node.push(node);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse {
            location: header_loc,
            message: format!("node id `{}` has no signal column", ids[missing]),
        });
    }

    let mut samples = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let location = format!("{} row {}", signals_csv.display(), row + 1);
        if rec.len() != n + 1 {
            return Err(Error::Parse {
                location,
                message: format!("expected {} columns, found {}", n + 1, rec.len()),
            });
        }
        let mut x = vec![0.0; n];
        for (cell, &node) in rec.iter().skip(1).zip(&column_node) {
            let c = cell.trim();
            if c.is_empty() {
                return Err(Error::Parse {
                    location,
                    message: format!("missing value for node `{}`", ids[node]),
                });
            }
            x[node] = c.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                location: location.clone(),
                message: format!("non-numeric cell `{c}`"),
            })?;
        }
        samples.push(Sample {
            graph: 0,
            degraded: x.clone(),
            clean: x,
            mask: None,
        });
    }
    let ds = Dataset {
        graphs: vec![g.clone()],
        samples,
        meta: DatasetMeta {
            source: format!("csv:{}", signals_csv.display()),
            signal: None,
            sigma: 0.0,
            missing_rate: 0.0,
            seed: 0,
            splits,
            synth: None,
        },
    };
    ds.validate()?;
    Ok((g, ds))
}

/// Recipe for a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub graph: SynthKind,
    pub n: usize,
    pub signal: SignalKind,
    /// Partition size for `pwc`/`pws`. Defaults to the generator's own
    /// clusters on community graphs.
    #[serde(default)]
    pub clusters: Option<usize>,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub missing_rate: f64,
    pub splits: Splits,
    /// A fresh graph per sample instead of one shared graph.
    #[serde(default)]
    pub perturbed: bool,
}

fn signal_partition(spec: &SynthSpec, g: &crate::graph::SynthGraph, seed: u64) -> Result<Option<Partition>> {
    if spec.signal == SignalKind::Gs {
        return Ok(None);
    }
    match (spec.clusters, &g.clusters) {
        (None, Some(p)) => Ok(Some(p.clone())),
        (Some(k), _) => partition(&g.graph, k, seed).map(Some),
        (None, None) => Err(Error::Config(format!(
            "{:?} signals on this graph need `clusters`",
            spec.signal
        ))),
    }
}

/// Generate graphs, clean signals and degradations. The graph uses `seed`
/// (or `seed + i` per sample when perturbed); sample `i` draws its signal,
/// noise and mask from `seed + i`.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    let total = spec.splits.total();
    if total == 0 {
        return Err(Error::Config("dataset has no samples".into()));
    }
    let (graphs, samples) = if spec.perturbed {
        let out = par::map_indexed(total, |i| -> Result<(Graph, Vec<f64>)> {
            let sd = seed.wrapping_add(i as u64);
            let sg = synth_graph(spec.graph, spec.n, sd)?;
            let part = signal_partition(spec, &sg, sd)?;
            let x = gen_signal(spec.signal, &sg.graph, part.as_ref(), sd)?;
            Ok((sg.graph, x))
        });
        let mut graphs = Vec::with_capacity(total);
        let mut samples = Vec::with_capacity(total);
        for (i, r) in out.into_iter().enumerate() {
            let (g, x) = r?;
            graphs.push(g);
            samples.push(Sample {
                graph: i,
                degraded: x.clone(),
                clean: x,
                mask: None,
            });
        }
        (graphs, samples)
    } else {
        let sg = synth_graph(spec.graph, spec.n, seed)?;
        let part = signal_partition(spec, &sg, seed)?;
        let gen = SignalGenerator::new(spec.signal, &sg.graph, part.as_ref())?;
        let samples = par::map_indexed(total, |i| {
            let x = gen.sample(seed.wrapping_add(i as u64));
            Sample {
                graph: 0,
                degraded: x.clone(),
                clean: x,
                mask: None,
            }
        });
        (vec![sg.graph], samples)
    };
    let mut ds = Dataset {
        graphs,
        samples,
        meta: DatasetMeta {
            source: "synthetic".into(),
            signal: Some(spec.signal),
            sigma: 0.0,
            missing_rate: 0.0,
            seed,
            splits: spec.splits,
            synth: Some(spec.clone()),
        },
    };
    ds.degrade(spec.sigma, spec.missing_rate, seed)?;
    Ok(ds)
}

/// Mean and population standard deviation of per-sample RMSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseStats {
    pub mean: f64,
    pub std: f64,
}

impl RmseStats {
    pub fn from_values(v: &[f64]) -> Self {
        if v.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Per-sample RMSE of `restore` against the clean signals, evaluated in
/// parallel. `contexts` is index-aligned with the dataset graphs.
pub fn evaluate_rmse<F>(samples: &[Sample], contexts: &[GraphContext], restore: F) -> Result<Vec<f64>>
where
    F: Fn(&Sample, &GraphContext) -> Result<Vec<f64>> + Sync,
{
    par::map_indexed(samples.len(), |i| {
        let s = &samples[i];
        let ctx = contexts
            .get(s.graph)
            .ok_or_else(|| Error::Config(format!("no graph context for graph {}", s.graph)))?;
        let x = restore(s, ctx)?;
        Ok(crate::linalg::rmse(&x, &s.clean))
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn awgn_examples() {
        let x = vec![1.0, 2.0, 3.0];
        assert_eq!(add_awgn(&x, 0.0, 1).unwrap(), x);
        assert_eq!(add_awgn(&x, 0.5, 9).unwrap(), add_awgn(&x, 0.5, 9).unwrap());
        assert_ne!(add_awgn(&x, 0.5, 9).unwrap(), add_awgn(&x, 0.5, 10).unwrap());
        assert!(add_awgn(&x, -1.0, 0).is_err());
    }

    #[test]
    fn mask_examples() {
        assert_eq!(make_mask(10, 0.0, 3).unwrap(), DegradationOp::Identity);
        let m = make_mask(250, 0.5, 3).unwrap();
        assert_eq!(250 - m.observed_count(250), 125);
        assert!(make_mask(10, 1.0, 0).is_err());
        let masks: Vec<_> = (0..10).map(|s| make_mask(250, 0.5, s).unwrap()).collect();
        for i in 0..10 {
            for j in 0..i {
                assert_ne!(masks[i], masks[j]);
            }
        }
    }

    #[test]
    fn pwc_values_per_cluster() {
        let g = build_graph(4, vec![(0, 1, 1.0), (2, 3, 1.0), (1, 2, 1.0)]).unwrap();
        let p = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        let x = gen_signal(SignalKind::Pwc, &g, Some(&p), 4).unwrap();
        assert_eq!(x[0], x[1]);
        assert_eq!(x[2], x[3]);
        assert!(x.iter().all(|v| (1.0..=6.0).contains(v) && v.fract() == 0.0));
        assert!(gen_signal(SignalKind::Pwc, &g, None, 4).is_err());
    }

    #[test]
    fn gs_dc_coefficient_is_constant() {
        let g = build_graph(4, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0)]).unwrap();
        let gen = SignalGenerator::new(SignalKind::Gs, &g, None).unwrap();
        let x = gen.from_coefficients(&[vec![3.0, 0.0, 0.0, 0.0]]).unwrap();
        for v in &x {
            assert!((v - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive() {
        let s = Splits { train: 3, valid: 2, test: 1 };
        let all: Vec<Split> = (0..6).map(|i| s.split_of(i)).collect();
        assert_eq!(all.iter().filter(|&&x| x == Split::Train).count(), 3);
        assert_eq!(s.range(Split::Test), 5..6);
    }

    #[test]
    fn community_generation_is_deterministic() {
        let spec = SynthSpec {
            graph: SynthKind::community(3),
            n: 60,
            signal: SignalKind::Pwc,
            clusters: None,
            sigma: 0.5,
            missing_rate: 0.3,
            splits: Splits { train: 4, valid: 2, test: 2 },
            perturbed: false,
        };
        let a = generate(&spec, 11).unwrap();
        let b = generate(&spec, 11).unwrap();
        assert_eq!(a, b);
        for s in &a.samples {
            let m = s.mask.as_ref().unwrap();
            assert_eq!(m.iter().filter(|o| !**o).count(), 18);
            for ((y, o), c) in s.degraded.iter().zip(m).zip(&s.clean) {
                if !o {
                    assert_eq!(*y, 0.0);
                } else {
                    assert_ne!(y, c);
                }
            }
        }
    }
}
