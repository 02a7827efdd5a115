//! Weighted undirected graphs: validation, operators, kNN construction,
//! synthetic generators and the on-disk JSON / CSV formats.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::sparse::{IncidenceOperator, SparseSymmetricMatrix};

/// Sparse weighted undirected graph without self loops.
///
/// Edges are stored canonically with `i < j`; their order is the row order of
/// the incidence operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
    coords: Option<Vec<Vec<f64>>>,
}

impl Graph {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        build_graph(n_nodes, edges)
    }

    pub fn with_coords(mut self, coords: Vec<Vec<f64>>) -> Result<Self> {
        if coords.len() != self.n_nodes {
            return Err(Error::graph(format!(
                "{} coordinates for {} nodes",
                coords.len(),
                self.n_nodes
            )));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_nodes];
        for &(i, j, w) in &self.edges {
            d[i] += w;
            d[j] += w;
        }
        d
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees().into_iter().fold(0.0, f64::max)
    }

    /// Combinatorial Laplacian `L = D − W`.
    pub fn laplacian(&self) -> SparseSymmetricMatrix {
        let mut trip = Vec::with_capacity(4 * self.edges.len() + self.n_nodes);
        for (i, d) in self.degrees().into_iter().enumerate() {
            trip.push((i, i, d));
        }
        for &(i, j, w) in &self.edges {
            trip.push((i, j, -w));
            trip.push((j, i, -w));
        }
        SparseSymmetricMatrix::from_triplets(self.n_nodes, &trip)
            .expect("graph Laplacian is symmetric by construction")
    }

    pub fn incidence(&self) -> IncidenceOperator {
        IncidenceOperator::new(self.n_nodes, &self.edges)
    }

    /// Connected components as sorted node lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut dsu = DisjointSet::new(self.n_nodes);
        for &(i, j, _) in &self.edges {
            dsu.union(i, j);
        }
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); self.n_nodes];
        for v in 0..self.n_nodes {
            by_root[dsu.find(v)].push(v);
        }
        let mut comps: Vec<Vec<usize>> = by_root.into_iter().filter(|c| !c.is_empty()).collect();
        comps.sort_by_key(|c| c[0]);
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.n_nodes <= 1 || self.components().len() == 1
    }

    /// Relabel nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        check_permutation(perm, self.n_nodes)?;
        let edges = self
            .edges
            .iter()
            .map(|&(i, j, w)| (perm[i], perm[j], w))
            .collect();
        let mut g = build_graph(self.n_nodes, edges)?;
        if let Some(c) = &self.coords {
            let mut nc = vec![Vec::new(); self.n_nodes];
            for (i, p) in c.iter().enumerate() {
                nc[perm[i]] = p.clone();
            }
            g.coords = Some(nc);
        }
        Ok(g)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            n: self.n_nodes,
            edges: self.edges.iter().map(|&(i, j, w)| (i, j, w)).collect(),
            coords: self.coords.clone(),
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_file())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Graph> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: GraphFile = serde_json::from_str(&text)?;
        file.into_graph()
    }
}

/// JSON graph format `{"n": int, "edges": [[i,j,w],...], "coords": [[x,y],...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
}

impl GraphFile {
    pub fn into_graph(self) -> Result<Graph> {
        let g = build_graph(self.n, self.edges)?;
        match self.coords {
            Some(c) => g.with_coords(c),
            None => Ok(g),
        }
    }
}

/// Validate and canonicalise an edge list into a [`Graph`].
pub fn build_graph(n_nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Graph> {
    if n_nodes == 0 {
        return Err(Error::graph("graph must have at least one node"));
    }
    let mut seen = HashSet::with_capacity(edges.len());
    let mut canon = Vec::with_capacity(edges.len());
    for (i, j, w) in edges {
        if i >= n_nodes || j >= n_nodes {
            return Err(Error::graph(format!(
                "edge ({i},{j}) out of range for {n_nodes} nodes"
            )));
        }
        if i == j {
            return Err(Error::graph(format!("self loop at node {i}")));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::graph(format!(
                "edge ({i},{j}) has non-positive weight {w}"
            )));
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        if !seen.insert((a, b)) {
            return Err(Error::graph(format!("duplicate edge ({a},{b})")));
        }
        canon.push((a, b, w));
    }
    Ok(Graph {
        n_nodes,
        edges: canon,
        coords: None,
    })
}

/// Laplacian and incidence operator of a graph.
pub fn graph_operators(g: &Graph) -> (SparseSymmetricMatrix, IncidenceOperator) {
    (g.laplacian(), g.incidence())
}

/// Kernel bandwidth rule for kNN graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// σ is the mean distance from each point to its k nearest neighbours.
    MeanDistance,
    Fixed(f64),
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetrised k-nearest-neighbour graph with Gaussian weights
/// `w = exp(−d² / 2σ²)`. An edge exists if either endpoint selects the other.
pub fn knn_graph(coords: &[Vec<f64>], k: usize, sigma_mode: SigmaMode) -> Result<Graph> {
    knn_graph_with_sigma(coords, k, sigma_mode).map(|(g, _)| g)
}

fn knn_graph_with_sigma(
    coords: &[Vec<f64>],
    k: usize,
    sigma_mode: SigmaMode,
) -> Result<(Graph, f64)> {
    let n = coords.len();
    if n == 0 {
        return Err(Error::graph("no points"));
    }
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if k >= n {
        return Err(Error::param(format!("k = {k} requires more than {n} points")));
    }
    let dim = coords[0].len();
    if coords.iter().any(|c| c.len() != dim || c.iter().any(|v| !v.is_finite())) {
        return Err(Error::graph("coordinates must share one dimension and be finite"));
    }

    let neighbours: Vec<Vec<(usize, f64)>> = crate::par::map_indexed(n, |i| {
        let mut d: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, sq_dist(&coords[i], &coords[j])))
            .collect();
        d.select_nth_unstable_by(k - 1, |a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        d.truncate(k);
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        d
    });
    if let Some((i, &(j, _))) = neighbours
        .iter()
        .enumerate()
        .find_map(|(i, nb)| nb.iter().find(|p| p.1 == 0.0).map(|p| (i, p)))
    {
        return Err(Error::graph(format!("duplicate points at nodes {i} and {j}")));
    }

    let sigma = match sigma_mode {
        SigmaMode::Fixed(s) if s > 0.0 => s,
        SigmaMode::Fixed(s) => return Err(Error::param(format!("sigma must be positive, got {s}"))),
        SigmaMode::MeanDistance => {
            let total: f64 = neighbours.iter().flatten().map(|p| p.1.sqrt()).sum();
            total / (n * k) as f64
        }
    };

    let mut pairs = BTreeSet::new();
    for (i, nb) in neighbours.iter().enumerate() {
        for &(j, _) in nb {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(i, j)| {
            let d2 = sq_dist(&coords[i], &coords[j]);
            (i, j, (-d2 / (2.0 * sigma * sigma)).exp())
        })
        .collect();
    Ok((build_graph(n, edges)?.with_coords(coords.to_vec())?, sigma))
}

/// Synthetic graph families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynthKind {
    /// Dense random clusters joined by sparse inter-cluster edges, unit weights.
    Community {
        clusters: usize,
        #[serde(default = "default_p_in")]
        p_in: f64,
        #[serde(default = "default_p_out")]
        p_out: f64,
    },
    /// Uniform points in the unit square joined by a Gaussian-weighted kNN graph.
    Sensor {
        #[serde(default = "default_sensor_k")]
        k: usize,
    },
}

fn default_p_in() -> f64 {
    0.3
}
fn default_p_out() -> f64 {
    0.01
}
fn default_sensor_k() -> usize {
    6
}

impl SynthKind {
    pub fn community(clusters: usize) -> Self {
        SynthKind::Community {
            clusters,
            p_in: default_p_in(),
            p_out: default_p_out(),
        }
    }

    pub fn sensor() -> Self {
        SynthKind::Sensor {
            k: default_sensor_k(),
        }
    }
}

/// A generated graph together with its ground-truth clusters, when the
/// generator defines them.
#[derive(Debug, Clone)]
pub struct SynthGraph {
    pub graph: Graph,
    pub clusters: Option<Partition>,
}

/// Generate a connected synthetic graph; a pure function of its arguments.
pub fn synth_graph(kind: SynthKind, n: usize, seed: u64) -> Result<SynthGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SynthKind::Community {
            clusters,
            p_in,
            p_out,
        } => {
            if clusters == 0 || n < clusters {
                return Err(Error::param(format!(
                    "community graph needs n >= clusters >= 1 (n = {n}, clusters = {clusters})"
                )));
            }
            if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
                return Err(Error::param("edge probabilities must lie in [0, 1]"));
            }
            let labels: Vec<usize> = (0..n).map(|i| i * clusters / n).collect();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let p = if labels[i] == labels[j] { p_in } else { p_out };
                    if rng.random::<f64>() < p {
                        edges.push((i, j, 1.0));
                    }
                }
            }
            let mut graph = build_graph(n, edges)?;
            // Chain any leftover components through their smallest members.
            let comps = graph.components();
            if comps.len() > 1 {
                let mut edges = graph.edges.clone();
                for pair in comps.windows(2) {
                    edges.push((pair[0][0], pair[1][0], 1.0));
                }
                graph = build_graph(n, edges)?;
            }
            let clusters = Partition::new(labels, clusters)?;
            Ok(SynthGraph {
                graph,
                clusters: Some(clusters),
            })
        }
        SynthKind::Sensor { k } => {
            if n < 2 {
                return Err(Error::param("sensor graph needs at least 2 nodes"));
            }
            let k = k.min(n - 1).max(1);
            let coords: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
                .collect();
            let (g, sigma) = knn_graph_with_sigma(&coords, k, SigmaMode::MeanDistance)?;
            Ok(SynthGraph {
                graph: connect_nearest(g, sigma)?,
                clusters: None,
            })
        }
    }
}

/// Repeatedly join the component holding node 0 to its geometrically closest
/// outside node until the graph is connected.
fn connect_nearest(mut g: Graph, sigma: f64) -> Result<Graph> {
    let coords = g.coords.clone().expect("sensor graphs carry coordinates");
    loop {
        let comps = g.components();
        if comps.len() <= 1 {
            return Ok(g);
        }
        let inside: HashSet<usize> = comps[0].iter().copied().collect();
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for &a in &comps[0] {
            for b in (0..g.n_nodes).filter(|b| !inside.contains(b)) {
                let d2 = sq_dist(&coords[a], &coords[b]);
                if d2 < best.2 {
                    best = (a, b, d2);
                }
            }
        }
        let (a, b, d2) = best;
        let mut edges = g.edges.clone();
        edges.push((a, b, (-d2 / (2.0 * sigma * sigma)).exp().max(f64::MIN_POSITIVE)));
        g = build_graph(g.n_nodes, edges)?.with_coords(coords.clone())?;
    }
}

/// Induced subgraph on `nodes`, plus the map from local to global indices.
pub fn extract_subgraph(g: &Graph, nodes: &[usize]) -> Result<(Graph, Vec<usize>)> {
    if nodes.is_empty() {
        return Err(Error::graph("cannot extract an empty subgraph"));
    }
    let mut local = vec![usize::MAX; g.n_nodes];
    for (li, &gi) in nodes.iter().enumerate() {
        if gi >= g.n_nodes {
            return Err(Error::graph(format!("node {gi} out of range")));
        }
        local[gi] = li;
    }
    let edges = g
        .edges
        .iter()
        .filter(|&&(i, j, _)| local[i] != usize::MAX && local[j] != usize::MAX)
        .map(|&(i, j, w)| (local[i], local[j], w))
        .collect();
    let mut sub = build_graph(nodes.len(), edges)?;
    if let Some(c) = &g.coords {
        sub.coords = Some(nodes.iter().map(|&i| c[i].clone()).collect());
    }
    Ok((sub, nodes.to_vec()))
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::param(format!("permutation of length {} for {n} nodes", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::param("not a permutation"));
        }
    }
    Ok(())
}

/// Read node coordinates from a CSV with header `id,x,y[,z]`.
/// Returns ids in file order and the coordinates.
pub fn read_nodes_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
    let headers = rdr.headers()?.clone();
    let dim = headers.len().saturating_sub(1);
    if headers.get(0) != Some("id") || !(2..=3).contains(&dim) {
        return Err(Error::Parse {
            location: format!("{} header", path.display()),
            message: "expected `id,x,y[,z]`".into(),
        });
    }
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let location = format!("{} row {}", path.display(), row + 1);
        if rec.len() != dim + 1 {
            return Err(Error::Parse {
                location,
                message: format!("expected {} columns, found {}", dim + 1, rec.len()),
            });
        }
        ids.push(rec[0].trim().to_string());
        let p = rec
            .iter()
            .skip(1)
            .map(|c| {
                c.trim().parse::<f64>().map_err(|_| Error::Parse {
                    location: location.clone(),
                    message: format!("non-numeric coordinate `{c}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        coords.push(p);
    }
    Ok((ids, coords))
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graphs() {
        let p2 = build_graph(2, vec![(0, 1, 1.0)]).unwrap();
        assert_eq!(p2.n_edges(), 1);
        let p3 = build_graph(3, vec![(0, 1, 1.0), (2, 1, 1.0)]).unwrap();
        assert_eq!(p3.edges(), &[(0, 1, 1.0), (1, 2, 1.0)]);
        assert_eq!(p3.degrees(), vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn invalid_edges_rejected() {
        assert!(matches!(build_graph(2, vec![(0, 0, 1.0)]), Err(Error::InvalidGraph(m)) if m.contains("self loop")));
        assert!(build_graph(2, vec![(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(build_graph(2, vec![(0, 1, 0.0)]).is_err());
        assert!(build_graph(2, vec![(0, 1, -1.0)]).is_err());
        assert!(build_graph(2, vec![(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn operators_of_small_graphs() {
        let p2 = build_graph(2, vec![(0, 1, 1.0)]).unwrap();
        let (l, m) = graph_operators(&p2);
        assert_eq!(l.to_dense().as_slice(), &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(m.to_dense().as_slice(), &[1.0, -1.0]);

        let p2w = build_graph(2, vec![(0, 1, 4.0)]).unwrap();
        let (l, m) = graph_operators(&p2w);
        assert_eq!(m.to_dense().as_slice(), &[2.0, -2.0]);
        assert_eq!(l.to_dense().as_slice(), &[4.0, -4.0, -4.0, 4.0]);

        let empty = build_graph(3, vec![]).unwrap();
        let (l, m) = graph_operators(&empty);
        assert!(l.to_dense().as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(m.n_edges(), 0);
    }

    #[test]
    fn knn_collinear() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let g = knn_graph(&pts, 1, SigmaMode::MeanDistance).unwrap();
        let w = (-0.5f64).exp();
        assert_eq!(g.edges(), &[(0, 1, w), (1, 2, w)]);
    }

    #[test]
    fn knn_fixed_sigma_pair() {
        let d = 3.0;
        let g = knn_graph(&[vec![0.0, 0.0], vec![d, 0.0]], 1, SigmaMode::Fixed(d)).unwrap();
        assert_eq!(g.n_edges(), 1);
        assert!((g.edges()[0].2 - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn knn_errors() {
        assert!(knn_graph(&[], 1, SigmaMode::MeanDistance).is_err());
        assert!(knn_graph(&[vec![0.0], vec![1.0]], 2, SigmaMode::MeanDistance).is_err());
        let dup = knn_graph(&[vec![0.0, 1.0], vec![0.0, 1.0], vec![3.0, 0.0]], 1, SigmaMode::MeanDistance);
        assert!(matches!(dup, Err(Error::InvalidGraph(m)) if m.contains("duplicate")));
    }

    #[test]
    fn synth_community_shape() {
        let s = synth_graph(SynthKind::community(3), 250, 7).unwrap();
        assert_eq!(s.graph.n_nodes(), 250);
        assert!(s.graph.is_connected());
        let p = s.clusters.unwrap();
        assert_eq!(p.k(), 3);
        assert_eq!(p.labels().len(), 250);
    }

    #[test]
    fn synth_sensor_connected_and_deterministic() {
        let a = synth_graph(SynthKind::sensor(), 150, 3).unwrap().graph;
        let b = synth_graph(SynthKind::sensor(), 150, 3).unwrap().graph;
        let c = synth_graph(SynthKind::sensor(), 150, 4).unwrap().graph;
        assert!(a.is_connected());
        assert_eq!(a.n_nodes(), 150);
        assert_eq!(a, b);
        assert_ne!(a.edges(), c.edges());
    }

    #[test]
    fn synth_invalid_sizes() {
        assert!(synth_graph(SynthKind::community(5), 3, 0).is_err());
        assert!(synth_graph(SynthKind::sensor(), 1, 0).is_err());
    }

    #[test]
    fn subgraph_maps_indices() {
        let g = build_graph(4, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0)]).unwrap();
        let (s, map) = extract_subgraph(&g, &[1, 2, 3]).unwrap();
        assert_eq!(map, vec![1, 2, 3]);
        assert_eq!(s.edges(), &[(0, 1, 2.0), (1, 2, 3.0)]);
    }

    #[test]
    fn json_round_trip() {
        let g = build_graph(3, vec![(0, 1, 0.25), (1, 2, 1.5)])
            .unwrap()
            .with_coords(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.5]])
            .unwrap();
        let text = serde_json::to_string(&g.to_file()).unwrap();
        assert!(text.starts_with("{\"n\":3,\"edges\":[[0,1,0.25]"));
        let back: GraphFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_graph().unwrap(), g);
    }
}
