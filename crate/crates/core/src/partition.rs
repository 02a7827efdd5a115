//! Node partitions and spectral clustering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::eigendecompose;

const KMEANS_ITERS: usize = 100;
const KMEANS_RESTARTS: usize = 4;

/// Non-overlapping cover of a graph's nodes into `k` nonempty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("partition needs at least one cluster"));
        }
        let mut counts = vec![0usize; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::param(format!("label {l} out of range for k = {k}")));
            }
            counts[l] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::param(format!("cluster {empty} is empty")));
        }
        Ok(Self { labels, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Node indices of cluster `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Spectral clustering: embed nodes with the first `k` Laplacian
/// eigenvectors and run seeded k-means++ in that space.
pub fn partition(g: &Graph, k: usize, seed: u64) -> Result<Partition> {
    let n = g.n_nodes();
    if k == 0 || k > n {
        return Err(Error::param(format!("cannot split {n} nodes into {k} clusters")));
    }
    if k == 1 {
        return Partition::new(vec![0; n], 1);
    }
    if k == n {
        return Partition::new((0..n).collect(), n);
    }
    let decomp = eigendecompose(&g.laplacian())?;
    let u = decomp.vectors();
    let points: Vec<Vec<f64>> = (0..n).map(|i| (0..k).map(|c| u[(i, c)]).collect()).collect();
    let labels = kmeans(&points, k, seed);
    Partition::new(labels, k)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best-of-restarts Lloyd iterations; every cluster is kept nonempty by
/// moving the point farthest from its centroid into an emptied cluster.
pub(crate) fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (cost, labels) = kmeans_once(points, k, &mut rng);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, labels));
        }
    }
    best.expect("at least one restart").1
}

fn kmeans_once(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<usize>) {
    let n = points.len();
    let dim = points[0].len();

    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
        for (di, p) in d2.iter_mut().zip(points) {
            *di = di.min(sq_dist(p, centers.last().expect("pushed")));
        }
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let c = nearest(p, &centers);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Move the worst-fit point from a cluster that can spare it.
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centers[labels[a]])
                            .total_cmp(&sq_dist(&points[b], &centers[labels[b]]))
                    })
                    .expect("n >= k guarantees a donor cluster");
                counts[labels[far]] -= 1;
                sums[labels[far]].iter_mut().zip(&points[far]).for_each(|(s, x)| *s -= x);
                labels[far] = c;
                counts[c] = 1;
                sums[c] = points[far].clone();
                changed = true;
            }
        }
        for c in 0..k {
            centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
        if !changed {
            break;
        }
    }
    let cost = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum();
    (cost, labels)
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (c, ctr) in centers.iter().enumerate() {
        let d = sq_dist(p, ctr);
        if d < bd {
            bd = d;
            best = c;
        }
    }
    best
}
