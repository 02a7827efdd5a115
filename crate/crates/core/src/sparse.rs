//! Sparse operators derived from a graph: the combinatorial Laplacian in
//! compressed-row form and the signed-√w incidence operator.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Symmetric matrix stored in compressed sparse row layout. Column indices
/// are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetricMatrix {
    /// Assemble from (row, col, value) triplets; duplicates are summed.
    /// Fails if the assembled matrix is not symmetric.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::param(format!(
                    "triplet ({i},{j}) out of range for dimension {dim}"
                )));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().expect("entry exists") += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let m = Self {
            dim,
            row_ptr,
            col_idx,
            values,
        };
        if !m.is_symmetric(0.0) {
            return Err(Error::param("matrix is not symmetric"));
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .all(|(&j, &v)| (self.get(j, i) - v).abs() <= tol)
        })
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    /// Largest absolute row sum (Gershgorin radius about zero).
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }
}

/// Weighted incidence operator `M` (|E| × N). Row `s` holds `+√w` at the
/// lower endpoint and `−√w` at the higher endpoint of edge `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceOperator {
    n_nodes: usize,
    heads: Vec<usize>,
    tails: Vec<usize>,
    sqrt_w: Vec<f64>,
}

impl IncidenceOperator {
    pub(crate) fn new(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Self {
        Self {
            n_nodes,
            heads: edges.iter().map(|e| e.0).collect(),
            tails: edges.iter().map(|e| e.1).collect(),
            sqrt_w: edges.iter().map(|e| e.2.sqrt()).collect(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.sqrt_w.len()
    }

    /// `(i, j, √w)` for row `s`.
    pub fn row(&self, s: usize) -> (usize, usize, f64) {
        (self.heads[s], self.tails[s], self.sqrt_w[s])
    }

    /// Edge-domain differences `M x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_nodes);
        self.heads
            .iter()
            .zip(&self.tails)
            .zip(&self.sqrt_w)
            .map(|((&i, &j), &s)| s * (x[i] - x[j]))
            .collect()
    }

    /// Node-domain accumulation `Mᵀ e`.
    pub fn apply_t(&self, e: &[f64]) -> Vec<f64> {
        debug_assert_eq!(e.len(), self.n_edges());
        let mut out = vec![0.0; self.n_nodes];
        for (s, &es) in e.iter().enumerate() {
            let v = self.sqrt_w[s] * es;
            out[self.heads[s]] += v;
            out[self.tails[s]] -= v;
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_edges(), self.n_nodes);
        for s in 0..self.n_edges() {
            let (i, j, w) = self.row(s);
            d[(s, i)] = w;
            d[(s, j)] = -w;
        }
        d
    }
}
