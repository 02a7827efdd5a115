//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by implicitly shifted QL iterations.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::sparse::SparseSymmetricMatrix;

const MAX_QL_SWEEPS: usize = 60;

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// (column `k` of `vectors` pairs with `values[k]`).
///
/// Within each eigenvector the entry of largest magnitude is positive.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    values: Vec<f64>,
    vectors: DenseMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Eigenvector matrix `U`.
    pub fn vectors(&self) -> &DenseMatrix {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    /// Graph Fourier transform `Uᵀ x`.
    pub fn analyze(&self, x: &[f64]) -> Vec<f64> {
        self.vectors.matvec_t(x)
    }

    /// Inverse transform `U c`.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        self.vectors.matvec(c)
    }

    /// `U diag(response(λₖ)) Uᵀ x`.
    pub fn apply_response(&self, x: &[f64], response: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut c = self.analyze(x);
        for (ck, &lk) in c.iter_mut().zip(&self.values) {
            *ck *= response(lk);
        }
        self.synthesize(&c)
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Eigendecomposition of a sparse symmetric matrix (densified).
pub fn eigendecompose(l: &SparseSymmetricMatrix) -> Result<SpectralDecomposition> {
    eigendecompose_dense(&l.to_dense())
}

pub fn eigendecompose_dense(a: &DenseMatrix) -> Result<SpectralDecomposition> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::param("eigendecomposition needs a square matrix"));
    }
    for i in 0..n {
        for j in 0..i {
            let (x, y) = (a[(i, j)], a[(j, i)]);
            if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                return Err(Error::param(format!("matrix is not symmetric at ({i},{j})")));
            }
        }
    }
    if n == 0 {
        return Ok(SpectralDecomposition {
            values: vec![],
            vectors: DenseMatrix::zeros(0, 0),
        });
    }

    let mut v = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    // Rows of `z` are eigenvectors so the QL rotations touch contiguous memory.
    let mut z = v.transpose();
    ql_implicit(&mut d, &mut e, &mut z)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let row = z.row(k);
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (i, &x) in row.iter().enumerate() {
            vectors[(i, col)] = sign * x;
        }
    }
    Ok(SpectralDecomposition { values, vectors })
}

/// Householder reduction of symmetric `v` (overwritten by the accumulated
/// orthogonal transform). On exit `d` holds the diagonal and `e[1..]` the
/// sub-diagonal.
fn tridiagonalize(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let (f, g) = (d[j], e[j]);
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal `(d, e)`; rotations are applied to
/// the rows of `z`.
fn ql_implicit(d: &mut [f64], e: &mut [f64], z: &mut DenseMatrix) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence(MAX_QL_SWEEPS));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d[l + 2..].iter_mut() {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_rows(z, i, s, c);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn rotate_rows(z: &mut DenseMatrix, i: usize, s: f64, c: f64) {
    let n = z.cols();
    for k in 0..n {
        let h = z[(i + 1, k)];
        let zi = z[(i, k)];
        z[(i + 1, k)] = s * zi + c * h;
        z[(i, k)] = c * zi - s * h;
    }
}
