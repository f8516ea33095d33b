//! Small dense linear algebra shared by the learning modules: row-major f64
//! matrices, a one-sided Jacobi SVD (the only SVD the pipeline needs is d x d
//! with d around 32), and exact cosine top-k retrieval over embedding rows.

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix data length {} != {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`.
    pub fn matmul_transb(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "matmul_transb shape mismatch");
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(self.row(i), other.row(j));
            }
        }
        out
    }

    /// `self * v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Spectral norm via power iteration on `self^T self`; adequate for the
    /// small matrices this crate handles.
    pub fn spectral_norm(&self) -> f64 {
        let n = self.cols;
        if n == 0 || self.rows == 0 {
            return 0.0;
        }
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut sigma = 0.0;
        for _ in 0..200 {
            let av = self.mul_vec(&v);
            let atav = self.transpose().mul_vec(&av);
            let norm = dot(&atav, &atav).sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for (x, y) in v.iter_mut().zip(&atav) {
                *x = y / norm;
            }
            let new_sigma = dot(&self.mul_vec(&v), &self.mul_vec(&v)).sqrt();
            if (new_sigma - sigma).abs() <= 1e-12 * new_sigma.max(1.0) {
                return new_sigma;
            }
            sigma = new_sigma;
        }
        sigma
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn add_scaled(&mut self, other: &DenseMatrix, s: f64) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of a singular value decomposition `m = U * diag(sigma) * V^T`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

/// One-sided Jacobi SVD. Singular values come back non-negative and
/// descending; `u` and `v` have orthonormal columns. For rank-deficient
/// inputs the null columns of `u` are completed to an orthonormal basis so
/// downstream orthogonal-Procrustes solves stay exact.
pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::InvalidArgument("svd of empty matrix".into()));
    }
    if m.rows < m.cols {
        // Decompose the transpose and swap factors.
        let t = svd(&m.transpose())?;
        return Ok(Svd { u: t.v, sigma: t.sigma, v: t.u });
    }

    let rows = m.rows;
    let cols = m.cols;
    // Work on columns; Jacobi rotations orthogonalize column pairs.
    let mut a: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| m.get(i, j)).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut col = vec![0.0; cols];
            col[j] = 1.0;
            col
        })
        .collect();

    const TOL: f64 = 1e-15;
    const MAX_SWEEPS: usize = 100;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                let scale = (alpha * beta).sqrt();
                if scale == 0.0 || gamma.abs() <= TOL * scale {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let ap = a[p][i];
                    let aq = a[q][i];
                    a[p][i] = c * ap - s * aq;
                    a[q][i] = s * ap + c * aq;
                }
                for i in 0..cols {
                    let vp = v[p][i];
                    let vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence);
    }

    let mut sigma: Vec<f64> = a.iter().map(|col| dot(col, col).sqrt()).collect();
    // Sort singular values descending, permuting columns alongside.
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap().then(i.cmp(&j)));
    let a: Vec<Vec<f64>> = order.iter().map(|&i| a[i].clone()).collect();
    let v_cols: Vec<Vec<f64>> = order.iter().map(|&i| v[i].clone()).collect();
    sigma = order.iter().map(|&i| sigma[i]).collect();

    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let rank_tol = sigma_max * 1e-14;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for (j, col) in a.iter().enumerate() {
        if sigma[j] > rank_tol && sigma[j] > 0.0 {
            u_cols.push(col.iter().map(|x| x / sigma[j]).collect());
        } else {
            sigma[j] = 0.0;
            u_cols.push(vec![0.0; rows]); // completed below
        }
    }
    complete_orthonormal(&mut u_cols, rows);

    let mut u = DenseMatrix::zeros(rows, cols);
    let mut vm = DenseMatrix::zeros(cols, cols);
    for j in 0..cols {
        for i in 0..rows {
            u.set(i, j, u_cols[j][i]);
        }
        for i in 0..cols {
            vm.set(i, j, v_cols[j][i]);
        }
    }
    Ok(Svd { u, sigma, v: vm })
}

/// Fill zero columns with unit vectors orthogonal to all existing columns
/// (modified Gram-Schmidt against canonical basis candidates).
fn complete_orthonormal(cols: &mut [Vec<f64>], dim: usize) {
    for j in 0..cols.len() {
        if dot(&cols[j], &cols[j]) > 0.5 {
            continue;
        }
        'candidates: for k in 0..dim {
            let mut cand = vec![0.0; dim];
            cand[k] = 1.0;
            for _ in 0..2 {
                for other in cols.iter() {
                    let proj = dot(&cand, other);
                    if proj != 0.0 {
                        for (c, o) in cand.iter_mut().zip(other) {
                            *c -= proj * o;
                        }
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if norm > 1e-3 {
                for c in &mut cand {
                    *c /= norm;
                }
                cols[j] = cand;
                break 'candidates;
            }
        }
    }
}

/// Cosine similarity with f64 accumulation; 0 when either vector has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut num = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        num += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    num / (na.sqrt() * nb.sqrt())
}

/// Top-k rows of `candidates` by cosine similarity to `query`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopK {
    /// `(row id, cosine)` pairs, similarity descending, ties by ascending id.
    pub hits: Vec<(usize, f64)>,
    /// Set when fewer than `k` candidate rows existed.
    pub truncated: bool,
}

pub fn topk_cosine(query: &[f32], candidates: &EmbeddingMatrix, k: usize) -> Result<TopK> {
    if k == 0 {
        return Err(Error::InvalidArgument("topk_cosine requires k >= 1".into()));
    }
    let qnorm: f64 = query.iter().map(|&x| (x as f64) * (x as f64)).sum();
    if qnorm == 0.0 {
        return Err(Error::InvalidArgument("topk_cosine query has zero norm".into()));
    }
    let n = candidates.len();
    let mut scored: Vec<(usize, f64)> = (0..n)
        .map(|i| {
            let row = candidates.row(i);
            let norm: f64 = row.iter().map(|&x| (x as f64) * (x as f64)).sum();
            if norm == 0.0 {
                (i, f64::NEG_INFINITY)
            } else {
                (i, cosine(query, row))
            }
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let truncated = k > n;
    scored.truncate(k.min(n));
    Ok(TopK { hits: scored, truncated })
}

/// Batch top-k for many queries; data-parallel by query row.
pub fn topk_cosine_batch(
    queries: &EmbeddingMatrix,
    candidates: &EmbeddingMatrix,
    k: usize,
    exec: Execution,
) -> Result<Vec<TopK>> {
    if queries.dim() != candidates.dim() {
        return Err(Error::DimensionMismatch(format!(
            "query dim {} != candidate dim {}",
            queries.dim(),
            candidates.dim()
        )));
    }
    let results = map_indexed(exec, queries.len(), |i| topk_cosine(queries.row(i), candidates, k));
    results.into_iter().collect()
}

/// Random orthogonal matrix: Gram-Schmidt on a Gaussian matrix, with the
/// diagonal sign fixed so the distribution does not collapse.
pub fn random_orthogonal(dim: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut cand: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for other in &cols {
                let proj = dot(&cand, other);
                for (c, o) in cand.iter_mut().zip(other) {
                    *c -= proj * o;
                }
            }
        }
        let norm = dot(&cand, &cand).sqrt();
        if norm < 1e-8 {
            continue;
        }
        let sign = if cand[cols.len()] < 0.0 { -1.0 } else { 1.0 };
        for c in &mut cand {
            *c *= sign / norm;
        }
        cols.push(cand);
    }
    let mut q = DenseMatrix::zeros(dim, dim);
    for (j, col) in cols.iter().enumerate() {
        for i in 0..dim {
            q.set(i, j, col[i]);
        }
    }
    q
}

/// `|| m^T m - I ||_F`; the orthogonality residual used throughout.
pub fn orthogonality_residual(m: &DenseMatrix) -> f64 {
    let gram = m.transpose().matmul(m);
    let mut sum = 0.0;
    for i in 0..gram.rows() {
        for j in 0..gram.cols() {
            let target = if i == j { 1.0 } else { 0.0 };
            let d = gram.get(i, j) - target;
            sum += d * d;
        }
    }
    sum.sqrt()
}
