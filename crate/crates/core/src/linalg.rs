//! Dense column-major matrices and a thin SVD.
//!
//! The SVD reduces the matrix (or its transpose, whichever is taller) to a
//! square triangular factor with Householder QR and then diagonalizes that
//! factor with one-sided (Hestenes) Jacobi rotations. Jacobi keeps relative
//! accuracy on small singular values, which the Gram-matrix route loses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("Jacobi SVD did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    /// Column-major.
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_columns(rows: usize, cols: Vec<Vec<f64>>) -> Self {
        let c = cols.len();
        let mut data = Vec::with_capacity(rows * c);
        for col in cols {
            assert_eq!(col.len(), rows);
            data.extend(col);
        }
        Self {
            rows,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let oc = other.col(j);
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &w) in oc.iter().enumerate() {
                if w != 0.0 {
                    axpy(w, self.col(k), dst);
                }
            }
        }
        out
    }

    /// Keeps the first `k` columns.
    pub fn truncate_cols(&self, k: usize) -> Self {
        Self {
            rows: self.rows,
            cols: k,
            data: self.data[..k * self.rows].to_vec(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn two_cols_mut(&mut self, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert!(i < j);
        let n = self.rows;
        let (a, b) = self.data.split_at_mut(j * n);
        (&mut a[i * n..(i + 1) * n], &mut b[..n])
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.rows + i]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a = u · diag(s) · vᵀ` with `min(rows, cols)` components, `s` non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

const MAX_SWEEPS: usize = 80;

/// Thin SVD. Each right singular vector is signed so that its entry of
/// largest magnitude (lowest index on ties) is positive; equal singular
/// values are ordered by the lexicographic order of their right vectors.
pub fn thin_svd(a: &DenseMatrix) -> Result<Svd, LinalgError> {
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let transposed = a.rows < a.cols;
    let m = if transposed { a.transpose() } else { a.clone() };
    let c = m.cols;

    let (q, r) = householder_qr(&m);
    let (b, z) = jacobi(r)?;

    let sigma: Vec<f64> = (0..c).map(|j| norm(b.col(j))).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));

    let mut w = DenseMatrix::zeros(c, c);
    let mut z_sorted = DenseMatrix::zeros(c, c);
    let mut s = Vec::with_capacity(c);
    for (dst, &src) in order.iter().enumerate() {
        s.push(sigma[src]);
        z_sorted.col_mut(dst).copy_from_slice(z.col(src));
        if sigma[src] > 0.0 {
            for (o, &bv) in w.col_mut(dst).iter_mut().zip(b.col(src)) {
                *o = bv / sigma[src];
            }
        }
    }
    orthonormalize(&mut w);
    let left = q.matmul(&w);

    let (mut u, mut v) = if transposed {
        (z_sorted, left)
    } else {
        (left, z_sorted)
    };
    canonicalize(&mut u, &mut s, &mut v);
    Ok(Svd { u, s, v })
}

/// Returns explicit `q` (rows × cols, orthonormal columns) and square upper
/// triangular `r` with `m = q·r`. Requires rows ≥ cols.
fn householder_qr(m: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (rows, cols) = (m.rows, m.cols);
    let mut a = m.clone();
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let x = &a.col(j)[j..];
        let xnorm = norm(x);
        if xnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] > 0.0 { -xnorm } else { xnorm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm = norm(&v);
        if vnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        v.iter_mut().for_each(|e| *e /= vnorm);
        for k in j..cols {
            let col = &mut a.col_mut(k)[j..];
            let proj = 2.0 * dot(&v, col);
            axpy(-proj, &v, col);
        }
        reflectors.push(Some(v));
    }

    let mut r = DenseMatrix::zeros(cols, cols);
    for j in 0..cols {
        for i in 0..=j {
            r[(i, j)] = a[(i, j)];
        }
    }

    let mut q = DenseMatrix::zeros(rows, cols);
    for i in 0..cols {
        q[(i, i)] = 1.0;
    }
    for j in (0..cols).rev() {
        if let Some(v) = &reflectors[j] {
            for k in j..cols {
                let col = &mut q.col_mut(k)[j..];
                let proj = 2.0 * dot(v, col);
                axpy(-proj, v, col);
            }
        }
    }
    (q, r)
}

/// One-sided Jacobi: rotates the columns of `b` until they are mutually
/// orthogonal, accumulating the rotations in `z`. On return `b_in · z = b`.
fn jacobi(mut b: DenseMatrix) -> Result<(DenseMatrix, DenseMatrix), LinalgError> {
    let n = b.cols;
    let mut z = DenseMatrix::identity(n);
    let tol = f64::EPSILON * (b.rows.max(1) as f64);
    // Columns below roundoff of the whole matrix are numerically zero; rotating
    // them against large columns never settles.
    let negligible = (f64::EPSILON * b.frobenius_norm()).powi(2);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (bi, bj) = b.two_cols_mut(i, j);
                let alpha = dot(bi, bi);
                let beta = dot(bj, bj);
                let gamma = dot(bi, bj);
                if alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate(bi, bj, cs, sn);
                let (zi, zj) = z.two_cols_mut(i, j);
                rotate(zi, zj, cs, sn);
            }
        }
        if !rotated {
            return Ok((b, z));
        }
    }
    Err(LinalgError::NoConvergence(MAX_SWEEPS))
}

fn rotate(x: &mut [f64], y: &mut [f64], cs: f64, sn: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = cs * xa - sn * yb;
        *b = sn * xa + cs * yb;
    }
}

/// Twice-repeated modified Gram-Schmidt over the columns in order. Columns
/// that vanish (zero singular values) are replaced by the unit vector with
/// the largest component outside the span built so far.
fn orthonormalize(w: &mut DenseMatrix) {
    let n = w.cols;
    for j in 0..n {
        let original = norm(w.col(j));
        for _ in 0..2 {
            project_out(w, j);
        }
        let remaining = norm(w.col(j));
        if original == 0.0 || remaining <= 1e-8 * original {
            complete_column(w, j);
        } else {
            w.col_mut(j).iter_mut().for_each(|e| *e /= remaining);
        }
    }
}

fn project_out(w: &mut DenseMatrix, j: usize) {
    for k in 0..j {
        let (wk, wj) = w.two_cols_mut(k, j);
        let p = dot(wk, wj);
        axpy(-p, wk, wj);
    }
}

fn complete_column(w: &mut DenseMatrix, j: usize) {
    let rows = w.rows;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..rows {
        let col = w.col_mut(j);
        col.iter_mut().for_each(|x| *x = 0.0);
        col[e] = 1.0;
        for _ in 0..2 {
            project_out(w, j);
        }
        let nrm = norm(w.col(j));
        if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
            best = Some((nrm, w.col(j).to_vec()));
        }
    }
    let (nrm, col) = best.expect("at least one row");
    for (dst, v) in w.col_mut(j).iter_mut().zip(col) {
        *dst = v / nrm;
    }
}

/// Applies the sign convention to `v` (mirrored on `u`) and orders equal
/// singular values by their right vectors.
fn canonicalize(u: &mut DenseMatrix, s: &mut [f64], v: &mut DenseMatrix) {
    let k = s.len();
    for j in 0..k {
        let col = v.col(j);
        let mut pivot = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            v.col_mut(j).iter_mut().for_each(|x| *x = -*x);
            u.col_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        s[b].total_cmp(&s[a]).then_with(|| {
            v.col(a)
                .iter()
                .zip(v.col(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return;
    }
    let (u0, v0, s0) = (u.clone(), v.clone(), s.to_vec());
    for (dst, &src) in order.iter().enumerate() {
        u.col_mut(dst).copy_from_slice(u0.col(src));
        v.col_mut(dst).copy_from_slice(v0.col(src));
        s[dst] = s0[src];
    }
}
