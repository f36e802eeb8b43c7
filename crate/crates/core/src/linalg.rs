//! Dense row-major matrices plus the two Jacobi-type decompositions the rest
//! of the crate needs: a cyclic Jacobi eigensolver for symmetric matrices and a
//! one-sided (Hestenes) Jacobi SVD.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, QiglError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err(format!(
                "{} elements cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(shape_err(format!("row {i} has {} entries, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on 0, and a 0-column matrix has no data anyway.
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: indices.len(), cols: self.cols, data }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(shape_err(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`, the natural product for row-major projections.
    pub fn matmul_transposed(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(shape_err(format!(
                "cannot multiply {}x{} by the transpose of {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out[(i, j)] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    /// Replaces the matrix with `(A + A^T) / 2`. Square matrices only.
    pub fn symmetrize(&mut self) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues, nonincreasing.
    pub values: Vec<f64>,
    /// Eigenvectors stored as rows, matching `values`.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    /// Reassembles `V^T diag(f(lambda)) V`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            let v = self.vectors.row(k);
            for i in 0..n {
                let wi = w * v[i];
                for j in 0..n {
                    out[(i, j)] += wi * v[j];
                }
            }
        }
        out
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigenvalue iteration. The input must be square; only its
/// symmetric part is used.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    if a.rows != a.cols {
        return Err(shape_err(format!("eigen-decomposition needs a square matrix, got {}x{}", a.rows, a.cols)));
    }
    let n = a.rows;
    let mut m = a.clone();
    m.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm();
    if scale == 0.0 || n == 1 {
        return Ok(sorted_eigen((0..n).map(|i| m[(i, i)]).collect(), v));
    }
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if libm::sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                // Eigenvectors accumulate as rows of v.
                for k in 0..n {
                    let vp = v[(p, k)];
                    let vq = v[(q, k)];
                    v[(p, k)] = c * vp - s * vq;
                    v[(q, k)] = s * vp + c * vq;
                }
            }
        }
    }
    Ok(sorted_eigen((0..n).map(|i| m[(i, i)]).collect(), v))
}

fn sorted_eigen(values: Vec<f64>, vectors: Matrix) -> SymmetricEigen {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    SymmetricEigen {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: vectors.select_rows(&order),
    }
}

/// Thin SVD `A = U S V^T` restricted to what PCA needs: the singular values
/// and right singular vectors.
#[derive(Debug, Clone)]
pub struct RightSvd {
    /// Nonincreasing; ties keep input order.
    pub singular_values: Vec<f64>,
    /// Right singular vectors as rows, `min(rows, cols)` of them.
    pub vt: Matrix,
}

/// One-sided Jacobi SVD. Orthogonalizes whichever side of `a` is shorter, so
/// the cost is `O(min(n, d)^2 * max(n, d))` per sweep. Each right singular
/// vector is sign-fixed so that its largest-magnitude entry is positive.
pub fn right_svd(a: &Matrix) -> RightSvd {
    let (n, d) = (a.rows, a.cols);
    let (singular_values, vt) = if n <= d {
        // Rotating rows: (J^T A) has orthogonal rows sigma_i v_i^T.
        let mut work = a.clone();
        hestenes(&mut work, None);
        let sv: Vec<f64> = work.row_iter().map(|r| libm::sqrt(dot(r, r))).collect();
        for (i, &s) in sv.iter().enumerate() {
            if s > 0.0 {
                work.row_mut(i).iter_mut().for_each(|x| *x /= s);
            }
        }
        (sv, work)
    } else {
        // Rotating columns: A R^T = U S, so V = R^T and row i of R is v_i.
        let mut work = a.transpose();
        let mut r = Matrix::identity(d);
        hestenes(&mut work, Some(&mut r));
        let sv: Vec<f64> = work.row_iter().map(|row| libm::sqrt(dot(row, row))).collect();
        (sv, r)
    };
    let mut order: Vec<usize> = (0..singular_values.len()).collect();
    // sort_by is stable, so equal singular values keep input order.
    order.sort_by(|&x, &y| singular_values[y].total_cmp(&singular_values[x]));
    let mut vt = vt.select_rows(&order);
    for i in 0..vt.rows {
        fix_sign(vt.row_mut(i));
    }
    RightSvd { singular_values: order.iter().map(|&i| singular_values[i]).collect(), vt }
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Rotates pairs of rows of `work` until all rows are mutually orthogonal,
/// applying the same rotations to `accum` when given.
fn hestenes(work: &mut Matrix, mut accum: Option<&mut Matrix>) {
    let m = work.rows;
    let tol = f64::EPSILON * (m.max(1) as f64);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..m {
            for j in (i + 1)..m {
                let (alpha, beta, gamma) = {
                    let ri = work.row(i);
                    let rj = work.row(j);
                    (dot(ri, ri), dot(rj, rj), dot(ri, rj))
                };
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= tol * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_rows(work, i, j, c, s);
                if let Some(acc) = accum.as_deref_mut() {
                    rotate_rows(acc, i, j, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate_rows(m: &mut Matrix, i: usize, j: usize, c: f64, s: f64) {
    let cols = m.cols;
    let (head, tail) = m.data.split_at_mut(j * cols);
    let ri = &mut head[i * cols..(i + 1) * cols];
    let rj = &mut tail[..cols];
    for (x, y) in ri.iter_mut().zip(rj.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(QiglError::Argument(format!("{what} contains non-finite values")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(rows: usize, cols: usize, mut seed: u64) -> Matrix {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            data.push(((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0);
        }
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn eigen_reconstructs_symmetric_input() {
        let b = lcg_matrix(6, 6, 7);
        let a = b.matmul_transposed(&b).unwrap();
        let eig = symmetric_eigen(&a).unwrap();
        let back = eig.map_values(|x| x);
        for (x, y) in back.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_wide_and_tall_agree() {
        for (n, d) in [(4, 9), (9, 4), (5, 5)] {
            let a = lcg_matrix(n, d, 11 + n as u64);
            let svd = right_svd(&a);
            // A^T A v = s^2 v
            let ata = a.transpose().matmul(&a).unwrap();
            for (k, &s) in svd.singular_values.iter().enumerate() {
                if s < 1e-9 {
                    continue;
                }
                let v = svd.vt.row(k);
                for i in 0..d {
                    let lhs = dot(ata.row(i), v);
                    assert!((lhs - s * s * v[i]).abs() < 1e-10, "n={n} d={d}");
                }
            }
            assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_sign_convention() {
        let a = lcg_matrix(3, 5, 99);
        let svd = right_svd(&a);
        for i in 0..svd.vt.rows() {
            let row = svd.vt.row(i);
            let big = row.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn matmul_shape_error() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(QiglError::Shape(_))));
    }
}
