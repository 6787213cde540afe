//! Small dense matrix algebra and the symmetric eigensolver used by the
//! weighted spectral decompositions.
//!
//! Everything here targets coordinate models of dimension at most a few
//! hundred, so a plain row-major `Vec<f64>` store and a cyclic Jacobi sweep
//! are sufficient and keep the similarity-transform contract directly
//! testable.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Mat::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Mat {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        Ok(out)
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, factor: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// diag(left) * self * diag(right).
    pub fn conjugate_by_diags(&self, left: &[f64], right: &[f64]) -> Mat {
        assert_eq!(left.len(), self.rows);
        assert_eq!(right.len(), self.cols);
        Mat::from_fn(self.rows, self.cols, |i, j| left[i] * self.get(i, j) * right[j])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum (the exact infinity -> infinity operator norm).
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn off_diagonal_norm(a: &Mat) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    s.sqrt()
}

/// Symmetric eigendecomposition by cyclic Jacobi sweeps.
///
/// Returns eigenvalues sorted in descending order with matching eigenvector
/// columns. The input must be symmetric; symmetry is not re-checked here.
pub fn jacobi_eigh(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "eigendecomposition needs a square matrix");
    let mut a = a.clone();
    let mut v = Mat::identity(n);
    let scale = a.frobenius_norm().max(1.0);
    let tol = 1e-15 * scale;

    for _sweep in 0..100 {
        if off_diagonal_norm(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);

                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).partial_cmp(&a.get(i, i)).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = Mat::from_fn(n, n, |i, j| v.get(i, order[j]));
    (values, vectors)
}

/// Spectral norm of a general square matrix, computed as the square root of
/// the largest eigenvalue of A^T A.
pub fn spectral_norm(a: &Mat) -> f64 {
    if a.max_abs() == 0.0 {
        return 0.0;
    }
    let gram = a.transpose().matmul(a);
    let (values, _) = jacobi_eigh(&gram);
    values.first().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Eigendecomposition of an operator that is self-adjoint with respect to the
/// inner product weighted by `ts`.
///
/// The operator coefficient matrix `op` is conjugated into the symmetric form
/// S = T^{1/2} op T^{-1/2}, solved there, and the eigenvectors are mapped back
/// by T^{-1/2}. Returned eigenvectors are normalized in the weighted inner
/// product, sorted by descending eigenvalue, and sign-fixed so the
/// largest-magnitude coordinate of each vector is positive.
pub fn weighted_eigh(op: &Mat, ts: &[f64]) -> Result<(Vec<f64>, Mat)> {
    let n = op.rows();
    if op.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: op.cols(),
        });
    }
    if ts.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ts.len(),
        });
    }
    let sqrt_t: Vec<f64> = ts.iter().map(|t| t.sqrt()).collect();
    let inv_sqrt_t: Vec<f64> = sqrt_t.iter().map(|s| 1.0 / s).collect();
    let s_mat = op.conjugate_by_diags(&sqrt_t, &inv_sqrt_t);

    let scale = s_mat.max_abs().max(1.0);
    let mut max_asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((s_mat.get(i, j) - s_mat.get(j, i)).abs());
        }
    }
    if max_asym > 1e-8 * scale {
        return Err(Error::NotSelfAdjoint(format!(
            "symmetrized form has asymmetry {max_asym:.3e} (scale {scale:.3e})"
        )));
    }
    // Average away the residual rounding asymmetry before the sweep.
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (s_mat.get(i, j) + s_mat.get(j, i)));
    let (values, u) = jacobi_eigh(&sym);

    let mut vectors = Mat::zeros(n, n);
    for j in 0..n {
        let mut col: Vec<f64> = (0..n).map(|i| inv_sqrt_t[i] * u.get(i, j)).collect();
        let norm = col
            .iter()
            .zip(ts)
            .map(|(c, t)| t * c * c)
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            for c in col.iter_mut() {
                *c /= norm;
            }
        }
        // Deterministic sign: largest-magnitude coordinate positive.
        let mut lead = 0;
        for (i, c) in col.iter().enumerate() {
            if c.abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            for c in col.iter_mut() {
                *c = -*c;
            }
        }
        for (i, c) in col.iter().enumerate() {
            vectors.set(i, j, *c);
        }
    }
    Ok((values, vectors))
}
