//! Small dense matrix kernels.
//!
//! Everything in the controller is at most a handful of rows wide (the DREM
//! extension matrix is `(n+m+p+1)²`, 7×7 for the two-state benchmark), so the
//! kernels favour exact formulas: Laplace expansion for determinants up to
//! 4×4, LU with partial pivoting above that, adjugates from cofactors, and a
//! cyclic Jacobi sweep for symmetric spectra.
//!
//! Determinants of matrices that are singular to machine precision come back
//! as tiny numbers of either sign; callers that need `det ≥ 0` (Gram
//! matrices) must clamp or tolerate `-ε`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use thiserror::Error;

/// Largest dimension handled by direct cofactor expansion.
const COFACTOR_MAX_DIM: usize = 4;

/// Pivot-ratio floor below which an LU-derived adjugate is replaced by
/// explicit cofactor minors.
const LU_ADJ_MIN_PIVOT_RATIO: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },
    #[error("matrix is singular to working precision (det = {det:e})")]
    Singular { det: f64 },
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

fn dim_err(op: &'static str, detail: impl Into<String>) -> MatError {
    MatError::Dimension {
        op,
        detail: detail.into(),
    }
}

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
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

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatError> {
        if rows * cols != data.len() {
            return Err(dim_err(
                "from_row_major",
                format!("{rows}x{cols} needs {} entries, got {}", rows * cols, data.len()),
            ));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(MatError::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for
    /// literals in code and tests.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), c, "ragged rows in Matrix::from_rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    /// Column vector `v` as an `len×1` matrix.
    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// `a·bᵀ`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        let mut data = Vec::with_capacity(a.len() * b.len());
        for &ai in a {
            data.extend(b.iter().map(|&bj| ai * bj));
        }
        Self {
            rows: a.len(),
            cols: b.len(),
            data,
        }
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copy of the block starting at `(r0, c0)` with the given shape.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block out of range");
        let mut b = Self::zeros(rows, cols);
        for i in 0..rows {
            let src = (r0 + i) * self.cols + c0;
            b.data[i * cols..(i + 1) * cols].copy_from_slice(&self.data[src..src + cols]);
        }
        b
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&Matrix]) -> Result<Self, MatError> {
        let cols = parts.first().map_or(0, |p| p.cols);
        if parts.iter().any(|p| p.cols != cols) {
            return Err(dim_err("vstack", "column counts differ"));
        }
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn try_mul(&self, rhs: &Matrix) -> Result<Matrix, MatError> {
        if self.cols != rhs.rows {
            return Err(dim_err(
                "mul",
                format!("{}x{} * {}x{}", self.rows, self.cols, rhs.rows, rhs.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, MatError> {
        if self.cols != v.len() {
            return Err(dim_err(
                "mul_vec",
                format!("{}x{} * vector of length {}", self.rows, self.cols, v.len()),
            ));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, MatError> {
        if self.rows != v.len() {
            return Err(dim_err(
                "tr_mul_vec",
                format!("({}x{})ᵀ * vector of length {}", self.rows, self.cols, v.len()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    fn require_square(&self, op: &'static str) -> Result<usize, MatError> {
        if !self.is_square() || self.rows == 0 {
            return Err(dim_err(
                op,
                format!("expected non-empty square matrix, got {}x{}", self.rows, self.cols),
            ));
        }
        Ok(self.rows)
    }

    /// Determinant. Laplace expansion up to 4×4, LU with partial pivoting
    /// beyond.
    pub fn det(&self) -> Result<f64, MatError> {
        let n = self.require_square("det")?;
        Ok(if n <= COFACTOR_MAX_DIM {
            cofactor_det(&self.data, n)
        } else {
            Lu::factor(&self.data, n).det()
        })
    }

    /// Adjugate (transpose of the cofactor matrix), so that
    /// `adj(M)·M = M·adj(M) = det(M)·I`. The adjugate of a 1×1 matrix is
    /// `[[1]]`.
    pub fn adjugate(&self) -> Result<Matrix, MatError> {
        Ok(self.adjugate_with_det()?.0)
    }

    /// Adjugate together with the determinant, sharing one factorization.
    pub fn adjugate_with_det(&self) -> Result<(Matrix, f64), MatError> {
        let n = self.require_square("adjugate")?;
        if n == 1 {
            return Ok((Matrix::identity(1), self.data[0]));
        }
        if n <= COFACTOR_MAX_DIM {
            return Ok((minor_adjugate(&self.data, n), cofactor_det(&self.data, n)));
        }
        let lu = Lu::factor(&self.data, n);
        let det = lu.det();
        if lu.pivot_ratio() > LU_ADJ_MIN_PIVOT_RATIO {
            let mut adj = lu.inverse();
            for v in adj.data.iter_mut() {
                *v *= det;
            }
            Ok((adj, det))
        } else {
            Ok((minor_adjugate(&self.data, n), det))
        }
    }

    /// Inverse via `adj(M)/det(M)`. The singularity threshold is
    /// `1e-12·‖M‖_max^n`; pass a custom relative threshold with
    /// [`Matrix::invert_with_threshold`].
    pub fn invert(&self) -> Result<Matrix, MatError> {
        self.invert_with_threshold(1e-12)
    }

    pub fn invert_with_threshold(&self, rel_threshold: f64) -> Result<Matrix, MatError> {
        let n = self.require_square("invert")?;
        let (adj, det) = self.adjugate_with_det()?;
        let scale = self.max_abs().powi(n as i32);
        if !det.is_finite() || det.abs() <= rel_threshold * scale || det == 0.0 {
            return Err(MatError::Singular { det });
        }
        Ok(adj.scale(1.0 / det))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Smallest and largest eigenvalues of a symmetric matrix.
    pub fn sym_eig_extremes(&self) -> Result<(f64, f64), MatError> {
        let eig = self.sym_eigenvalues()?;
        Ok((eig[0], eig[eig.len() - 1]))
    }

    /// All eigenvalues of a symmetric matrix in ascending order, by cyclic
    /// Jacobi rotations until the off-diagonal Frobenius norm drops below
    /// `1e-12` (relative to the initial norm for large matrices).
    pub fn sym_eigenvalues(&self) -> Result<Vec<f64>, MatError> {
        let n = self.require_square("sym_eig")?;
        let asym = self.asymmetry();
        if asym > 1e-9 * self.max_abs().max(1.0) {
            return Err(MatError::NotSymmetric { asymmetry: asym });
        }
        let mut a = self.clone();
        // symmetrize what is left of the asymmetry
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let tol = 1e-12 * a.frobenius_norm().max(1.0);
        for _sweep in 0..100 {
            if off_diagonal_norm(&a) <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    jacobi_rotate(&mut a, p, q);
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        eig.sort_by(f64::total_cmp);
        Ok(eig)
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Annihilates `a[p][q]` with one symmetric Jacobi rotation.
fn jacobi_rotate(a: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = a.rows;
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
}

/// Laplace expansion along the first row. `data` is row-major `n×n`.
fn cofactor_det(data: &[f64], n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => data[0],
        2 => data[0] * data[3] - data[1] * data[2],
        3 => {
            data[0] * (data[4] * data[8] - data[5] * data[7])
                - data[1] * (data[3] * data[8] - data[5] * data[6])
                + data[2] * (data[3] * data[7] - data[4] * data[6])
        }
        _ => {
            let mut det = 0.0;
            let mut minor = vec![0.0; (n - 1) * (n - 1)];
            for j in 0..n {
                let a = data[j];
                if a == 0.0 {
                    continue;
                }
                fill_minor(data, n, 0, j, &mut minor);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                det += sign * a * cofactor_det(&minor, n - 1);
            }
            det
        }
    }
}

/// Copies `data` without row `r` and column `c` into `out`.
fn fill_minor(data: &[f64], n: usize, r: usize, c: usize, out: &mut [f64]) {
    let mut k = 0;
    for i in (0..n).filter(|&i| i != r) {
        for j in (0..n).filter(|&j| j != c) {
            out[k] = data[i * n + j];
            k += 1;
        }
    }
}

fn small_det(data: &[f64], n: usize) -> f64 {
    if n <= COFACTOR_MAX_DIM {
        cofactor_det(data, n)
    } else {
        Lu::factor(data, n).det()
    }
}

/// Adjugate from explicit cofactor minors: `adj[j][i] = (-1)^{i+j} det(M_ij)`.
fn minor_adjugate(data: &[f64], n: usize) -> Matrix {
    let mut adj = Matrix::zeros(n, n);
    let mut minor = vec![0.0; (n - 1) * (n - 1)];
    for i in 0..n {
        for j in 0..n {
            fill_minor(data, n, i, j, &mut minor);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(j, i)] = sign * small_det(&minor, n - 1);
        }
    }
    adj
}

/// LU factorization with partial pivoting, `P·A = L·U`.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    fn factor(data: &[f64], n: usize) -> Self {
        let mut lu = data.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Self {
            n,
            lu,
            perm,
            sign,
            singular,
        }
    }

    fn det(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        (0..self.n).fold(self.sign, |d, i| d * self.lu[i * self.n + i])
    }

    fn pivot_ratio(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        let diag = (0..self.n).map(|i| self.lu[i * self.n + i].abs());
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if hi == 0.0 {
            0.0
        } else {
            lo / hi
        }
    }

    /// Column-by-column solve of `A·X = I`. Only called when non-singular.
    fn inverse(&self) -> Matrix {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut col = vec![0.0; n];
        for c in 0..n {
            for i in 0..n {
                col[i] = if self.perm[i] == c { 1.0 } else { 0.0 };
            }
            for i in 0..n {
                let mut s = col[i];
                for k in 0..i {
                    s -= self.lu[i * n + k] * col[k];
                }
                col[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = col[i];
                for k in (i + 1)..n {
                    s -= self.lu[i * n + k] * col[k];
                }
                col[i] = s / self.lu[i * n + i];
            }
            for i in 0..n {
                inv[(i, c)] = col[i];
            }
        }
        inv
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.try_mul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix sum shape");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix difference shape");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:.6e}", self[(i, j)])?;
            }
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b0() -> Matrix {
        Matrix::from_rows(&[[0.8, 0.8], [0.0, 0.8]])
    }

    fn assert_close(a: &Matrix, b: &Matrix, tol: f64) {
        assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
        let d = (a - b).max_abs();
        assert!(d <= tol, "max diff {d:e} > {tol:e}\n{a:?}\n{b:?}");
    }

    #[test]
    fn det_examples() {
        assert_eq!(Matrix::identity(3).det().unwrap(), 1.0);
        assert!((b0().det().unwrap() - 0.64).abs() < 1e-15);
        assert_eq!(Matrix::zeros(7, 7).det().unwrap(), 0.0);
        assert!(matches!(
            Matrix::zeros(2, 3).det(),
            Err(MatError::Dimension { .. })
        ));
    }

    #[test]
    fn lu_det_matches_cofactor_on_5x5() {
        let m = Matrix::from_rows(&[
            [2.0, -1.0, 0.0, 3.0, 1.0],
            [1.0, 4.0, -2.0, 0.0, 0.5],
            [0.0, 1.0, 3.0, -1.0, 2.0],
            [1.5, 0.0, 1.0, 2.0, -1.0],
            [0.3, 2.0, 0.0, 1.0, 1.0],
        ]);
        let lu = m.det().unwrap();
        // Laplace expansion along the first row with 4x4 cofactor minors.
        let mut minor = vec![0.0; 16];
        let mut lap = 0.0;
        for j in 0..5 {
            fill_minor(m.as_slice(), 5, 0, j, &mut minor);
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            lap += s * m[(0, j)] * cofactor_det(&minor, 4);
        }
        assert!((lu - lap).abs() < 1e-12 * lap.abs().max(1.0));
    }

    #[test]
    fn adjugate_examples() {
        assert_close(&Matrix::identity(4).adjugate().unwrap(), &Matrix::identity(4), 0.0);
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_close(
            &m.adjugate().unwrap(),
            &Matrix::from_rows(&[[4.0, -2.0], [-3.0, 1.0]]),
            0.0,
        );
        assert_close(&Matrix::zeros(2, 2).adjugate().unwrap(), &Matrix::zeros(2, 2), 0.0);
        assert_close(
            &Matrix::from_rows(&[[5.0]]).adjugate().unwrap(),
            &Matrix::identity(1),
            0.0,
        );
    }

    #[test]
    fn adjugate_of_scaled_identity() {
        let q = 7;
        let (adj, det) = Matrix::identity(q).scale(2.0).adjugate_with_det().unwrap();
        assert!((det - 128.0).abs() < 1e-12);
        assert_close(&adj, &Matrix::identity(q).scale(64.0), 1e-12);
    }

    #[test]
    fn adjugate_of_rank_deficient_7x7_uses_minors() {
        // rank 6: adj is rank 1 and nonzero
        let mut m = Matrix::identity(7);
        m[(6, 6)] = 0.0;
        let adj = m.adjugate().unwrap();
        let mut expect = Matrix::zeros(7, 7);
        expect[(6, 6)] = 1.0;
        assert_close(&adj, &expect, 1e-15);
    }

    #[test]
    fn invert_examples() {
        assert_close(&Matrix::identity(2).invert().unwrap(), &Matrix::identity(2), 0.0);
        assert_close(
            &b0().invert().unwrap(),
            &Matrix::from_rows(&[[1.25, -1.25], [0.0, 1.25]]),
            1e-15,
        );
        assert!(matches!(
            Matrix::zeros(3, 3).invert(),
            Err(MatError::Singular { .. })
        ));
    }

    #[test]
    fn eig_extremes_examples() {
        let (lo, hi) = Matrix::diag(&[1.0, 4.0]).sym_eig_extremes().unwrap();
        assert_eq!((lo, hi), (1.0, 4.0));
        let v = [1.0, 2.0, 2.0];
        let (lo, hi) = Matrix::outer(&v, &v).sym_eig_extremes().unwrap();
        assert!(lo.abs() < 1e-12 && (hi - 9.0).abs() < 1e-12, "{lo} {hi}");
        let asym = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(
            asym.sym_eig_extremes(),
            Err(MatError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn from_row_major_rejects_nan_and_bad_len() {
        assert!(Matrix::from_row_major(2, 2, vec![1.0; 3]).is_err());
        assert!(matches!(
            Matrix::from_row_major(1, 2, vec![1.0, f64::NAN]),
            Err(MatError::NonFinite { row: 0, col: 1 })
        ));
    }
}
