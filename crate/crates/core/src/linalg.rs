//! Dense real linear algebra for the small matrices that appear in the
//! channel models (t ≤ 8): symmetric matrices with Löwner-order tests,
//! log-determinants, Jacobi eigendecomposition, and a one-sided Jacobi SVD.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum eigenvalue accepted as PSD.
pub const PSD_TOL: f64 = 1e-9;

/// Base of every logarithm used for rates and entropies.
pub const LOG_BASE: f64 = 2.0;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Converts a natural logarithm into the reporting base.
#[inline]
pub fn to_bits(nats: f64) -> f64 {
    nats / LOG_BASE.ln()
}

/// Converts a rate in the reporting base into nats.
#[inline]
pub fn to_nats(bits: f64) -> f64 {
    bits * LOG_BASE.ln()
}

/// Real symmetric `dim × dim` matrix, stored row-major and kept exactly
/// symmetric.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

/// Eigendecomposition `A = V diag(values) Vᵀ` with ascending eigenvalues;
/// the columns of `vectors` are the eigenvectors.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries, replacing it by `(A + Aᵀ)/2`.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("symmetric matrix must have dim >= 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                op: "SymMatrix::new",
                left: (dim, dim),
                right: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        let mut m = SymMatrix { dim, data };
        m.symmetrize();
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("symmetric matrix rows must form a square".into()));
        }
        Self::new(dim, rows.iter().flatten().copied().collect())
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(dim > 0, "dim must be positive");
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = f(i, j);
            }
        }
        let mut m = SymMatrix { dim, data };
        m.symmetrize();
        m
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_fn(dim, |_, _| 0.0)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn scalar(value: f64) -> Self {
        SymMatrix { dim: 1, data: vec![value] }
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// `v vᵀ`
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix { rows: self.dim, cols: self.dim, data: self.data.clone() }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Trace inner product `tr(A B) = Σ_ij A_ij B_ij`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "inner product dimension mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `vᵀ A v`
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim, "quadratic form dimension mismatch");
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            acc += v[i] * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
        acc
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.to_matrix().mul_vec(v)
    }

    /// General (not necessarily symmetric) product `A B`.
    pub fn mul(&self, other: &SymMatrix) -> Matrix {
        self.to_matrix().matmul(&other.to_matrix()).expect("square product of equal dims")
    }

    /// Cyclic Jacobi eigendecomposition.
    pub fn eigen(&self) -> SymEigen {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut v = Matrix::identity(n).data;
        let scale = self.frobenius_norm();
        if n > 1 && scale > 0.0 {
            for _ in 0..JACOBI_MAX_SWEEPS {
                let off: f64 = (0..n)
                    .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                    .map(|(i, j)| a[i * n + j] * a[i * n + j])
                    .sum::<f64>()
                    .sqrt();
                if off <= 1e-17 * scale {
                    break;
                }
                for p in 0..n {
                    for q in (p + 1)..n {
                        let apq = a[p * n + q];
                        if apq.abs() <= 1e-300 {
                            continue;
                        }
                        let app = a[p * n + p];
                        let aqq = a[q * n + q];
                        let theta = (aqq - app) / (2.0 * apq);
                        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                        let t = if theta == 0.0 { 1.0 } else { t };
                        let c = 1.0 / (t * t + 1.0).sqrt();
                        let s = t * c;
                        for k in 0..n {
                            let akp = a[k * n + p];
                            let akq = a[k * n + q];
                            a[k * n + p] = c * akp - s * akq;
                            a[k * n + q] = s * akp + c * akq;
                        }
                        for k in 0..n {
                            let apk = a[p * n + k];
                            let aqk = a[q * n + k];
                            a[p * n + k] = c * apk - s * aqk;
                            a[q * n + k] = s * apk + c * aqk;
                        }
                        for k in 0..n {
                            let vkp = v[k * n + p];
                            let vkq = v[k * n + q];
                            v[k * n + p] = c * vkp - s * vkq;
                            v[k * n + q] = s * vkp + c * vkq;
                        }
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
        let values = order.iter().map(|&i| a[i * n + i]).collect();
        let mut vectors = Matrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            for r in 0..n {
                vectors.data[r * n + col] = v[r * n + src];
            }
        }
        SymEigen { values, vectors }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![self.data[0]],
            2 => {
                // closed form keeps the hot 2×2 path cheap
                let (a, b, d) = (self.data[0], self.data[1], self.data[3]);
                let mean = 0.5 * (a + d);
                let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
                vec![mean - rad, mean + rad]
            }
            _ => self.eigen().values,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("dim >= 1")
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// Applies `f` to the eigenvalues: `V diag(f(λ)) Vᵀ`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let eig = self.eigen();
        let n = self.dim;
        let fl: Vec<f64> = eig.values.iter().map(|&l| f(l)).collect();
        SymMatrix::from_fn(n, |i, j| {
            (0..n).map(|k| eig.vectors.get(i, k) * fl[k] * eig.vectors.get(j, k)).sum()
        })
    }

    /// Nearest PSD matrix in Frobenius norm.
    pub fn project_psd(&self) -> SymMatrix {
        self.map_eigenvalues(|l| l.max(0.0))
    }

    pub fn sqrt_psd(&self) -> SymMatrix {
        self.map_eigenvalues(|l| l.max(0.0).sqrt())
    }

    /// Lower Cholesky factor; fails unless every pivot is strictly positive.
    pub fn cholesky(&self) -> Result<Matrix> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.data[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite(format!("Cholesky pivot {j} is {d:e}")));
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = self.data[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Matrix { rows: n, cols: n, data: l })
    }

    /// Natural log-determinant of a positive definite matrix.
    pub fn ln_det(&self) -> Result<f64> {
        let l = self.cholesky()?;
        Ok(2.0 * (0..self.dim).map(|i| l.get(i, i).ln()).sum::<f64>())
    }

    /// `log₂ det(A)` of a positive definite matrix.
    pub fn logdet(&self) -> Result<f64> {
        self.ln_det().map(to_bits)
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        if let Ok(l) = self.cholesky() {
            let n = self.dim;
            let mut inv = vec![0.0; n * n];
            for col in 0..n {
                let mut e = vec![0.0; n];
                e[col] = 1.0;
                let x = chol_solve(&l, &e);
                for r in 0..n {
                    inv[r * n + col] = x[r];
                }
            }
            return SymMatrix::new(n, inv);
        }
        let eig = self.eigen();
        let max_abs = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min_abs = eig.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if max_abs == 0.0 || min_abs <= 1e-14 * max_abs {
            return Err(Error::Singular(format!(
                "min |eigenvalue| {min_abs:e} vs max {max_abs:e}"
            )));
        }
        Ok(self.map_eigenvalues(|l| 1.0 / l))
    }

    /// Solves `A x = b` for positive definite `A`.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        let l = self.cholesky()?;
        Ok(chol_solve(&l, b))
    }

    /// Minimum-norm least-squares style solve through the eigendecomposition,
    /// discarding eigenvalues below `rcond · max|λ|`.
    pub fn pinv_solve(&self, b: &[f64], rcond: f64) -> Vec<f64> {
        let eig = self.eigen();
        let n = self.dim;
        let max_abs = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut x = vec![0.0; n];
        for k in 0..n {
            let lam = eig.values[k];
            if lam.abs() <= rcond * max_abs || lam == 0.0 {
                continue;
            }
            let proj: f64 = (0..n).map(|i| eig.vectors.get(i, k) * b[i]).sum::<f64>() / lam;
            for i in 0..n {
                x[i] += proj * eig.vectors.get(i, k);
            }
        }
        x
    }
}

fn chol_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l.get(i, k) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l.get(k, i) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    y
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, c: f64) -> SymMatrix {
        self.scale(c)
    }
}

/// `min eig(A) ≥ −tol`
pub fn psd_check(a: &SymMatrix, tol: f64) -> bool {
    a.is_psd(tol)
}

/// Löwner order test `A ⪯ B`.
pub fn loewner_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            op: "loewner_leq",
            left: (a.dim, a.dim),
            right: (b.dim, b.dim),
        });
    }
    Ok(psd_check(&(b - a), tol))
}

/// Dense real `rows × cols` matrix, row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Full SVD `M = U Λ Vᵀ`: `u` is `rows × rows`, `v` is `cols × cols`, and
/// `sigma` holds the `min(rows, cols)` singular values in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    /// The `rows × cols` diagonal middle factor.
    pub fn lambda(&self) -> Matrix {
        let mut l = Matrix::zeros(self.u.rows, self.v.rows);
        for (i, s) in self.sigma.iter().enumerate() {
            l.set(i, i, *s);
        }
        l
    }

    pub fn reconstruct(&self) -> Matrix {
        self.u
            .matmul(&self.lambda())
            .and_then(|ul| ul.matmul(&self.v.transpose()))
            .expect("svd factor shapes are consistent")
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("matrix must have positive shape".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "Matrix::new",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidInput("matrix rows have unequal lengths".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn row_vector(v: &[f64]) -> Result<Self> {
        Self::new(1, v.len(), v.to_vec())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m.data[i * values.len() + i] = *v;
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

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op: "sub",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Gram matrix `Mᵀ M`.
    pub fn gram(&self) -> SymMatrix {
        let n = self.cols;
        SymMatrix::from_fn(n, |i, j| (0..self.rows).map(|k| self.get(k, i) * self.get(k, j)).sum())
    }

    /// Congruence `M A Mᵀ` for a symmetric `A` of size `cols`.
    pub fn sandwich(&self, a: &SymMatrix) -> Result<SymMatrix> {
        if a.dim() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "sandwich",
                left: self.shape(),
                right: (a.dim(), a.dim()),
            });
        }
        let ma = self.matmul(&a.to_matrix())?;
        let r = self.rows;
        Ok(SymMatrix::from_fn(r, |i, j| {
            (0..self.cols).map(|k| ma.get(i, k) * self.get(j, k)).sum()
        }))
    }

    /// Congruence `Mᵀ A M` for a symmetric `A` of size `rows`.
    pub fn sandwich_t(&self, a: &SymMatrix) -> Result<SymMatrix> {
        self.transpose().sandwich(a)
    }

    /// One-sided (Hestenes) Jacobi SVD with orthonormal completion of the
    /// singular-vector bases.
    pub fn svd(&self) -> Svd {
        if self.rows < self.cols {
            let t = self.transpose().svd();
            return Svd { u: t.v, sigma: t.sigma, v: t.u };
        }
        let (m, n) = (self.rows, self.cols);
        let mut a = self.data.clone();
        let mut v = Matrix::identity(n).data;
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                    for i in 0..m {
                        let ap = a[i * n + p];
                        let aq = a[i * n + q];
                        alpha += ap * ap;
                        beta += aq * aq;
                        gamma += ap * aq;
                    }
                    if gamma == 0.0 || gamma.abs() <= 1e-16 * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let ap = a[i * n + p];
                        let aq = a[i * n + q];
                        a[i * n + p] = c * ap - s * aq;
                        a[i * n + q] = s * ap + c * aq;
                    }
                    for i in 0..n {
                        let vp = v[i * n + p];
                        let vq = v[i * n + q];
                        v[i * n + p] = c * vp - s * vq;
                        v[i * n + q] = s * vp + c * vq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let norms: Vec<f64> =
            (0..n).map(|j| (0..m).map(|i| a[i * n + j] * a[i * n + j]).sum::<f64>().sqrt()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
        let sigma_max = norms.iter().fold(0.0f64, |acc, x| acc.max(*x));
        let cutoff = sigma_max * 1e-14 * (m as f64);

        let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut v_sorted = Matrix::zeros(n, n);
        let mut sigma = Vec::with_capacity(n);
        for (dst, &src) in order.iter().enumerate() {
            sigma.push(norms[src]);
            for i in 0..n {
                v_sorted.data[i * n + dst] = v[i * n + src];
            }
            if norms[src] > cutoff && norms[src] > 0.0 {
                u_cols.push((0..m).map(|i| a[i * n + src] / norms[src]).collect());
            } else {
                u_cols.push(Vec::new());
            }
        }
        // complete U column by column so that zero singular values keep their slot
        let mut basis: Vec<Vec<f64>> = u_cols.iter().filter(|c| !c.is_empty()).cloned().collect();
        let mut next_e = 0usize;
        let mut complete = |basis: &mut Vec<Vec<f64>>| -> Vec<f64> {
            while next_e < m {
                let mut e = vec![0.0; m];
                e[next_e] = 1.0;
                next_e += 1;
                for _ in 0..2 {
                    for b in basis.iter() {
                        let d: f64 = b.iter().zip(&e).map(|(x, y)| x * y).sum();
                        for (ei, bi) in e.iter_mut().zip(b) {
                            *ei -= d * bi;
                        }
                    }
                }
                let nrm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
                if nrm > 1e-8 {
                    let col: Vec<f64> = e.iter().map(|x| x / nrm).collect();
                    basis.push(col.clone());
                    return col;
                }
            }
            unreachable!("orthonormal completion exhausted the standard basis")
        };
        for col in u_cols.iter_mut() {
            if col.is_empty() {
                *col = complete(&mut basis);
            }
        }
        while u_cols.len() < m {
            u_cols.push(complete(&mut basis));
        }
        let mut u = Matrix::zeros(m, m);
        for (j, col) in u_cols.iter().enumerate() {
            for i in 0..m {
                u.data[i * m + j] = col[i];
            }
        }
        Svd { u, sigma, v: v_sorted }
    }

    pub fn min_singular_value(&self) -> f64 {
        let s = self.svd().sigma;
        if self.is_square() {
            *s.last().expect("nonempty")
        } else {
            0.0
        }
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

/// Free functions mirroring the module's operation names.
pub fn logdet(a: &SymMatrix) -> Result<f64> {
    a.logdet()
}

pub fn inverse(a: &SymMatrix) -> Result<SymMatrix> {
    a.inverse()
}

pub fn svd(m: &Matrix) -> Svd {
    m.svd()
}

pub fn eig_sym(a: &SymMatrix) -> SymEigen {
    a.eigen()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn psd_examples() {
        assert!(psd_check(&SymMatrix::zeros(3), 1e-9));
        assert!(psd_check(&sym(&[&[2.0, 1.0], &[1.0, 2.0]]), 1e-9));
        assert!(!psd_check(&sym(&[&[1.0, 2.0], &[2.0, 1.0]]), 1e-9));
    }

    #[test]
    fn loewner_examples() {
        let s = sym(&[&[3.3333, 1.2346], &[1.2346, 1.6667]]);
        assert!(loewner_leq(&s, &s, PSD_TOL).unwrap());
        assert!(loewner_leq(&SymMatrix::zeros(2), &s, PSD_TOL).unwrap());
        let two = SymMatrix::identity(2).scale(2.0);
        assert!(!loewner_leq(&two, &SymMatrix::identity(2), PSD_TOL).unwrap());
        assert!(matches!(
            loewner_leq(&SymMatrix::identity(2), &SymMatrix::identity(3), PSD_TOL),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn logdet_examples() {
        assert_eq!(SymMatrix::identity(3).logdet().unwrap(), 0.0);
        assert!((SymMatrix::diag(&[2.0, 2.0]).logdet().unwrap() - 2.0).abs() < 1e-15);
        let a = sym(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!((a.logdet().unwrap() - 3f64.log2()).abs() < 1e-14);
        assert!(matches!(
            sym(&[&[1.0, 2.0], &[2.0, 1.0]]).logdet(),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(SymMatrix::zeros(2).logdet().is_err());
    }

    #[test]
    fn inverse_svd_eig_examples() {
        assert_eq!(SymMatrix::identity(2).inverse().unwrap(), SymMatrix::identity(2));
        let s = Matrix::diag(&[3.0, 0.0]).svd();
        assert_eq!(s.sigma, vec![3.0, 0.0]);
        assert_eq!(s.lambda(), Matrix::diag(&[3.0, 0.0]));
        let e = sym(&[&[2.0, 1.0], &[1.0, 2.0]]).eigen();
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] - 3.0).abs() < 1e-14);
        assert!(matches!(SymMatrix::zeros(2).inverse(), Err(Error::Singular(_))));
        // indefinite but invertible goes through the eigen path
        let ind = sym(&[&[1.0, 2.0], &[2.0, 1.0]]);
        let prod = ind.mul(&ind.inverse().unwrap());
        assert!(prod.sub(&Matrix::identity(2)).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn symmetrizes_on_construction() {
        let m = SymMatrix::new(2, vec![1.0, 2.0, 4.0, 1.0]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert!(SymMatrix::new(0, vec![]).is_err());
    }

    #[test]
    fn svd_wide_and_tall() {
        let h = Matrix::from_rows(&[vec![2.0, 0.4]]).unwrap();
        let s = h.svd();
        assert_eq!(s.u.shape(), (1, 1));
        assert_eq!(s.v.shape(), (2, 2));
        assert!(s.reconstruct().sub(&h).unwrap().frobenius_norm() < 1e-14);
        let tall = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let st = tall.svd();
        assert!(st.reconstruct().sub(&tall).unwrap().frobenius_norm() < 1e-12);
        let utu = st.u.transpose().matmul(&st.u).unwrap();
        assert!(utu.sub(&Matrix::identity(3)).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn json_round_trip_uses_rows() {
        let m = sym(&[&[1.0, 0.5], &[0.5, 2.0]]);
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, "[[1.0,0.5],[0.5,2.0]]");
        let back: SymMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
