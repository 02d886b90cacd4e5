//! Complex linear-algebra kernels shared by the whole receive chain:
//! dense complex matrices, unitary DFTs, Hermitian eigendecomposition,
//! Moore-Penrose pseudo-inverse, and a matrix-free LSQR solver.
//!
//! Everything is plain `f64`/`Complex64`; decompositions are Jacobi-based
//! so results are deterministic for a given input on one platform.

pub mod lsqr;
pub mod rng;

pub use lsqr::{adjoint_mismatch, lsqr_solve, DenseOperator, LinearOperator, LsqrSolution};
pub use rng::RngStream;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix dimensions {rows}x{cols} are invalid")]
    BadDimensions { rows: usize, cols: usize },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("expected {expected} entries, got {got}")]
    BadEntryCount { expected: usize, got: usize },
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    Mismatch(String),
}

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, NumericsError> {
        if rows == 0 || cols == 0 {
            return Err(NumericsError::BadDimensions { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(NumericsError::BadEntryCount {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let row_k = &other.data[k * other.cols..(k + 1) * other.cols];
                let row_i = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in row_i.iter_mut().zip(row_k.iter()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, x.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// New matrix keeping the listed columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |r, j| self.get(r, idx[j]))
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.frobenius_norm().max(1e-300);
        let mut asym = 0.0f64;
        for r in 0..self.rows {
            for c in 0..=r {
                let d = self.get(r, c) - self.get(c, r).conj();
                asym += d.norm_sqr();
            }
        }
        asym.sqrt() / scale <= rel_tol
    }

    /// Moore-Penrose pseudo-inverse via one-sided Jacobi SVD.
    ///
    /// Singular values below `1e-12 * sigma_max` are truncated and the result
    /// is flagged as rank deficient.
    pub fn pinv(&self) -> Pinv {
        if self.rows < self.cols {
            let p = self.hermitian().pinv();
            return Pinv {
                matrix: p.matrix.hermitian(),
                rank: p.rank,
                rank_deficient: p.rank_deficient,
                condition: p.condition,
            };
        }
        let (u_cols, sigma, v) = svd_one_sided(self);
        let n = self.cols;
        let sigma_max = sigma.iter().cloned().fold(0.0f64, f64::max);
        let cut = 1e-12 * sigma_max;
        let mut rank = 0usize;
        let mut matrix = ComplexMatrix::zeros(n, self.rows);
        for (j, &s) in sigma.iter().enumerate() {
            if s > cut && s > 0.0 {
                rank += 1;
                let inv_s = 1.0 / s;
                for r in 0..n {
                    let vr = v.get(r, j);
                    for c in 0..self.rows {
                        let add = vr * u_cols[j][c].conj() * inv_s;
                        let cur = matrix.get(r, c);
                        matrix.set(r, c, cur + add);
                    }
                }
            }
        }
        let sigma_min_kept = sigma
            .iter()
            .cloned()
            .filter(|&s| s > cut && s > 0.0)
            .fold(f64::INFINITY, f64::min);
        let condition = if rank == 0 || !sigma_min_kept.is_finite() {
            f64::INFINITY
        } else {
            sigma_max / sigma_min_kept
        };
        Pinv {
            matrix,
            rank,
            rank_deficient: rank < n,
            condition,
        }
    }

    /// Hermitian eigendecomposition `A = V diag(w) V^H`, eigenvalues ascending.
    pub fn herm_evd(&self) -> Result<(Vec<f64>, ComplexMatrix), NumericsError> {
        if self.rows != self.cols {
            return Err(NumericsError::BadDimensions {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if !self.is_hermitian(1e-10) {
            let asym = self.sub(&self.hermitian()).frobenius_norm()
                / self.frobenius_norm().max(1e-300);
            return Err(NumericsError::NotHermitian { asymmetry: asym });
        }
        let n = self.rows;
        let mut a = self.clone();
        // Symmetrize exactly so rotations see a true Hermitian matrix.
        for r in 0..n {
            for c in 0..r {
                let m = (a.get(r, c) + a.get(c, r).conj()) * 0.5;
                a.set(r, c, m);
                a.set(c, r, m.conj());
            }
            let d = a.get(r, r);
            a.set(r, r, Complex64::new(d.re, 0.0));
        }
        let mut v = ComplexMatrix::identity(n);
        let fro = a.frobenius_norm().max(1e-300);
        let off_tol = 1e-14 * fro;
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for r in 0..n {
                for c in (r + 1)..n {
                    off += a.get(r, c).norm_sqr();
                }
            }
            if (2.0 * off).sqrt() <= off_tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    let mag = apq.norm();
                    if mag <= off_tol / (n as f64) {
                        continue;
                    }
                    let u = apq / mag;
                    let tau = (a.get(q, q).re - a.get(p, p).re) / (2.0 * mag);
                    let sgn = if tau < 0.0 { -1.0 } else { 1.0 };
                    let t = -sgn / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    // R[p][p]=c, R[p][q]=-s*u, R[q][p]=s*conj(u), R[q][q]=c
                    let su = u * s;
                    let suc = u.conj() * s;
                    // A := A * R (columns p,q)
                    for i in 0..n {
                        let aip = a.get(i, p);
                        let aiq = a.get(i, q);
                        a.set(i, p, aip * c + aiq * suc);
                        a.set(i, q, aiq * c - aip * su);
                    }
                    // A := R^H * A (rows p,q)
                    for j in 0..n {
                        let apj = a.get(p, j);
                        let aqj = a.get(q, j);
                        a.set(p, j, apj * c + aqj * su);
                        a.set(q, j, aqj * c - apj * suc);
                    }
                    // V := V * R
                    for i in 0..n {
                        let vip = v.get(i, p);
                        let viq = v.get(i, q);
                        v.set(i, p, vip * c + viq * suc);
                        v.set(i, q, viq * c - vip * su);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
        order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
        let eigenvectors = v.select_columns(&order);
        Ok((eigenvalues, eigenvectors))
    }
}

/// Pseudo-inverse together with rank diagnostics.
#[derive(Debug, Clone)]
pub struct Pinv {
    pub matrix: ComplexMatrix,
    pub rank: usize,
    pub rank_deficient: bool,
    pub condition: f64,
}

/// Unitary DFT matrix `F[j,k] = exp(-2*pi*i*j*k/n) / sqrt(n)`, so `F F^H = I`.
pub fn unitary_dft(n: usize) -> ComplexMatrix {
    assert!(n >= 1, "DFT size must be at least 1");
    let scale = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |j, k| {
        let angle = -2.0 * std::f64::consts::PI * (j as f64) * (k as f64) / (n as f64);
        Complex64::from_polar(scale, angle)
    })
}

/// One-sided Jacobi SVD of `a` (rows >= cols): returns left singular vectors
/// as columns, singular values (descending), and `V`.
fn svd_one_sided(a: &ComplexMatrix) -> (Vec<Vec<Complex64>>, Vec<f64>, ComplexMatrix) {
    let m = a.rows();
    let n = a.cols();
    let mut w: Vec<Vec<Complex64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v = ComplexMatrix::identity(n);
    let eps = 1e-14;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = w[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = w[p]
                    .iter()
                    .zip(w[q].iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let g = gamma.norm();
                if g <= eps * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let u = gamma / g;
                let tau = (beta - alpha) / (2.0 * g);
                let sgn = if tau < 0.0 { -1.0 } else { 1.0 };
                let t = -sgn / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let su = u * s;
                let suc = u.conj() * s;
                for i in 0..m {
                    let wip = w[p][i];
                    let wiq = w[q][i];
                    w[p][i] = wip * c + wiq * suc;
                    w[q][i] = wiq * c - wip * su;
                }
                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, vip * c + viq * suc);
                    v.set(i, q, viq * c - vip * su);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = w
        .iter()
        .map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let mut u_cols = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for &j in &order {
        let s = norms[j];
        sigma.push(s);
        if s > 0.0 {
            u_cols.push(w[j].iter().map(|z| z / s).collect());
        } else {
            u_cols.push(vec![Complex64::new(0.0, 0.0); m]);
        }
    }
    let v_sorted = v.select_columns(&order);
    (u_cols, sigma, v_sorted)
}
