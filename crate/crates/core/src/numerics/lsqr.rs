//! Matrix-free least squares: the `LinearOperator` abstraction and an LSQR
//! solver (Paige & Saunders bidiagonalization) over complex operands.
//!
//! The detector applies banded channel operators without ever materializing
//! them, so the solver only sees `y = A x` / `x = A^H y` callbacks.

use super::rng::RngStream;
use super::ComplexMatrix;
use num_complex::Complex64;

/// Abstract complex linear map with an explicit adjoint.
///
/// Implementations must satisfy `<A x, y> = <x, A^H y>` for all vectors; the
/// randomized check in [`adjoint_mismatch`] is run against every operator the
/// test suite constructs.
pub trait LinearOperator {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    /// `y = A x` (y is overwritten).
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
    /// `x = A^H y` (x is overwritten).
    fn apply_adjoint(&self, y: &[Complex64], x: &mut [Complex64]);
}

/// Dense matrix viewed as an operator.
pub struct DenseOperator<'a> {
    matrix: &'a ComplexMatrix,
}

impl<'a> DenseOperator<'a> {
    pub fn new(matrix: &'a ComplexMatrix) -> Self {
        Self { matrix }
    }
}

impl LinearOperator for DenseOperator<'_> {
    fn in_dim(&self) -> usize {
        self.matrix.cols()
    }

    fn out_dim(&self) -> usize {
        self.matrix.rows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let out = self.matrix.mul_vec(x);
        y.copy_from_slice(&out);
    }

    fn apply_adjoint(&self, y: &[Complex64], x: &mut [Complex64]) {
        for (c, out) in x.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..self.matrix.rows() {
                acc += self.matrix.get(r, c).conj() * y[r];
            }
            *out = acc;
        }
    }
}

/// Largest relative `|<Ax,y> - <x,A^H y>|` over random probes.
pub fn adjoint_mismatch(op: &dyn LinearOperator, rng: &mut RngStream, trials: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = rng.complex_gaussian(op.in_dim(), 1.0);
        let y = rng.complex_gaussian(op.out_dim(), 1.0);
        let mut ax = vec![Complex64::new(0.0, 0.0); op.out_dim()];
        let mut ahy = vec![Complex64::new(0.0, 0.0); op.in_dim()];
        op.apply(&x, &mut ax);
        op.apply_adjoint(&y, &mut ahy);
        let lhs: Complex64 = ax.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
        let rhs: Complex64 = x.iter().zip(ahy.iter()).map(|(a, b)| a.conj() * b).sum();
        let scale = lhs.norm().max(rhs.norm()).max(1e-30);
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    worst
}

#[derive(Debug, Clone)]
pub struct LsqrSolution {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    /// Estimated `||A x - b||` at termination.
    pub residual_norm: f64,
}

fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Minimize `||A x - b||_2` with LSQR. Returns the best iterate together with
/// a convergence flag; `max_iter` reached without meeting `tol` leaves the
/// flag unset.
pub fn lsqr_solve(
    op: &dyn LinearOperator,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> LsqrSolution {
    assert_eq!(op.out_dim(), b.len(), "rhs length must match operator rows");
    assert!(tol > 0.0, "tolerance must be positive");
    let n = op.in_dim();
    let m = op.out_dim();
    let mut x = vec![Complex64::new(0.0, 0.0); n];

    let mut u = b.to_vec();
    let mut beta = norm2(&u);
    let bnorm = beta;
    if beta == 0.0 {
        return LsqrSolution {
            x,
            iterations: 0,
            converged: true,
            residual_norm: 0.0,
        };
    }
    for z in u.iter_mut() {
        *z /= beta;
    }
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    op.apply_adjoint(&u, &mut v);
    let mut alpha = norm2(&v);
    if alpha > 0.0 {
        for z in v.iter_mut() {
            *z /= alpha;
        }
    }
    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm_sq = 0.0f64;
    let mut tmp_m = vec![Complex64::new(0.0, 0.0); m];
    let mut tmp_n = vec![Complex64::new(0.0, 0.0); n];

    let mut converged = alpha * beta == 0.0;
    let mut iterations = 0;
    while iterations < max_iter && !converged {
        iterations += 1;
        // Bidiagonalization step: beta*u = A*v - alpha*u ; alpha*v = A^H*u - beta*v
        op.apply(&v, &mut tmp_m);
        for (ui, ti) in u.iter_mut().zip(tmp_m.iter()) {
            *ui = ti - *ui * alpha;
        }
        beta = norm2(&u);
        if beta > 0.0 {
            for z in u.iter_mut() {
                *z /= beta;
            }
            op.apply_adjoint(&u, &mut tmp_n);
            for (vi, ti) in v.iter_mut().zip(tmp_n.iter()) {
                *vi = ti - *vi * beta;
            }
            alpha = norm2(&v);
            if alpha > 0.0 {
                for z in v.iter_mut() {
                    *z /= alpha;
                }
            }
        }
        anorm_sq += alpha * alpha + beta * beta;

        // Orthogonal transformation of the bidiagonal system.
        let rho = (rhobar * rhobar + beta * beta).sqrt();
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;

        let t1 = phi / rho;
        let t2 = -theta / rho;
        for i in 0..n {
            x[i] += w[i] * t1;
            w[i] = v[i] + w[i] * t2;
        }

        // Stopping tests (Paige-Saunders S1/S2 with atol = btol = tol).
        let rnorm = phibar;
        let arnorm = alpha * phibar * c.abs();
        let anorm = anorm_sq.sqrt();
        let xnorm = norm2(&x);
        let test1 = rnorm / bnorm;
        let test2 = if anorm > 0.0 && rnorm > 0.0 {
            arnorm / (anorm * rnorm)
        } else {
            0.0
        };
        if test1 <= tol * (1.0 + anorm * xnorm / bnorm) || test2 <= tol {
            converged = true;
        }
    }

    LsqrSolution {
        x,
        iterations,
        converged,
        residual_norm: phibar,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system_returns_rhs() {
        let a = ComplexMatrix::identity(4);
        let op = DenseOperator::new(&a);
        let mut rng = RngStream::new(1, 1);
        let b = rng.complex_gaussian(4, 1.0);
        let sol = lsqr_solve(&op, &b, 1e-10, 50);
        assert!(sol.converged);
        for (xi, bi) in sol.x.iter().zip(b.iter()) {
            assert!((xi - bi).norm() < 1e-8);
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let a = ComplexMatrix::identity(4);
        let op = DenseOperator::new(&a);
        let b = vec![Complex64::new(0.0, 0.0); 4];
        let sol = lsqr_solve(&op, &b, 1e-10, 50);
        assert!(sol.converged);
        assert_eq!(sol.iterations, 0);
        assert!(sol.x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn matches_pseudo_inverse_on_overdetermined_system() {
        let mut rng = RngStream::new(21, 4);
        let data = rng.complex_gaussian(20 * 12, 1.0);
        let a = ComplexMatrix::new(20, 12, data).unwrap();
        let b = rng.complex_gaussian(20, 1.0);
        let direct = a.pinv().matrix.mul_vec(&b);
        let sol = lsqr_solve(&DenseOperator::new(&a), &b, 1e-8, 200);
        assert!(sol.converged);
        let num: f64 = sol
            .x
            .iter()
            .zip(direct.iter())
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den = direct.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 1e-6, "relative error {}", num / den);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let mut rng = RngStream::new(9, 2);
        let data = rng.complex_gaussian(30 * 20, 1.0);
        let a = ComplexMatrix::new(30, 20, data).unwrap();
        let b = rng.complex_gaussian(30, 1.0);
        let sol = lsqr_solve(&DenseOperator::new(&a), &b, 1e-14, 2);
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 2);
    }

    #[test]
    fn dense_operator_adjoint_is_consistent() {
        let mut rng = RngStream::new(2, 8);
        let data = rng.complex_gaussian(9 * 5, 1.0);
        let a = ComplexMatrix::new(9, 5, data).unwrap();
        let op = DenseOperator::new(&a);
        let err = adjoint_mismatch(&op, &mut rng, 10);
        assert!(err < 1e-10, "adjoint mismatch {err}");
    }
}
