use std::time::Instant;

use crate::error::{CutFemError, Result, SolveReport};
use crate::scalar::Real;

use super::sparse::SparseMatrix;

/// Iteration cap per unknown when none is given.
pub const DEFAULT_ITERATIONS_PER_DOF: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions<T> {
    /// Relative residual target `|b - A x| / |b|`.
    pub tol: T,
    /// Defaults to `20 * dim`.
    pub max_iterations: Option<usize>,
}

impl<T: Real> CgOptions<T> {
    pub fn new(tol: T) -> Self {
        Self {
            tol,
            max_iterations: None,
        }
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Solves `A x = b` for symmetric positive definite `A` by Jacobi-preconditioned
/// conjugate gradients started from `x = 0`.
pub fn solve_spd<T: Real>(a: &SparseMatrix<T>, b: &[T], tol: T) -> Result<(Vec<T>, SolveReport)> {
    solve_spd_with(a, b, &CgOptions::new(tol))
}

pub fn solve_spd_with<T: Real>(
    a: &SparseMatrix<T>,
    b: &[T],
    options: &CgOptions<T>,
) -> Result<(Vec<T>, SolveReport)> {
    let start = Instant::now();
    let n = a.dim();
    if b.len() != n {
        return Err(CutFemError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if !(options.tol > T::zero()) {
        return Err(CutFemError::InvalidConfiguration(
            "solver tolerance must be positive".into(),
        ));
    }
    let cap = options
        .max_iterations
        .unwrap_or(DEFAULT_ITERATIONS_PER_DOF * n.max(1));
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > T::zero())) {
        return Err(CutFemError::ContractViolation(format!(
            "matrix diagonal entry {i} is not positive"
        )));
    }
    let inv_diag: Vec<T> = diag.iter().map(|&d| T::one() / d).collect();

    let mut x = vec![T::zero(); n];
    let b_norm = norm(b);
    let report = |iterations: usize, residual: T| SolveReport {
        iterations,
        residual: residual.as_f64(),
        wall_time: start.elapsed(),
    };
    if b_norm == T::zero() {
        return Ok((x, report(0, T::zero())));
    }

    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut rel = T::one();

    while iterations < cap {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) || !pap.is_finite() {
            return Err(CutFemError::NonConvergence {
                report: report(iterations, rel),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        rel = norm(&r) / b_norm;

        if rel <= options.tol {
            // Recursive residual can drift from the true one; confirm and
            // restart from the true residual if needed.
            a.matvec_into(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            rel = norm(&r) / b_norm;
            if rel <= options.tol {
                return Ok((x, report(iterations, rel)));
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }

        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    a.matvec_into(&x, &mut ap);
    let true_rel = norm(
        &b.iter()
            .zip(&ap)
            .map(|(&bi, &ai)| bi - ai)
            .collect::<Vec<_>>(),
    ) / b_norm;
    Err(CutFemError::NonConvergence {
        report: report(iterations, true_rel),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_converges_in_one_step() {
        let a = SparseMatrix::<f64>::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let (x, rep) = solve_spd(&a, &b, 1e-12).unwrap();
        assert_eq!(x, b);
        assert!(rep.iterations <= 1);
    }

    #[test]
    fn diagonal_system() {
        let a = SparseMatrix::from_diagonal(&[1.0, 2.0, 4.0]);
        let (x, _) = solve_spd(&a, &[1.0, 2.0, 4.0], 1e-14).unwrap();
        for xi in x {
            assert!((xi - 1.0f64).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_rhs_and_bad_input() {
        let a = SparseMatrix::<f64>::identity(3);
        let (x, rep) = solve_spd(&a, &[0.0; 3], 1e-10).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(rep.iterations, 0);
        assert!(matches!(
            solve_spd(&a, &[1.0; 2], 1e-10),
            Err(CutFemError::DimensionMismatch { .. })
        ));
        let indefinite = SparseMatrix::from_dense(2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            solve_spd(&indefinite, &[1.0, 0.0], 1e-10),
            Err(CutFemError::NonConvergence { .. })
        ));
    }

    #[test]
    fn cap_exceeded_reports() {
        let a = SparseMatrix::from_dense(3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let opts = CgOptions {
            tol: 1e-14,
            max_iterations: Some(1),
        };
        match solve_spd_with(&a, &[1.0, 2.0, 3.0], &opts) {
            Err(CutFemError::NonConvergence { report }) => {
                assert_eq!(report.iterations, 1);
                assert!(report.residual > 1e-14);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
