use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CutFemError, Result};
use crate::scalar::Real;

use super::cg::{dot, norm, solve_spd, CgOptions};
use super::sparse::SparseMatrix;

/// Seed of the start vectors.
pub const EIGEN_SEED: u64 = 42;
pub const DEFAULT_EIGEN_TOL: f64 = 1e-6;
pub const DEFAULT_EIGEN_ITERATIONS: usize = 20_000;
/// Number of vectors iterated together.
pub const DEFAULT_BLOCK_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions<T> {
    /// Relative change of the extreme Ritz value at which iteration stops.
    pub tol: T,
    pub max_iterations: usize,
    pub seed: u64,
    pub block_size: usize,
}

impl<T: Real> Default for EigenOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(DEFAULT_EIGEN_TOL),
            max_iterations: DEFAULT_EIGEN_ITERATIONS,
            seed: EIGEN_SEED,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate<T> {
    pub lambda_max: T,
    pub lambda_min: T,
    /// `lambda_max / lambda_min`.
    pub kappa: T,
    pub power_iterations: usize,
    pub inverse_iterations: usize,
    /// CG iterations summed over all inner solves.
    pub inner_iterations: usize,
}

fn start_block<T: Real>(rng: &mut ChaCha8Rng, n: usize, size: usize) -> Vec<Vec<T>> {
    let mut block: Vec<Vec<T>> = (0..size.clamp(1, n))
        .map(|_| (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect())
        .collect();
    orthonormalize(&mut block);
    block
}

/// Modified Gram-Schmidt applied twice; nearly dependent vectors are dropped.
fn orthonormalize<T: Real>(block: &mut Vec<Vec<T>>) {
    let mut kept: Vec<Vec<T>> = Vec::with_capacity(block.len());
    for mut v in block.drain(..) {
        let original = norm(&v);
        if !(original > T::zero()) {
            continue;
        }
        for _ in 0..2 {
            for q in &kept {
                let c = dot(q, &v);
                for (x, &qi) in v.iter_mut().zip(q) {
                    *x -= c * qi;
                }
            }
        }
        let len = norm(&v);
        if len > original * T::epsilon().sqrt() {
            for x in &mut v {
                *x /= len;
            }
            kept.push(v);
        }
    }
    *block = kept;
}

/// Eigenpairs of a small symmetric row-major matrix by cyclic Jacobi
/// rotations; eigenvalues ascending, eigenvectors as columns of the second
/// result.
fn small_symmetric_eigen<T: Real>(p: usize, mut m: Vec<T>) -> (Vec<T>, Vec<T>) {
    let mut v = vec![T::zero(); p * p];
    for i in 0..p {
        v[i * p + i] = T::one();
    }
    let two = T::lit(2.0);
    for _ in 0..64 {
        let off: T = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * p + j] * m[i * p + j])
            .sum();
        let diag: T = (0..p).map(|i| m[i * p + i] * m[i * p + i]).sum();
        if off <= T::epsilon() * T::epsilon() * diag {
            break;
        }
        for a in 0..p {
            for b in a + 1..p {
                let mab = m[a * p + b];
                if mab == T::zero() {
                    continue;
                }
                let theta = (m[b * p + b] - m[a * p + a]) / (two * mab);
                let t = if theta == T::zero() {
                    T::one()
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..p {
                    let (ka, kb) = (m[k * p + a], m[k * p + b]);
                    m[k * p + a] = c * ka - s * kb;
                    m[k * p + b] = s * ka + c * kb;
                }
                for k in 0..p {
                    let (ak, bk) = (m[a * p + k], m[b * p + k]);
                    m[a * p + k] = c * ak - s * bk;
                    m[b * p + k] = s * ak + c * bk;
                }
                for k in 0..p {
                    let (ka, kb) = (v[k * p + a], v[k * p + b]);
                    v[k * p + a] = c * ka - s * kb;
                    v[k * p + b] = s * ka + c * kb;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| m[i * p + i].partial_cmp(&m[j * p + j]).unwrap());
    let values = order.iter().map(|&i| m[i * p + i]).collect();
    let mut vectors = vec![T::zero(); p * p];
    for (col, &i) in order.iter().enumerate() {
        for k in 0..p {
            vectors[k * p + col] = v[k * p + i];
        }
    }
    (values, vectors)
}

/// Rayleigh-Ritz on the span of an orthonormal block: returns the Ritz values
/// ascending and replaces the block by the Ritz vectors in the same order.
fn rayleigh_ritz<T: Real>(a: &SparseMatrix<T>, block: &mut Vec<Vec<T>>) -> Vec<T> {
    let p = block.len();
    let n = a.dim();
    let images: Vec<Vec<T>> = block
        .iter()
        .map(|q| {
            let mut y = vec![T::zero(); n];
            a.matvec_into(q, &mut y);
            y
        })
        .collect();
    let mut h = vec![T::zero(); p * p];
    for i in 0..p {
        for j in i..p {
            let half = T::lit(0.5);
            let value = half * (dot(&block[i], &images[j]) + dot(&block[j], &images[i]));
            h[i * p + j] = value;
            h[j * p + i] = value;
        }
    }
    let (values, vectors) = small_symmetric_eigen(p, h);
    let ritz: Vec<Vec<T>> = (0..p)
        .map(|col| {
            let mut x = vec![T::zero(); n];
            for (k, q) in block.iter().enumerate() {
                let c = vectors[k * p + col];
                for (xi, &qi) in x.iter_mut().zip(q) {
                    *xi += c * qi;
                }
            }
            x
        })
        .collect();
    *block = ritz;
    values
}

/// Stopping test on a sequence of Ritz values. Besides the relative change
/// itself, the geometric tail `change * r / (1 - r)` with the observed
/// contraction `r` must be below the tolerance, so that slowly converging
/// sequences are not stopped early.
struct RitzMonitor<T> {
    previous: Option<T>,
    change: Option<T>,
}

impl<T: Real> RitzMonitor<T> {
    fn new() -> Self {
        Self {
            previous: None,
            change: None,
        }
    }

    fn converged(&mut self, value: T, tol: T) -> bool {
        let Some(previous) = self.previous.replace(value) else {
            return false;
        };
        let change = (value - previous).abs();
        let last = self.change.replace(change);
        let bound = tol * value.abs();
        if change == T::zero() {
            return true;
        }
        let Some(last) = last else {
            return false;
        };
        let rate = change / last;
        change <= bound && rate < T::one() && change * rate / (T::one() - rate) <= bound
    }
}

fn check_options<T: Real>(a: &SparseMatrix<T>, options: &EigenOptions<T>) -> Result<()> {
    if a.dim() == 0 {
        return Err(CutFemError::InvalidConfiguration(
            "eigenvalue estimate of an empty matrix".into(),
        ));
    }
    if !(options.tol > T::zero()) {
        return Err(CutFemError::InvalidConfiguration(
            "eigenvalue tolerance must be positive".into(),
        ));
    }
    if options.block_size == 0 {
        return Err(CutFemError::InvalidConfiguration(
            "eigen block size must be positive".into(),
        ));
    }
    Ok(())
}

/// Largest eigenvalue by block power iteration; returns `(lambda, iterations)`.
pub fn largest_eigenvalue<T: Real>(
    a: &SparseMatrix<T>,
    options: &EigenOptions<T>,
) -> Result<(T, usize)> {
    check_options(a, options)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    power_iteration(
        a,
        start_block(&mut rng, a.dim(), options.block_size),
        options,
    )
}

fn power_iteration<T: Real>(
    a: &SparseMatrix<T>,
    mut block: Vec<Vec<T>>,
    options: &EigenOptions<T>,
) -> Result<(T, usize)> {
    let n = a.dim();
    let mut monitor = RitzMonitor::new();
    for k in 1..=options.max_iterations {
        block = block
            .iter()
            .map(|q| {
                let mut y = vec![T::zero(); n];
                a.matvec_into(q, &mut y);
                y
            })
            .collect();
        orthonormalize(&mut block);
        if block.is_empty() {
            return Ok((T::zero(), k));
        }
        let lambda = *rayleigh_ritz(a, &mut block).last().expect("nonempty block");
        if monitor.converged(lambda, options.tol) {
            return Ok((lambda, k));
        }
    }
    Err(CutFemError::EigenNonConvergence {
        iterations: options.max_iterations,
    })
}

/// Two-sided spectral estimate of an SPD matrix: block power iteration for
/// the top of the spectrum, block inverse iteration (CG inner solves) for the
/// bottom.
pub fn condition_estimate<T: Real>(a: &SparseMatrix<T>, tol: T) -> Result<ConditionEstimate<T>> {
    condition_estimate_with(
        a,
        &EigenOptions {
            tol,
            ..EigenOptions::default()
        },
    )
}

pub fn condition_estimate_with<T: Real>(
    a: &SparseMatrix<T>,
    options: &EigenOptions<T>,
) -> Result<ConditionEstimate<T>> {
    check_options(a, options)?;
    let n = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let max_block = start_block::<T>(&mut rng, n, options.block_size);
    let mut block = start_block::<T>(&mut rng, n, options.block_size);

    let (lambda_max, power_iterations) = power_iteration(a, max_block, options)?;

    let inner = CgOptions::new((options.tol * T::lit(1e-3)).max(T::epsilon() * T::lit(1e3)));
    let mut monitor = RitzMonitor::new();
    let mut inner_iterations = 0;
    for k in 1..=options.max_iterations {
        let mut solved = Vec::with_capacity(block.len());
        for q in &block {
            let (y, report) = solve_spd(a, q, inner.tol)?;
            inner_iterations += report.iterations;
            solved.push(y);
        }
        block = solved;
        orthonormalize(&mut block);
        if block.is_empty() {
            return Err(CutFemError::Internal(
                "inverse iteration lost its block".into(),
            ));
        }
        let lambda_min = rayleigh_ritz(a, &mut block)[0];
        if !(lambda_min > T::zero()) {
            return Err(CutFemError::ContractViolation(
                "matrix is not positive definite".into(),
            ));
        }
        if monitor.converged(lambda_min, options.tol) {
            return Ok(ConditionEstimate {
                lambda_max,
                lambda_min,
                kappa: lambda_max / lambda_min,
                power_iterations,
                inverse_iterations: k,
                inner_iterations,
            });
        }
    }
    Err(CutFemError::EigenNonConvergence {
        iterations: options.max_iterations,
    })
}
