//! Compressed sparse row storage, preconditioned conjugate gradients and
//! extreme-eigenvalue estimation for symmetric positive definite systems.

mod cg;
mod eigen;
mod sparse;

pub use cg::{solve_spd, solve_spd_with, CgOptions, DEFAULT_ITERATIONS_PER_DOF};
pub use eigen::{
    condition_estimate, condition_estimate_with, largest_eigenvalue, ConditionEstimate,
    EigenOptions, DEFAULT_BLOCK_SIZE, DEFAULT_EIGEN_ITERATIONS, DEFAULT_EIGEN_TOL, EIGEN_SEED,
};
pub use sparse::{SparseMatrix, TripletBuilder};
