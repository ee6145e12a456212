//! Unfitted piecewise linear finite elements for the Poisson problem on
//! level-set domains cut out of a structured triangulation.
//!
//! Dirichlet data are imposed weakly with Nitsche's method. Elements whose
//! intersection with the domain is small are controlled by one of five
//! stabilizations: face jumps of the normal gradient or of the extended
//! values, jumps to an agglomeration target element, or rank-one penalties
//! on the nodal values of unstable degrees of freedom.
//!
//! ```
//! use cutfem::prelude::*;
//!
//! let bbox = BoundingBox::square(-1.0, 1.0).unwrap();
//! let circle = LevelSet::circle(Vec2::new(0.0, 0.0), 0.5).unwrap();
//! let disc = Discretization64::structured(8, bbox, &circle, 0.5, AgglomerationTarget::Large).unwrap();
//! let data = ProblemData::cosine_radial(Vec2::new(0.0, 0.0));
//! let sol = solve(&disc, &data, &SolverSettings::default()).unwrap();
//! assert!(sol.errors.unwrap().l2 < 0.1);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod classification;
pub mod cut;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod scalar;
pub mod space;
pub mod stabilization;
pub mod study;

pub use error::{CutFemError, Result, SolveReport};
pub use scalar::Real;

pub type Vec2f64 = geometry::Vec2<f64>;
pub type Vec2f32 = geometry::Vec2<f32>;
pub type Discretization64 = study::Discretization<f64>;
pub type Discretization32 = study::Discretization<f32>;
pub type SparseMatrix64 = linalg::SparseMatrix<f64>;
pub type SparseMatrix32 = linalg::SparseMatrix<f32>;
pub type DofVector64 = space::DofVector<f64>;
pub type DofVector32 = space::DofVector<f32>;

/// Common imports for driving a computation.
pub mod prelude {
    pub use crate::classification::AgglomerationTarget;
    pub use crate::geometry::{BoundingBox, LevelSet, Vec2};
    pub use crate::problem::ProblemData;
    pub use crate::stabilization::{StabilizationFamily, StabilizationSpec};
    pub use crate::study::{solve, Discretization, SolverSettings};
    pub use crate::{CutFemError, Discretization32, Discretization64, Real};
}
