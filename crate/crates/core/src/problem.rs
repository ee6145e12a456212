//! Source, boundary data and reference solutions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::geometry::Vec2;
use crate::scalar::Real;

pub type ScalarField<T> = Arc<dyn Fn(Vec2<T>) -> T + Send + Sync>;
pub type VectorField<T> = Arc<dyn Fn(Vec2<T>) -> Vec2<T> + Send + Sync>;

/// Below this radius the radial source uses its limit value.
pub const SOURCE_SERIES_RADIUS: f64 = 1e-6;

/// `-Δ cos(π r) = π (sin(π r) + π r cos(π r)) / r`, continued by `2π²` at the origin.
pub fn radial_source<T: Real>(r: T) -> T {
    let pi = T::PI();
    if r < T::lit(SOURCE_SERIES_RADIUS) {
        T::lit(2.0 * PI * PI)
    } else {
        pi * ((pi * r).sin() + pi * r * (pi * r).cos()) / r
    }
}

#[derive(Clone)]
pub struct ProblemData<T> {
    pub name: String,
    pub source: ScalarField<T>,
    /// Dirichlet data on the boundary of the domain.
    pub dirichlet: ScalarField<T>,
    pub exact: Option<ScalarField<T>>,
    pub exact_gradient: Option<VectorField<T>>,
}

impl<T> fmt::Debug for ProblemData<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("name", &self.name)
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl<T: Real> ProblemData<T> {
    /// `u = cos(π |x - c|)` with homogeneous Dirichlet data, which is exact on
    /// the circle of radius 1/2 about `c`.
    pub fn cosine_radial(center: Vec2<T>) -> Self {
        let pi = T::PI();
        Self {
            name: "cosine_radial".into(),
            source: Arc::new(move |x| radial_source((x - center).norm())),
            dirichlet: Arc::new(|_| T::zero()),
            exact: Some(Arc::new(move |x| (pi * (x - center).norm()).cos())),
            exact_gradient: Some(Arc::new(move |x| {
                let d = x - center;
                let r = d.norm();
                if r > T::zero() {
                    d * (-pi * (pi * r).sin() / r)
                } else {
                    Vec2::zero()
                }
            })),
        }
    }

    /// Harmonic `u = a + b x + c y` with `g = u`.
    pub fn affine(a: T, b: T, c: T) -> Self {
        let u = move |x: Vec2<T>| a + b * x.x + c * x.y;
        Self {
            name: "affine".into(),
            source: Arc::new(|_| T::zero()),
            dirichlet: Arc::new(u),
            exact: Some(Arc::new(u)),
            exact_gradient: Some(Arc::new(move |_| Vec2::new(b, c))),
        }
    }

    /// Data without a reference solution.
    pub fn custom(
        name: impl Into<String>,
        source: impl Fn(Vec2<T>) -> T + Send + Sync + 'static,
        dirichlet: impl Fn(Vec2<T>) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            source: Arc::new(source),
            dirichlet: Arc::new(dirichlet),
            exact: None,
            exact_gradient: None,
        }
    }
}
