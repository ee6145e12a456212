//! Tabulated simplex and segment quadrature.

use crate::error::{CutFemError, Result};
use crate::geometry::Vec2;
use crate::scalar::Real;

/// Highest polynomial degree integrated exactly by the triangle rules.
pub const MAX_TRIANGLE_ORDER: usize = 4;
/// Highest polynomial degree integrated exactly by the segment rules.
pub const MAX_SEGMENT_ORDER: usize = 5;

// (lambda_0, lambda_1, lambda_2, weight fraction of the area)
const TRI_1: [[f64; 4]; 1] = [[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0]];

const TRI_2: [[f64; 4]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0],
];

// Dunavant degree 4, all weights positive.
const D4_A: f64 = 0.445_948_490_915_964_886_318_329_253_883_05;
const D4_B: f64 = 0.091_576_213_509_770_743_459_571_463_402_202;
const D4_WA: f64 = 0.223_381_589_678_011_465_695_007_008_433_12;
const D4_WB: f64 = 0.109_951_743_655_321_867_638_326_324_900_21;
const TRI_4: [[f64; 4]; 6] = [
    [1.0 - 2.0 * D4_A, D4_A, D4_A, D4_WA],
    [D4_A, 1.0 - 2.0 * D4_A, D4_A, D4_WA],
    [D4_A, D4_A, 1.0 - 2.0 * D4_A, D4_WA],
    [1.0 - 2.0 * D4_B, D4_B, D4_B, D4_WB],
    [D4_B, 1.0 - 2.0 * D4_B, D4_B, D4_WB],
    [D4_B, D4_B, 1.0 - 2.0 * D4_B, D4_WB],
];

// Gauss-Legendre on [0, 1]: (abscissa, weight).
const GAUSS_1: [[f64; 2]; 1] = [[0.5, 1.0]];
const GAUSS_2: [[f64; 2]; 2] = [
    [0.211_324_865_405_187_1, 0.5],
    [0.788_675_134_594_812_9, 0.5],
];
const GAUSS_3: [[f64; 2]; 3] = [
    [0.112_701_665_379_258_3, 5.0 / 18.0],
    [0.5, 8.0 / 18.0],
    [0.887_298_334_620_741_7, 5.0 / 18.0],
];

fn triangle_table(order: usize) -> Result<&'static [[f64; 4]]> {
    match order {
        0 | 1 => Ok(&TRI_1),
        2 => Ok(&TRI_2),
        3 | 4 => Ok(&TRI_4),
        _ => Err(CutFemError::UnsupportedOrder {
            requested: order,
            max: MAX_TRIANGLE_ORDER,
        }),
    }
}

fn segment_table(order: usize) -> Result<&'static [[f64; 2]]> {
    match order {
        0 | 1 => Ok(&GAUSS_1),
        2 | 3 => Ok(&GAUSS_2),
        4 | 5 => Ok(&GAUSS_3),
        _ => Err(CutFemError::UnsupportedOrder {
            requested: order,
            max: MAX_SEGMENT_ORDER,
        }),
    }
}

/// Points and positive weights over a planar region.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuadratureRule<T> {
    pub points: Vec<Vec2<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn new() -> Self {
        Self {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn integrate(&self, f: impl Fn(Vec2<T>) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec2<T>, T)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    /// Appends the mapped simplex rule for triangle `tri`. Degenerate
    /// triangles (zero area) contribute nothing.
    pub fn push_triangle(&mut self, tri: [Vec2<T>; 3], order: usize) -> Result<()> {
        let table = triangle_table(order)?;
        let area = ((tri[1] - tri[0]).cross(tri[2] - tri[0])).abs() * T::lit(0.5);
        if !(area > T::zero()) {
            return Ok(());
        }
        for row in table {
            let [l0, l1, l2, w] = row.map(T::lit);
            self.points.push(tri[0] * l0 + tri[1] * l1 + tri[2] * l2);
            self.weights.push(w * area);
        }
        Ok(())
    }

    /// Rule for a single triangle.
    pub fn triangle(tri: [Vec2<T>; 3], order: usize) -> Result<Self> {
        let mut rule = Self::new();
        rule.push_triangle(tri, order)?;
        Ok(rule)
    }

    /// Fan triangulation of a convex polygon from its first vertex.
    pub fn polygon(polygon: &[Vec2<T>], order: usize) -> Result<Self> {
        triangle_table(order)?;
        let mut rule = Self::new();
        for k in 1..polygon.len().saturating_sub(1) {
            rule.push_triangle([polygon[0], polygon[k], polygon[k + 1]], order)?;
        }
        Ok(rule)
    }
}

/// Points on a curve with arc-length weights and outward unit normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryQuadratureRule<T> {
    pub points: Vec<Vec2<T>>,
    pub weights: Vec<T>,
    pub normals: Vec<Vec2<T>>,
}

impl<T: Real> BoundaryQuadratureRule<T> {
    pub fn new() -> Self {
        Self {
            points: Vec::new(),
            weights: Vec::new(),
            normals: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec2<T>, T, Vec2<T>)> + '_ {
        self.points
            .iter()
            .zip(&self.weights)
            .zip(&self.normals)
            .map(|((&p, &w), &n)| (p, w, n))
    }

    /// Appends Gauss points on segment `p -> q`; `normal` supplies the normal at each point.
    pub fn push_segment(
        &mut self,
        p: Vec2<T>,
        q: Vec2<T>,
        order: usize,
        normal: impl Fn(Vec2<T>) -> Vec2<T>,
    ) -> Result<()> {
        let table = segment_table(order)?;
        let length = p.distance(q);
        if !(length > T::zero()) {
            return Ok(());
        }
        for row in table {
            let [s, w] = row.map(T::lit);
            let x = p.lerp(q, s);
            self.points.push(x);
            self.weights.push(w * length);
            self.normals.push(normal(x));
        }
        Ok(())
    }

    pub fn extend(&mut self, other: BoundaryQuadratureRule<T>) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
        self.normals.extend(other.normals);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^a y^b over the reference triangle (0,0),(1,0),(0,1): a! b! / (a+b+2)!
    fn monomial_reference(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn triangle_rules_are_exact_to_their_order() {
        let tri: [Vec2<f64>; 3] = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        for order in 0..=MAX_TRIANGLE_ORDER {
            let rule = QuadratureRule::triangle(tri, order).unwrap();
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for a in 0..=order as u32 {
                for b in 0..=(order as u32 - a) {
                    let approx = rule.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32));
                    let exact = monomial_reference(a, b);
                    assert!(
                        (approx - exact).abs() <= 1e-14,
                        "order {order} monomial x^{a} y^{b}: {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn unsupported_orders() {
        let tri: [Vec2<f64>; 3] = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(matches!(
            QuadratureRule::triangle(tri, 5),
            Err(CutFemError::UnsupportedOrder {
                requested: 5,
                max: 4
            })
        ));
        let mut rule = BoundaryQuadratureRule::new();
        assert!(rule
            .push_segment(tri[0], tri[1], 6, |_| Vec2::new(0.0, 1.0))
            .is_err());
    }

    #[test]
    fn segment_rules_are_exact() {
        let p = Vec2::new(0.3, -0.2);
        let q = Vec2::new(1.1, 0.4);
        let len: f64 = p.distance(q);
        for order in 0..=MAX_SEGMENT_ORDER {
            let mut rule = BoundaryQuadratureRule::new();
            rule.push_segment(p, q, order, |_| Vec2::new(1.0, 0.0))
                .unwrap();
            assert!((rule.total_weight() - len).abs() < 1e-15);
            // Integral of s^order along the unit-parametrized segment.
            let approx: f64 = rule
                .iter()
                .map(|(x, w, _)| w * ((x - p).norm() / len).powi(order as i32))
                .sum();
            assert!((approx - len / (order as f64 + 1.0)).abs() < 1e-14);
        }
    }
}
