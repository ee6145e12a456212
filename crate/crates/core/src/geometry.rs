//! Planar points and level-set domain descriptions.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{CutFemError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    /// Rotation by -90 degrees.
    pub fn perp_cw(self) -> Self {
        Self::new(self.y, -self.x)
    }

    /// Linear interpolation `self + t (other - self)`.
    pub fn lerp(self, other: Self, t: T) -> Self {
        self + (other - self) * t
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox<T> {
    pub min: Vec2<T>,
    pub max: Vec2<T>,
}

impl<T: Real> BoundingBox<T> {
    pub fn new(min: Vec2<T>, max: Vec2<T>) -> Result<Self> {
        let finite = [min.x, min.y, max.x, max.y].iter().all(|v| v.is_finite());
        if !finite || !(max.x > min.x) || !(max.y > min.y) {
            return Err(CutFemError::InvalidConfiguration(
                "bounding box must have positive width and height".into(),
            ));
        }
        Ok(Self { min, max })
    }

    pub fn square(lo: T, hi: T) -> Result<Self> {
        Self::new(Vec2::new(lo, lo), Vec2::new(hi, hi))
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }
}

/// Signed-distance level set; `phi < 0` inside the physical domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelSet<T> {
    Circle {
        center: Vec2<T>,
        radius: T,
    },
    /// `phi(x) = normal . x - offset` with a unit `normal` pointing out of the domain.
    HalfPlane {
        normal: Vec2<T>,
        offset: T,
    },
}

impl<T: Real> LevelSet<T> {
    pub fn circle(center: Vec2<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(CutFemError::InvalidConfiguration(
                "circle radius must be positive".into(),
            ));
        }
        Ok(Self::Circle { center, radius })
    }

    /// The normal is normalized; its length only fixes the direction.
    pub fn half_plane(normal: Vec2<T>, offset: T) -> Result<Self> {
        let len = normal.norm();
        if !(len > T::zero()) || !len.is_finite() {
            return Err(CutFemError::InvalidConfiguration(
                "half-plane normal must be nonzero".into(),
            ));
        }
        Ok(Self::HalfPlane {
            normal: normal * (T::one() / len),
            offset: offset / len,
        })
    }

    pub fn eval(&self, p: Vec2<T>) -> T {
        match *self {
            LevelSet::Circle { center, radius } => (p - center).norm() - radius,
            LevelSet::HalfPlane { normal, offset } => normal.dot(p) - offset,
        }
    }

    /// Outward unit normal `grad(phi) / |grad(phi)|`.
    pub fn normal(&self, p: Vec2<T>) -> Vec2<T> {
        match *self {
            LevelSet::Circle { center, .. } => {
                let d = p - center;
                let len = d.norm();
                if len > T::zero() {
                    d * (T::one() / len)
                } else {
                    Vec2::new(T::one(), T::zero())
                }
            }
            LevelSet::HalfPlane { normal, .. } => normal,
        }
    }
}
