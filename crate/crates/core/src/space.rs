//! Finite-dimensional real inner-product space.
//!
//! [`Vector`] is a dense coordinate vector whose dimension is fixed at
//! construction time. The arithmetic operators (`+`, `-`, scalar `*`) panic on
//! a dimension mismatch, like `ndarray`; the free functions that form the
//! public contract ([`inner`], [`convex_combination`], ...) return an error
//! instead.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance for one-expression algebraic identities.
pub const IDENTITY_REL_TOL: f64 = 1e-12;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting empty input and non-finite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self(vec![0.0; dim])
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> f64) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self((0..dim).map(f).collect())
    }

    /// Unit vector `e_i` in `dim` dimensions.
    pub fn basis(dim: usize, i: usize) -> Self {
        Self::from_fn(dim, |j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `a * self + b * other`.
    pub fn lincomb(a: f64, x: &Vector, b: f64, y: &Vector) -> Vector {
        assert_eq!(x.dim(), y.dim(), "dimension mismatch");
        Vector(x.0.iter().zip(&y.0).map(|(u, v)| a * u + b * v).collect())
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector(self.0.iter().copied().map(f).collect())
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Vector::new(coords)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Vector {
    type Output = Vector;

    fn add(self, rhs: &Vector) -> Vector {
        Vector::lincomb(1.0, self, 1.0, rhs)
    }
}

impl Sub for &Vector {
    type Output = Vector;

    fn sub(self, rhs: &Vector) -> Vector {
        Vector::lincomb(1.0, self, -1.0, rhs)
    }
}

impl Mul<&Vector> for f64 {
    type Output = Vector;

    fn mul(self, rhs: &Vector) -> Vector {
        rhs.map(|v| self * v)
    }
}

impl Neg for &Vector {
    type Output = Vector;

    fn neg(self) -> Vector {
        self.map(|v| -v)
    }
}

fn same_dim(x: &Vector, y: &Vector) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    Ok(())
}

pub fn inner(x: &Vector, y: &Vector) -> Result<f64> {
    same_dim(x, y)?;
    Ok(x.dot(y))
}

pub fn norm(x: &Vector) -> f64 {
    x.norm()
}

/// `t x + (1 - t) y`.
pub fn convex_combination(t: f64, x: &Vector, y: &Vector) -> Result<Vector> {
    same_dim(x, y)?;
    Ok(Vector::lincomb(t, x, 1.0 - t, y))
}

/// Sign selector for the polarization identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `|x ± y|^2 - (|x|^2 ± 2<x,y> + |y|^2)`; zero up to rounding in any
/// inner-product space.
pub fn identity_gap_i(x: &Vector, y: &Vector, sign: Sign) -> Result<f64> {
    same_dim(x, y)?;
    let s = sign.factor();
    let lhs = Vector::lincomb(1.0, x, s, y).norm_squared();
    let rhs = x.norm_squared() + 2.0 * s * x.dot(y) + y.norm_squared();
    Ok(lhs - rhs)
}

/// `|t x + (1-t) y|^2 - (t|x|^2 + (1-t)|y|^2 - t(1-t)|x-y|^2)` for `t` in `[0, 1]`.
pub fn identity_gap_ii(t: f64, x: &Vector, y: &Vector) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid("t", format!("{t} is outside [0, 1]")));
    }
    let lhs = convex_combination(t, x, y)?.norm_squared();
    let rhs = t * x.norm_squared() + (1.0 - t) * y.norm_squared() - t * (1.0 - t) * (x - y).norm_squared();
    Ok(lhs - rhs)
}

/// Scale used to judge the identity gaps: `1 + |x|^2 + |y|^2`.
pub fn identity_scale(x: &Vector, y: &Vector) -> f64 {
    1.0 + x.norm_squared() + y.norm_squared()
}

/// The convex set `C` an operator acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    #[default]
    WholeSpace,
    Ball {
        center: Vector,
        radius: f64,
    },
    Box {
        lo: Vector,
        hi: Vector,
    },
}

impl Domain {
    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        let d = Domain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn boxed(lo: Vector, hi: Vector) -> Result<Self> {
        let d = Domain::Box { lo, hi };
        d.validate()?;
        Ok(d)
    }

    /// Box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(Vector::new(vec![lo; dim])?, Vector::new(vec![hi; dim])?)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::WholeSpace => Ok(()),
            Domain::Ball { radius, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(invalid("radius", format!("{radius} must be positive")));
                }
                Ok(())
            }
            Domain::Box { lo, hi } => {
                same_dim(lo, hi)?;
                if let Some(i) = (0..lo.dim()).find(|&i| lo[i] > hi[i]) {
                    return Err(invalid("box", format!("lo[{i}] = {} > hi[{i}] = {}", lo[i], hi[i])));
                }
                Ok(())
            }
        }
    }

    /// Dimension fixed by the domain, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Domain::WholeSpace => None,
            Domain::Ball { center, .. } => Some(center.dim()),
            Domain::Box { lo, .. } => Some(lo.dim()),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Domain::WholeSpace)
    }

    /// Membership with absolute slack `tol`.
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        match self {
            Domain::WholeSpace => true,
            Domain::Ball { center, radius } => (x - center).norm() <= radius + tol,
            Domain::Box { lo, hi } => (0..x.dim()).all(|i| x[i] >= lo[i] - tol && x[i] <= hi[i] + tol),
        }
    }

    /// Metric projection onto the domain.
    pub fn project(&self, x: &Vector) -> Vector {
        match self {
            Domain::WholeSpace => x.clone(),
            Domain::Ball { center, radius } => {
                let offset = x - center;
                let dist = offset.norm();
                if dist <= *radius {
                    x.clone()
                } else {
                    Vector::lincomb(1.0, center, radius / dist, &offset)
                }
            }
            Domain::Box { lo, hi } => Vector::from_fn(x.dim(), |i| x[i].clamp(lo[i], hi[i])),
        }
    }
}

pub fn project(domain: &Domain, x: &Vector) -> Result<Vector> {
    if let Some(d) = domain.dim() {
        if d != x.dim() {
            return Err(Error::DimensionMismatch {
                left: d,
                right: x.dim(),
            });
        }
    }
    Ok(domain.project(x))
}
