//! Catalog of self-maps with closed-form enrichment constants.
//!
//! Every linear catalog operator reduces the enriched inequality to a scalar condition
//! per eigen-direction: for `T z = a z` the condition
//! `(b + a)^2 |z|^2 <= (b + 1)^2 |z|^2 + k (1 - a)^2 |z|^2` fixes the least
//! admissible `k`. Those closed forms are the oracles the sampled checkers in
//! [`crate::enrichment`] are validated against.

mod matrix;
mod sampling;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use matrix::{Eigen, SymMatrix, JACOBI_TOL, SYMMETRY_TOL};
pub use sampling::{sample_pairs, Pair, WHOLE_SPACE_HALF_WIDTH};

use crate::error::{invalid, Error, Result};
use crate::space::{Domain, Vector};

fn one() -> usize {
    1
}

/// Formula part of a catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum OperatorKind {
    /// `T x = a x`, coordinatewise in `dim` dimensions.
    ScalarLinear {
        a: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// `T x = Q x + c` with `Q` symmetric.
    AffineSymmetric { q: SymMatrix, c: Vector },
    /// Planar rotation by `theta` radians.
    #[serde(rename = "rotation2d")]
    Rotation2D { theta: f64 },
    /// `T x = c - x`.
    Reflection { c: Vector },
    /// `x_i -> x_i - tanh(x_i)` coordinatewise.
    Saturation {
        #[serde(default = "one")]
        dim: usize,
    },
    Identity {
        #[serde(default = "one")]
        dim: usize,
    },
}

/// A self-map `T: C -> C` from the catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(flatten)]
    pub kind: OperatorKind,
    #[serde(default)]
    pub domain: Domain,
}

/// Least admissible `k` in the enriched inequality at a given `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinK {
    Feasible(f64),
    /// The least `k` would be `>= 1`.
    Infeasible,
}

impl MinK {
    pub fn value(self) -> Option<f64> {
        match self {
            MinK::Feasible(k) => Some(k),
            MinK::Infeasible => None,
        }
    }

    fn max(self, other: MinK) -> MinK {
        match (self, other) {
            (MinK::Feasible(a), MinK::Feasible(b)) => MinK::Feasible(a.max(b)),
            _ => MinK::Infeasible,
        }
    }
}

/// `k_min = max(0, ((b + a)^2 - (b + 1)^2) / (1 - a)^2)` for `T x = a x`.
pub fn scalar_min_k(a: f64, b: f64) -> MinK {
    if a == 1.0 {
        return MinK::Feasible(0.0);
    }
    let k = (((b + a).powi(2) - (b + 1.0).powi(2)) / (1.0 - a).powi(2)).max(0.0);
    if k >= 1.0 {
        MinK::Infeasible
    } else {
        MinK::Feasible(k)
    }
}

/// Worst eigen-direction of `Q`. The affine offset plays no role.
pub fn symmetric_min_k(q: &SymMatrix, b: f64) -> MinK {
    q.eigen()
        .values
        .iter()
        .fold(MinK::Feasible(0.0), |acc, &a| acc.max(scalar_min_k(a, b)))
}

/// Rotations satisfy the enriched inequality with `k = 0` for every `b >= 0`: the condition
/// reduces to `(b^2 + 2b cos + 1) <= (b + 1)^2 + k (2 - 2 cos)`, i.e.
/// `-2b (1 - cos) <= k (2 - 2 cos)`.
pub fn rotation_min_k(_theta: f64, _b: f64) -> f64 {
    0.0
}

/// Where a certificate's constants came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Empirical {
        sample_count: usize,
        seed: u64,
    },
    /// Supplied by the user without verification.
    Given,
}

/// The pair `(b, k)` with the derived averaging weight `lambda = 1 / (b + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub b: f64,
    pub k: f64,
    pub lambda: f64,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<Vector>,
}

impl Certificate {
    pub fn new(b: f64, k: f64, provenance: Provenance) -> Result<Self> {
        if !(b.is_finite() && b >= 0.0) {
            return Err(invalid("b", format!("{b} must be finite and >= 0")));
        }
        if !(0.0..1.0).contains(&k) {
            return Err(invalid("k", format!("{k} must lie in [0, 1)")));
        }
        Ok(Self {
            b,
            k,
            lambda: 1.0 / (b + 1.0),
            provenance,
            fixed_point: None,
        })
    }

    pub fn with_fixed_point(mut self, p: Option<Vector>) -> Self {
        self.fixed_point = p;
        self
    }
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind) -> Result<Self> {
        Self::with_domain(kind, Domain::WholeSpace)
    }

    pub fn with_domain(kind: OperatorKind, domain: Domain) -> Result<Self> {
        let spec = Self { kind, domain };
        spec.validate()?;
        Ok(spec)
    }

    pub fn scalar(a: f64) -> Self {
        Self::new(OperatorKind::ScalarLinear { a, dim: 1 }).expect("valid scalar map")
    }

    pub fn rotation(theta: f64) -> Self {
        Self::new(OperatorKind::Rotation2D { theta }).expect("valid rotation")
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(OperatorKind::Identity { dim }).expect("valid identity")
    }

    pub fn reflection(c: Vector) -> Self {
        Self::new(OperatorKind::Reflection { c }).expect("valid reflection")
    }

    pub fn saturation(dim: usize) -> Self {
        Self::new(OperatorKind::Saturation { dim }).expect("valid saturation")
    }

    pub fn affine(q: SymMatrix, c: Vector) -> Result<Self> {
        Self::new(OperatorKind::AffineSymmetric { q, c })
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        match &self.kind {
            OperatorKind::ScalarLinear { a, dim } => {
                if !a.is_finite() {
                    return Err(invalid("a", "must be finite"));
                }
                if *dim == 0 {
                    return Err(invalid("dim", "must be at least 1"));
                }
            }
            OperatorKind::AffineSymmetric { q, c } => {
                if q.dim() != c.dim() {
                    return Err(Error::DimensionMismatch {
                        left: q.dim(),
                        right: c.dim(),
                    });
                }
            }
            OperatorKind::Rotation2D { theta } => {
                if !theta.is_finite() {
                    return Err(invalid("theta", "must be finite"));
                }
            }
            OperatorKind::Reflection { .. } => {}
            OperatorKind::Saturation { dim } | OperatorKind::Identity { dim } => {
                if *dim == 0 {
                    return Err(invalid("dim", "must be at least 1"));
                }
            }
        }
        if let Some(d) = self.domain.dim() {
            if d != self.dim() {
                return Err(Error::DimensionMismatch {
                    left: self.dim(),
                    right: d,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            OperatorKind::ScalarLinear { dim, .. }
            | OperatorKind::Saturation { dim }
            | OperatorKind::Identity { dim } => *dim,
            OperatorKind::AffineSymmetric { c, .. } | OperatorKind::Reflection { c } => c.dim(),
            OperatorKind::Rotation2D { .. } => 2,
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            OperatorKind::ScalarLinear { a, .. } => format!("scalar({a})"),
            OperatorKind::AffineSymmetric { q, .. } => format!("affine({}x{})", q.dim(), q.dim()),
            OperatorKind::Rotation2D { theta } => format!("rotation({:.6})", theta),
            OperatorKind::Reflection { c } => format!("reflection({:?})", c),
            OperatorKind::Saturation { dim } => format!("saturation({dim})"),
            OperatorKind::Identity { dim } => format!("identity({dim})"),
        }
    }

    /// `T x`.
    pub fn evaluate(&self, x: &Vector) -> Result<Vector> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: x.dim(),
            });
        }
        Ok(self.apply(x))
    }

    /// `T x` without the dimension check.
    pub(crate) fn apply(&self, x: &Vector) -> Vector {
        match &self.kind {
            OperatorKind::ScalarLinear { a, .. } => *a * x,
            OperatorKind::AffineSymmetric { q, c } => &q.mul_vec(x) + c,
            OperatorKind::Rotation2D { theta } => {
                let (s, co) = theta.sin_cos();
                Vector::from_fn(2, |i| {
                    if i == 0 {
                        co * x[0] - s * x[1]
                    } else {
                        s * x[0] + co * x[1]
                    }
                })
            }
            OperatorKind::Reflection { c } => c - x,
            OperatorKind::Saturation { .. } => x.map(|v| v - v.tanh()),
            OperatorKind::Identity { .. } => x.clone(),
        }
    }

    /// The unique fixed point, when it exists and has a closed form.
    pub fn known_fixed_point(&self) -> Option<Vector> {
        let n = self.dim();
        match &self.kind {
            OperatorKind::ScalarLinear { a, .. } => (*a != 1.0).then(|| Vector::zeros(n)),
            OperatorKind::Reflection { c } => Some(0.5 * c),
            OperatorKind::Rotation2D { theta } => {
                let wrapped = theta.rem_euclid(2.0 * PI);
                (wrapped != 0.0).then(|| Vector::zeros(2))
            }
            OperatorKind::AffineSymmetric { q, c } => matrix::solve_shifted(q, c, 1e-12),
            OperatorKind::Saturation { .. } => Some(Vector::zeros(n)),
            OperatorKind::Identity { .. } => None,
        }
    }

    /// Closed-form least `k` at enrichment `b`, when the operator has one.
    /// `None` means no closed form (the saturation map).
    pub fn oracle_min_k(&self, b: f64) -> Option<MinK> {
        match &self.kind {
            OperatorKind::ScalarLinear { a, .. } => Some(scalar_min_k(*a, b)),
            OperatorKind::AffineSymmetric { q, .. } => Some(symmetric_min_k(q, b)),
            OperatorKind::Rotation2D { theta } => Some(MinK::Feasible(rotation_min_k(*theta, b))),
            OperatorKind::Reflection { .. } => Some(scalar_min_k(-1.0, b)),
            OperatorKind::Identity { .. } => Some(MinK::Feasible(0.0)),
            OperatorKind::Saturation { .. } => None,
        }
    }

    /// Certificate at enrichment `b` backed by an analytic argument.
    ///
    /// The saturation map has derivative in `[0, 1)` coordinatewise, so each
    /// coordinate difference is `d_i z_i` with `b + d_i <= b + 1`; the inequality then
    /// holds with `k = 0` for every `b`.
    pub fn analytic_certificate(&self, b: f64) -> Result<Certificate> {
        let k = match self.oracle_min_k(b) {
            Some(MinK::Feasible(k)) => k,
            Some(MinK::Infeasible) => {
                return Err(invalid("b", format!("{} admits no k < 1 at b = {b}", self.name())));
            }
            None => 0.0,
        };
        Ok(Certificate::new(b, k, Provenance::Analytic)?.with_fixed_point(self.known_fixed_point()))
    }

    /// Sampled pairs in the domain, augmented with eigen-directed pairs for
    /// affine maps so the extreme directions are always probed.
    pub fn sample_pairs(&self, count: usize, seed: u64) -> Result<Vec<Pair>> {
        let mut pairs = sample_pairs(&self.domain, self.dim(), count, seed)?;
        if let OperatorKind::AffineSymmetric { q, .. } = &self.kind {
            let anchor = self
                .known_fixed_point()
                .map(|p| self.domain.project(&p))
                .unwrap_or_else(|| self.domain.project(&Vector::zeros(self.dim())));
            let eps = self.eigen_probe_length(&anchor);
            for v in q.eigen().vectors {
                let x = Vector::lincomb(1.0, &anchor, eps, &v);
                pairs.push((x, anchor.clone()));
            }
        }
        Ok(pairs)
    }

    fn eigen_probe_length(&self, anchor: &Vector) -> f64 {
        match &self.domain {
            Domain::WholeSpace => 1.0,
            Domain::Ball { center, radius } => {
                let slack = radius - (anchor - center).norm();
                (0.5 * slack).clamp(1e-3, 1.0)
            }
            Domain::Box { lo, hi } => {
                let slack = (0..anchor.dim())
                    .map(|i| (anchor[i] - lo[i]).min(hi[i] - anchor[i]))
                    .fold(f64::INFINITY, f64::min);
                (0.5 * slack).clamp(1e-3, 1.0)
            }
        }
    }

    /// Samples points of the domain and reports the first whose image leaves
    /// it. Trivially `None` for the whole space.
    pub fn self_map_violation(&self, count: usize, seed: u64) -> Result<Option<Vector>> {
        let pairs = sample_pairs(&self.domain, self.dim(), count, seed)?;
        Ok(pairs
            .into_iter()
            .flat_map(|(x, y)| [x, y])
            .find(|x| !self.domain.contains(&self.apply(x), 1e-12)))
    }
}
