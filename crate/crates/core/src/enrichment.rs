//! The averaging transform and sampled checkers for the inequalities that
//! connect enrichment to nonexpansiveness.
//!
//! For `lambda = 1 / (b + 1)` the averaged map `T_lambda = (1 - lambda) I + lambda T`
//! turns a `(b, k)`-enriched strictly pseudocontractive `T` into a
//! `k`-strictly pseudocontractive map. From there `U = I - T_lambda` is
//! `(1 - k) / 2`-cocoercive and `U_t = I - t U` is nonexpansive for
//! `0 < t < 1 - k`. Each link of that chain has a checker here.
//!
//! All checkers share one reduction: every pair yields a raw gap `v`
//! (positive means the inequality is violated), normalized by a scale that
//! is `1 + |x - y|^2` for squared inequalities and `1 + |x - y|` for the
//! unsquared ones. The report keeps the largest normalized gap and, when it
//! exceeds the tolerance, the first pair attaining it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operators::{OperatorSpec, Pair};
use crate::space::Vector;

/// Default slack for sampled inequality checks.
pub const CHECK_TOL: f64 = 1e-9;

/// Environment variable overriding [`CHECK_TOL`].
pub const TOL_ENV: &str = "FIXENRICH_TOL";

/// Anything that maps vectors to vectors of the same dimension.
pub trait Map {
    fn dim(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
}

impl Map for OperatorSpec {
    fn dim(&self) -> usize {
        OperatorSpec::dim(self)
    }

    fn apply(&self, x: &Vector) -> Vector {
        OperatorSpec::apply(self, x)
    }
}

/// `lambda = 1 / (b + 1)`.
pub fn lambda_of_b(b: f64) -> Result<f64> {
    check_b(b)?;
    Ok(1.0 / (b + 1.0))
}

fn check_b(b: f64) -> Result<()> {
    if b.is_finite() && b >= 0.0 {
        Ok(())
    } else {
        Err(invalid("b", format!("{b} must be finite and >= 0")))
    }
}

fn check_k(k: f64) -> Result<()> {
    if (0.0..1.0).contains(&k) {
        Ok(())
    } else {
        Err(invalid("k", format!("{k} must lie in [0, 1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    /// `T_lambda x = (1 - lambda) x + lambda T x`.
    Averaged { lambda: f64 },
    /// `U x = x - T_lambda x`.
    Residual { lambda: f64 },
    /// `U_t x = (1 - lambda t) x + lambda t T x = x - t U x`.
    Relaxed { lambda: f64, t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedOperator {
    pub base: OperatorSpec,
    pub kind: Transform,
}

impl TransformedOperator {
    pub fn averaged(base: OperatorSpec, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            base,
            kind: Transform::Averaged { lambda },
        })
    }

    pub fn residual(base: OperatorSpec, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            base,
            kind: Transform::Residual { lambda },
        })
    }

    pub fn relaxed(base: OperatorSpec, lambda: f64, t: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !(t.is_finite() && t > 0.0) {
            return Err(invalid("t", format!("{t} must be positive")));
        }
        Ok(Self {
            base,
            kind: Transform::Relaxed { lambda, t },
        })
    }

    pub fn lambda(&self) -> f64 {
        match self.kind {
            Transform::Averaged { lambda } | Transform::Residual { lambda } | Transform::Relaxed { lambda, .. } => {
                lambda
            }
        }
    }

    pub fn evaluate(&self, x: &Vector) -> Result<Vector> {
        if x.dim() != self.base.dim() {
            return Err(Error::DimensionMismatch {
                left: self.base.dim(),
                right: x.dim(),
            });
        }
        Ok(Map::apply(self, x))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(invalid("lambda", format!("{lambda} must lie in (0, 1]")))
    }
}

impl Map for TransformedOperator {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, x: &Vector) -> Vector {
        let tx = self.base.apply(x);
        match self.kind {
            Transform::Averaged { lambda } => Vector::lincomb(1.0 - lambda, x, lambda, &tx),
            // x - T_lambda x = lambda (x - T x)
            Transform::Residual { lambda } => Vector::lincomb(lambda, x, -lambda, &tx),
            Transform::Relaxed { lambda, t } => Vector::lincomb(1.0 - lambda * t, x, lambda * t, &tx),
        }
    }
}

/// Pair at which a check attained its largest violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vector,
    pub y: Vector,
}

/// Outcome of a sampled inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub samples: usize,
    /// Largest normalized gap over the sample; `<= tol` means the inequality held.
    pub max_violation: f64,
    pub passed: bool,
    pub witness: Option<Witness>,
}

impl CheckReport {
    pub fn witness_pair(&self) -> Option<Pair> {
        self.witness.as_ref().map(|w| (w.x.clone(), w.y.clone()))
    }
}

/// `1 + |x - y|^2`.
pub fn squared_scale(x: &Vector, y: &Vector) -> f64 {
    1.0 + (x - y).norm_squared()
}

/// `1 + |x - y|`.
pub fn linear_scale(x: &Vector, y: &Vector) -> f64 {
    1.0 + (x - y).norm()
}

/// Raw gap of the enriched inequality:
/// `|b(x-y) + Tx - Ty|^2 - (b+1)^2 |x-y|^2 - k |x-y - (Tx-Ty)|^2`.
pub fn enriched_spc_gap(spec: &OperatorSpec, b: f64, k: f64, x: &Vector, y: &Vector) -> f64 {
    let z = x - y;
    let tz = &spec.apply(x) - &spec.apply(y);
    let lhs = Vector::lincomb(b, &z, 1.0, &tz).norm_squared();
    lhs - (b + 1.0).powi(2) * z.norm_squared() - k * (&z - &tz).norm_squared()
}

/// Raw gap of the `k`-strict pseudocontraction inequality for `S`:
/// `|Sx - Sy|^2 - |x-y|^2 - k |x-y - (Sx-Sy)|^2`.
pub fn spc_gap(map: &dyn Map, k: f64, x: &Vector, y: &Vector) -> f64 {
    let z = x - y;
    let sz = &map.apply(x) - &map.apply(y);
    sz.norm_squared() - z.norm_squared() - k * (&z - &sz).norm_squared()
}

/// Raw gap of the cocoercivity inequality:
/// `(1-k)/2 |Ux - Uy|^2 - <Ux - Uy, x - y>`.
pub fn cocoercive_gap(u: &dyn Map, k: f64, x: &Vector, y: &Vector) -> f64 {
    let z = x - y;
    let uz = &u.apply(x) - &u.apply(y);
    0.5 * (1.0 - k) * uz.norm_squared() - uz.dot(&z)
}

/// `|Sx - Sy| - |x - y|`.
pub fn nonexpansive_gap(map: &dyn Map, x: &Vector, y: &Vector) -> f64 {
    (&map.apply(x) - &map.apply(y)).norm() - (x - y).norm()
}

/// `|b(x-y) + Tx - Ty| - (b+1)|x - y|`.
pub fn enriched_nonexpansive_gap(spec: &OperatorSpec, b: f64, x: &Vector, y: &Vector) -> f64 {
    let z = x - y;
    let tz = &spec.apply(x) - &spec.apply(y);
    Vector::lincomb(b, &z, 1.0, &tz).norm() - (b + 1.0) * z.norm()
}

fn check_pairs(pairs: &[Pair], dim: usize) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    for (x, y) in pairs {
        for p in [x, y] {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: p.dim(),
                });
            }
        }
    }
    Ok(())
}

/// Sampled checkers sharing one tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checker {
    pub tol: f64,
}

impl Default for Checker {
    fn default() -> Self {
        Self { tol: CHECK_TOL }
    }
}

impl Checker {
    pub fn new(tol: f64) -> Self {
        Self { tol }
    }

    /// Reads `FIXENRICH_TOL`, falling back to [`CHECK_TOL`] when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(TOL_ENV) {
            Ok(raw) => raw
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .map(Self::new)
                .ok_or_else(|| invalid("FIXENRICH_TOL", format!("`{raw}` is not a finite number"))),
            Err(_) => Ok(Self::default()),
        }
    }

    fn reduce(&self, pairs: &[Pair], gap: impl Fn(&Vector, &Vector) -> (f64, f64)) -> CheckReport {
        let mut worst = f64::NEG_INFINITY;
        let mut at = 0;
        for (i, (x, y)) in pairs.iter().enumerate() {
            let (v, scale) = gap(x, y);
            let normalized = v / scale;
            if normalized > worst || (normalized.is_nan() && !worst.is_nan()) {
                worst = normalized;
                at = i;
            }
        }
        let passed = worst <= self.tol;
        CheckReport {
            samples: pairs.len(),
            max_violation: worst,
            passed,
            witness: (!passed).then(|| Witness {
                x: pairs[at].0.clone(),
                y: pairs[at].1.clone(),
            }),
        }
    }

    /// The enriched inequality for `T` at `(b, k)`.
    pub fn enriched_spc(&self, spec: &OperatorSpec, b: f64, k: f64, pairs: &[Pair]) -> Result<CheckReport> {
        check_b(b)?;
        check_k(k)?;
        check_pairs(pairs, spec.dim())?;
        Ok(self.reduce(pairs, |x, y| (enriched_spc_gap(spec, b, k, x, y), squared_scale(x, y))))
    }

    /// `k`-strict pseudocontractivity of `map` (the averaged form of the enriched inequality when `map = T_lambda`).
    pub fn spc(&self, map: &dyn Map, k: f64, pairs: &[Pair]) -> Result<CheckReport> {
        check_k(k)?;
        check_pairs(pairs, map.dim())?;
        Ok(self.reduce(pairs, |x, y| (spc_gap(map, k, x, y), squared_scale(x, y))))
    }

    /// `(1-k)/2`-cocoercivity of `U = I - T_lambda`.
    pub fn cocoercive(&self, residual: &TransformedOperator, k: f64, pairs: &[Pair]) -> Result<CheckReport> {
        if !matches!(residual.kind, Transform::Residual { .. }) {
            return Err(invalid(
                "residual",
                "cocoercivity is checked on the residual map U = I - T_lambda",
            ));
        }
        check_k(k)?;
        check_pairs(pairs, residual.dim())?;
        Ok(self.reduce(pairs, |x, y| (cocoercive_gap(residual, k, x, y), squared_scale(x, y))))
    }

    pub fn nonexpansive(&self, map: &dyn Map, pairs: &[Pair]) -> Result<CheckReport> {
        check_pairs(pairs, map.dim())?;
        Ok(self.reduce(pairs, |x, y| (nonexpansive_gap(map, x, y), linear_scale(x, y))))
    }

    /// `b`-enriched nonexpansiveness: `|b(x - y) + Tx - Ty| <= (b + 1)|x - y|`.
    pub fn enriched_nonexpansive(&self, spec: &OperatorSpec, b: f64, pairs: &[Pair]) -> Result<CheckReport> {
        check_b(b)?;
        check_pairs(pairs, spec.dim())?;
        Ok(self.reduce(pairs, |x, y| {
            (enriched_nonexpansive_gap(spec, b, x, y), linear_scale(x, y))
        }))
    }

    /// Least `k` consistent with the enriched inequality on the sampled pairs.
    ///
    /// Pairs whose `k`-term denominator `|x-y - (Tx-Ty)|^2` vanishes (relative
    /// to `1 + |x-y|^2`) cannot bound `k`; they must satisfy the inequality outright or
    /// the map is reported as not enriched at this `b`. The result is a lower
    /// bound on the true least `k`.
    pub fn estimate_min_k(&self, spec: &OperatorSpec, b: f64, pairs: &[Pair]) -> Result<f64> {
        check_b(b)?;
        check_pairs(pairs, spec.dim())?;
        let mut k_hat = 0.0f64;
        for (x, y) in pairs {
            let z = x - y;
            let tz = &spec.apply(x) - &spec.apply(y);
            let scale = 1.0 + z.norm_squared();
            let numerator = Vector::lincomb(b, &z, 1.0, &tz).norm_squared() - (b + 1.0).powi(2) * z.norm_squared();
            let denominator = (&z - &tz).norm_squared();
            if denominator > 1e-14 * scale {
                k_hat = k_hat.max(numerator / denominator);
            } else if numerator > self.tol * scale {
                return Err(Error::NotEnrichedSpc {
                    b,
                    excess: numerator,
                    x: x.clone(),
                    y: y.clone(),
                });
            }
        }
        Ok(k_hat)
    }

    /// [`Checker::estimate_min_k`] along an ascending grid of `b`.
    pub fn estimate_frontier(&self, spec: &OperatorSpec, b_grid: &[f64], pairs: &[Pair]) -> Result<Vec<(f64, f64)>> {
        if b_grid.is_empty() {
            return Err(invalid("b_grid", "must be non-empty"));
        }
        if b_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("b_grid", "must be ascending"));
        }
        b_grid
            .iter()
            .map(|&b| Ok((b, self.estimate_min_k(spec, b, pairs)?)))
            .collect()
    }
}
