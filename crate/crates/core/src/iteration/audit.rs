//! Post-hoc checks on a recorded trace.

use serde::{Deserialize, Serialize};

use super::Trace;
use crate::error::{Error, Result};
use crate::operators::OperatorSpec;
use crate::space::Vector;

/// Relative slack allowed in the Fejér inequality.
pub const FEJER_REL_TOL: f64 = 1e-9;
/// Relative slack allowed when checking monotone sequences.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FejerAudit {
    /// Largest `|x_{n+1}-p|^2 - (|x_n-p|^2 - (alpha_n-k)(1-alpha_n) beta_n^2)`.
    pub max_deficit: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summability {
    /// `sum (alpha_n - k)(1 - alpha_n) beta_n^2` over the trace.
    pub lhs: f64,
    /// `|x_0 - p|^2`.
    pub rhs: f64,
}

impl Summability {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + FEJER_REL_TOL * (1.0 + self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub residual: f64,
    pub threshold: f64,
    pub dist_nonincreasing: Option<bool>,
    pub passed: bool,
}

fn reference<'a>(trace: &'a Trace, p: Option<&'a Vector>) -> Result<&'a Vector> {
    p.or(trace.reference.as_ref())
        .ok_or_else(|| Error::MissingReference("no fixed point supplied or known for this trace".into()))
}

fn alphas(trace: &Trace) -> Result<Vec<f64>> {
    trace
        .records
        .iter()
        .map(|r| r.alpha.ok_or(Error::WrongScheme { expected: "mann" }))
        .collect()
}

/// Recomputes the Fejér inequality on every step of a Mann trace.
pub fn fejer_audit(trace: &Trace, p: Option<&Vector>, k: f64) -> Result<FejerAudit> {
    let p = reference(trace, p)?;
    let alphas = alphas(trace)?;
    let mut max_deficit = f64::NEG_INFINITY;
    for (n, (r, a)) in trace.records.iter().zip(&alphas).enumerate() {
        let Some(next) = trace.iterates.get(n + 1) else { break };
        let x = &trace.iterates[n];
        let rhs = (x - p).norm_squared() - (a - k) * (1.0 - a) * r.beta * r.beta;
        let deficit = (next - p).norm_squared() - rhs;
        max_deficit = max_deficit.max(deficit);
    }
    let bound = FEJER_REL_TOL * (1.0 + (&trace.iterates[0] - p).norm_squared());
    Ok(FejerAudit {
        max_deficit,
        bound,
        passed: max_deficit <= bound,
    })
}

pub fn summability(trace: &Trace, p: Option<&Vector>, k: f64) -> Result<Summability> {
    let p = reference(trace, p)?;
    let alphas = alphas(trace)?;
    let lhs = trace
        .records
        .iter()
        .zip(&alphas)
        .map(|(r, a)| (a - k) * (1.0 - a) * r.beta * r.beta)
        .sum();
    let rhs = (&trace.iterates[0] - p).norm_squared();
    Ok(Summability { lhs, rhs })
}

/// Largest `beta_{n+1} / beta_n`, `None` if no ratio was recorded.
pub fn residual_monotonicity_audit(trace: &Trace) -> Option<f64> {
    trace.records.iter().filter_map(|r| r.delta).reduce(f64::max)
}

/// Step norms `|x_{n+1} - x_n|`, the sequence the asymptotic regularity
/// argument shows to be nonincreasing and to tend to zero.
pub fn asymptotic_regularity_audit(trace: &Trace) -> Vec<f64> {
    trace.records.iter().map(|r| r.step).collect()
}

/// `s_{n+1} <= s_n + tol * max(1, s_0)` for all `n`.
pub fn is_nonincreasing(seq: &[f64], tol: f64) -> bool {
    let scale = seq.first().map_or(1.0, |s| s.abs().max(1.0));
    seq.windows(2).all(|w| w[1] <= w[0] + tol * scale)
}

/// Confirms a converged trace ends near a fixed point of `T_lambda` and, when
/// a reference is known, that distances to it never grew.
pub fn cluster_fixed_point_check(trace: &Trace, spec: &OperatorSpec, lambda: f64) -> Result<ClusterReport> {
    if !trace.is_converged() {
        return Err(Error::NotConverged);
    }
    let x = &trace.final_x;
    let tx = spec.evaluate(x)?;
    let residual = lambda * (x - &tx).norm();
    let threshold = 10.0 * trace.tol_residual;
    let dist_nonincreasing = trace.reference.as_ref().map(|p| {
        let d: Vec<f64> = trace.iterates.iter().map(|x| (x - p).norm()).collect();
        is_nonincreasing(&d, MONOTONE_TOL)
    });
    let passed = residual <= threshold && dist_nonincreasing != Some(false);
    Ok(ClusterReport {
        residual,
        threshold,
        dist_nonincreasing,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iteration::{krasnoselskij, mann, IterationConfig, Schedule, Scheme};
    use crate::operators::{Certificate, Provenance, SymMatrix};
    use proptest::prelude::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn mann_trace(op: OperatorSpec, b: f64, k: f64, schedule: Schedule, x0: Vector) -> Trace {
        let cert = Certificate::new(b, k, Provenance::Given).unwrap();
        mann(&IterationConfig::new(
            op,
            cert,
            Scheme::Mann {
                schedule,
                statement_form: false,
            },
            x0,
        ))
        .unwrap()
    }

    #[test]
    fn scalar_fejer_is_tight() {
        let tr = mann_trace(
            OperatorSpec::scalar(-3.0),
            0.0,
            0.5,
            Schedule::Constant { alpha: 0.75 },
            v(&[1.0]),
        );
        let a = fejer_audit(&tr, None, 0.5).unwrap();
        assert!(a.passed);
        assert!(a.max_deficit.abs() < 1e-15);
        let s = summability(&tr, None, 0.5).unwrap();
        assert!(s.holds());
        assert_eq!(s.rhs, 1.0);
    }

    #[test]
    fn fejer_needs_mann_and_reference() {
        let cert = Certificate::new(0.0, 0.5, Provenance::Given).unwrap();
        let kr = krasnoselskij(&IterationConfig::new(
            OperatorSpec::scalar(-3.0),
            cert.clone(),
            Scheme::Krasnoselskij { gamma: 0.4 },
            v(&[1.0]),
        ))
        .unwrap();
        assert!(matches!(fejer_audit(&kr, None, 0.5), Err(Error::WrongScheme { .. })));
        let id = mann_trace(
            OperatorSpec::identity(1),
            0.0,
            0.0,
            Schedule::Constant { alpha: 0.5 },
            v(&[1.0]),
        );
        assert!(matches!(fejer_audit(&id, None, 0.0), Err(Error::MissingReference(_))));
        assert!(fejer_audit(&id, Some(&v(&[1.0])), 0.0).unwrap().passed);
    }

    #[test]
    fn cluster_check() {
        let tr = mann_trace(
            OperatorSpec::reflection(v(&[4.0])),
            0.0,
            0.0,
            Schedule::Constant { alpha: 0.5 },
            v(&[0.0]),
        );
        assert!((tr.final_x[0] - 2.0).abs() < 1e-12);
        let c = cluster_fixed_point_check(&tr, &OperatorSpec::reflection(v(&[4.0])), tr.lambda).unwrap();
        assert!(c.passed);
        let stuck = mann_trace(
            OperatorSpec::scalar(-3.0),
            0.0,
            0.5,
            Schedule::Constant { alpha: 0.99 },
            v(&[1.0]),
        );
        let short = Trace {
            status: super::super::Status::MaxIterReached,
            ..stuck
        };
        assert!(matches!(
            cluster_fixed_point_check(&short, &OperatorSpec::scalar(-3.0), 1.0),
            Err(Error::NotConverged)
        ));
    }

    #[test]
    fn nonincreasing_helper() {
        assert!(is_nonincreasing(&[3.0, 2.0, 2.0, 1.0], 0.0));
        assert!(!is_nonincreasing(&[3.0, 2.0, 2.5], 1e-9));
        assert!(is_nonincreasing(&[], 0.0));
    }

    fn diag_op(d: &[f64], c: &[f64]) -> OperatorSpec {
        OperatorSpec::affine(SymMatrix::diag(d).unwrap(), v(c)).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mann_traces_satisfy_fejer_and_residual_monotonicity(
            eig in prop::collection::vec(-4.0f64..0.99, 3),
            c in prop::collection::vec(-3.0f64..3.0, 3),
            x0 in prop::collection::vec(-5.0f64..5.0, 3),
            b in 0.0f64..2.0,
            slack in 0.0f64..0.5,
            alpha_frac in 0.05f64..0.95,
        ) {
            let op = diag_op(&eig, &c);
            let Some(min_k) = op.oracle_min_k(b).and_then(|m| m.value()) else { return Ok(()) };
            let k = min_k + slack * (1.0 - min_k);
            prop_assume!(k < 0.999);
            let alpha = k + alpha_frac * (1.0 - k);
            let cert = Certificate::new(b, k, Provenance::Given).unwrap();
            let cfg = IterationConfig::new(
                op,
                cert,
                Scheme::Mann { schedule: Schedule::Constant { alpha }, statement_form: false },
                v(&x0),
            )
            .max_iter(500);
            let tr = mann(&cfg).unwrap();
            let f = fejer_audit(&tr, None, k).unwrap();
            prop_assert!(f.passed, "{f:?}");
            prop_assert!(summability(&tr, None, k).unwrap().holds());
            if let Some(d) = residual_monotonicity_audit(&tr) {
                prop_assert!(d <= 1.0 + 1e-9, "delta {d}");
            }
            prop_assert!(is_nonincreasing(&asymptotic_regularity_audit(&tr), MONOTONE_TOL));
        }

        #[test]
        fn krasnoselskij_is_mann_with_constant_control(
            eig in prop::collection::vec(-4.0f64..0.99, 2),
            c in prop::collection::vec(-3.0f64..3.0, 2),
            x0 in prop::collection::vec(-5.0f64..5.0, 2),
            b in 0.0f64..2.0,
            frac in 0.05f64..0.95,
        ) {
            let op = diag_op(&eig, &c);
            let Some(k) = op.oracle_min_k(b).and_then(|m| m.value()) else { return Ok(()) };
            prop_assume!(k < 0.99);
            let cert = Certificate::new(b, k, Provenance::Given).unwrap();
            let lambda = cert.lambda;
            let gamma = frac * lambda * (1.0 - k);
            let kr = krasnoselskij(
                &IterationConfig::new(op.clone(), cert.clone(), Scheme::Krasnoselskij { gamma }, v(&x0)).max_iter(300),
            )
            .unwrap();
            let alpha = 1.0 - gamma / lambda;
            let mn = mann(
                &IterationConfig::new(
                    op.clone(),
                    cert,
                    Scheme::Mann { schedule: Schedule::Constant { alpha }, statement_form: false },
                    v(&x0),
                )
                .max_iter(300),
            )
            .unwrap();
            prop_assert_eq!(kr.records.len(), mn.records.len());
            for (a, m) in kr.iterates.iter().zip(&mn.iterates) {
                let scale = 1.0 + a.norm();
                prop_assert!((a - m).norm() <= 1e-12 * scale);
            }

            // each Krasnoselskij step is V_mu = (1 - mu) I + mu (I - t U) with U = I - T_lambda
            let (t, mu) = crate::iteration::decompose_gamma(gamma, b, k).unwrap();
            for w in kr.iterates.windows(2) {
                let x = &w[0];
                let tx = op.evaluate(x).unwrap();
                let u = lambda * &(x - &tx);
                let u_t = Vector::lincomb(1.0, x, -t, &u);
                let v_mu = Vector::lincomb(1.0 - mu, x, mu, &u_t);
                prop_assert!((&v_mu - &w[1]).norm() <= 1e-12 * (1.0 + x.norm()));
            }
        }
    }
}
