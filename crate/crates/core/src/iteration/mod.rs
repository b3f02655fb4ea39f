//! Krasnoselskij and Krasnoselskij-Mann drivers with per-step diagnostics.
//!
//! Both drivers record, for each iterate `x_n`:
//!
//! * `beta`: the residual `|x_n - T_lambda x_n|` against the averaged map,
//! * `step`: `|x_{n+1} - x_n|`,
//! * `dist_to_p`: distance to the reference fixed point when one is known,
//! * `alpha`, `fejer_gap` (Mann only): the control value and the slack in
//!   `|x_{n+1} - p|^2 <= |x_n - p|^2 - (alpha_n - k)(1 - alpha_n) beta_n^2`,
//! * `delta`: `beta_{n+1} / beta_n`.
//!
//! The Mann driver runs `x_{n+1} = alpha_n x_n + (1 - alpha_n) T_lambda x_n`,
//! the recursion the Fejér and residual-monotonicity inequalities are proven
//! for. The alternative convention `x_{n+1} = (1 - lambda alpha_n) x_n +
//! lambda alpha_n T x_n` is available through `statement_form`, which feeds
//! `1 - alpha_n` into the same recursion.

mod audit;
mod schedule;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use audit::{
    asymptotic_regularity_audit, cluster_fixed_point_check, fejer_audit, is_nonincreasing, residual_monotonicity_audit,
    summability, ClusterReport, FejerAudit, Summability, FEJER_REL_TOL, MONOTONE_TOL,
};
pub use schedule::{schedule_alpha, validate_schedule, Schedule, ScheduleReport};

use crate::error::{invalid, Error, Result};
use crate::operators::{Certificate, OperatorSpec};
use crate::space::Vector;

pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_TOL_RESIDUAL: f64 = 1e-10;

/// Residuals below this are treated as zero when forming `beta_{n+1} / beta_n`.
pub const BETA_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    /// `x_{n+1} = (1 - gamma) x_n + gamma T x_n`.
    Krasnoselskij { gamma: f64 },
    Mann {
        schedule: Schedule,
        #[serde(default)]
        statement_form: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationConfig {
    pub operator: OperatorSpec,
    pub certificate: Certificate,
    pub scheme: Scheme,
    pub x0: Vector,
    pub max_iter: usize,
    pub tol_residual: f64,
    pub divergence_bound: f64,
}

/// Upper end of the step range `(0, lambda (1 - k))` backed by the
/// decomposition `gamma = lambda mu t`, `t in (0, 1 - k)`, `mu in (0, 1)`.
pub fn safe_gamma_range(b: f64, k: f64) -> Result<f64> {
    let cert = Certificate::new(b, k, crate::operators::Provenance::Given)?;
    Ok(cert.lambda * (1.0 - k))
}

/// Splits `gamma` into `(t, mu)` with `lambda mu t = gamma`, `t in (0, 1 - k)`
/// and `mu in (0, 1)`.
///
/// The canonical choice is `t = (1 - k) max(3/4, (1 + r) / 2)` where
/// `r = gamma / (lambda (1 - k))`, which keeps `mu = r (1 - k) / t` below one.
pub fn decompose_gamma(gamma: f64, b: f64, k: f64) -> Result<(f64, f64)> {
    let upper = safe_gamma_range(b, k)?;
    if !(gamma > 0.0 && gamma < upper) {
        return Err(Error::GammaOutOfRange { gamma, upper });
    }
    let lambda = 1.0 / (b + 1.0);
    let r = gamma / upper;
    let t = (1.0 - k) * f64::max(0.75, 0.5 * (1.0 + r));
    let mu = gamma / (lambda * t);
    Ok((t, mu))
}

impl IterationConfig {
    pub fn new(operator: OperatorSpec, certificate: Certificate, scheme: Scheme, x0: Vector) -> Self {
        let divergence_bound = 1e12 * (1.0 + x0.norm());
        Self {
            operator,
            certificate,
            scheme,
            x0,
            max_iter: DEFAULT_MAX_ITER,
            tol_residual: DEFAULT_TOL_RESIDUAL,
            divergence_bound,
        }
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn tol_residual(mut self, tol: f64) -> Self {
        self.tol_residual = tol;
        self
    }

    pub fn divergence_bound(mut self, bound: f64) -> Self {
        self.divergence_bound = bound;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.certificate.lambda
    }

    /// Set when a Krasnoselskij step is outside `(0, lambda (1 - k))`.
    pub fn gamma_warning(&self) -> bool {
        match self.scheme {
            Scheme::Krasnoselskij { gamma } => gamma >= self.lambda() * (1.0 - self.certificate.k),
            Scheme::Mann { .. } => false,
        }
    }

    /// Reference fixed point: the certificate's, else the operator's closed form.
    pub fn reference(&self) -> Option<Vector> {
        self.certificate
            .fixed_point
            .clone()
            .or_else(|| self.operator.known_fixed_point())
    }

    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        if self.x0.dim() != self.operator.dim() {
            return Err(Error::DimensionMismatch {
                left: self.operator.dim(),
                right: self.x0.dim(),
            });
        }
        if !self.operator.domain.contains(&self.x0, 1e-12) {
            return Err(invalid("x0", "starting point lies outside the operator's domain"));
        }
        if !(self.tol_residual > 0.0) {
            return Err(invalid("tol_residual", "must be positive"));
        }
        if !(self.divergence_bound > self.x0.norm()) {
            return Err(invalid("divergence_bound", "must exceed |x0|"));
        }
        match &self.scheme {
            Scheme::Krasnoselskij { gamma } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return Err(invalid("gamma", format!("{gamma} must be positive")));
                }
            }
            Scheme::Mann {
                schedule,
                statement_form,
            } => {
                schedule.validate()?;
                let upfront = match schedule {
                    Schedule::Explicit { values } => values.len(),
                    Schedule::Constant { .. } => 1,
                    Schedule::PowerDecay { .. } => 1,
                };
                for n in 0..upfront {
                    self.effective_alpha(schedule, *statement_form, n)?;
                }
            }
        }
        Ok(())
    }

    /// Proof-form weight on `x_n`, checked against `(k, 1)`.
    fn effective_alpha(&self, schedule: &Schedule, statement_form: bool, n: usize) -> Result<f64> {
        let raw = schedule.alpha(n)?;
        let alpha = if statement_form { 1.0 - raw } else { raw };
        let k = self.certificate.k;
        if !(alpha > k && alpha < 1.0) {
            return Err(Error::AlphaOutOfRange { index: n, alpha, k });
        }
        Ok(alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    pub beta: f64,
    pub step: f64,
    pub dist_to_p: Option<f64>,
    pub alpha: Option<f64>,
    pub fejer_gap: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Status {
    Converged { at: usize },
    MaxIterReached,
    Diverged { at: usize },
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Converged { at } => write!(f, "converged at n={at}"),
            Status::MaxIterReached => write!(f, "max iterations reached"),
            Status::Diverged { at } => write!(f, "diverged at n={at}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
    pub status: Status,
    pub final_x: Vector,
    /// `x_0, ..., x_N` plus the point each record's step leads to, so
    /// `iterates[n + 1]` is the successor of record `n`.
    pub iterates: Vec<Vector>,
    pub reference: Option<Vector>,
    pub lambda: f64,
    pub k: f64,
    pub tol_residual: f64,
    pub gamma_warning: bool,
}

impl Trace {
    pub fn is_converged(&self) -> bool {
        matches!(self.status, Status::Converged { .. })
    }

    pub fn last_beta(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.beta)
    }

    /// CSV with columns `n,beta,step,dist_to_p,alpha,fejer_gap,delta`;
    /// absent values are empty cells.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,beta,step,dist_to_p,alpha,fejer_gap,delta")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.n,
                fmt_f64(r.beta),
                fmt_f64(r.step),
                fmt_opt(r.dist_to_p),
                fmt_opt(r.alpha),
                fmt_opt(r.fejer_gap),
                fmt_opt(r.delta),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Shortest decimal that parses back to the same bits.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Runs whichever scheme the config names.
pub fn run(config: &IterationConfig) -> Result<Trace> {
    config.validate()?;
    drive(config)
}

pub fn krasnoselskij(config: &IterationConfig) -> Result<Trace> {
    if !matches!(config.scheme, Scheme::Krasnoselskij { .. }) {
        return Err(Error::WrongScheme {
            expected: "krasnoselskij",
        });
    }
    run(config)
}

pub fn mann(config: &IterationConfig) -> Result<Trace> {
    if !matches!(config.scheme, Scheme::Mann { .. }) {
        return Err(Error::WrongScheme { expected: "mann" });
    }
    run(config)
}

fn drive(config: &IterationConfig) -> Result<Trace> {
    let t = &config.operator;
    let lambda = config.lambda();
    let k = config.certificate.k;
    let p = config.reference();

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut iterates = vec![config.x0.clone()];
    let mut x = config.x0.clone();
    let mut n = 0;

    let status = loop {
        let tx = t.apply(&x);
        let t_lambda_x = Vector::lincomb(1.0 - lambda, &x, lambda, &tx);
        let beta = (&x - &t_lambda_x).norm();

        let (next, alpha) = match &config.scheme {
            Scheme::Krasnoselskij { gamma } => (Vector::lincomb(1.0 - gamma, &x, *gamma, &tx), None),
            Scheme::Mann {
                schedule,
                statement_form,
            } => {
                let alpha = config.effective_alpha(schedule, *statement_form, n)?;
                (Vector::lincomb(alpha, &x, 1.0 - alpha, &t_lambda_x), Some(alpha))
            }
        };

        let step = (&next - &x).norm();
        let dist_to_p = p.as_ref().map(|p| (&x - p).norm());
        let fejer_gap = match (&p, alpha) {
            (Some(p), Some(a)) => {
                let bound = (&x - p).norm_squared() - (a - k) * (1.0 - a) * beta * beta;
                Some(bound - (&next - p).norm_squared())
            }
            _ => None,
        };

        if let Some(prev) = records.last_mut() {
            if prev.beta > BETA_FLOOR {
                prev.delta = Some(beta / prev.beta);
            }
        }
        records.push(IterationRecord {
            n,
            beta,
            step,
            dist_to_p,
            alpha,
            fejer_gap,
            delta: None,
        });

        if beta <= config.tol_residual {
            iterates.push(next);
            break Status::Converged { at: n };
        }
        if !next.is_finite() || next.norm() > config.divergence_bound {
            if next.is_finite() {
                iterates.push(next);
            }
            break Status::Diverged { at: n + 1 };
        }
        iterates.push(next.clone());
        if n == config.max_iter {
            break Status::MaxIterReached;
        }
        x = next;
        n += 1;
    };

    let final_x = match status {
        Status::Diverged { .. } => iterates.last().cloned().expect("x0 is always present"),
        _ => x,
    };

    Ok(Trace {
        records,
        status,
        final_x,
        iterates,
        reference: p,
        lambda,
        k,
        tol_residual: config.tol_residual,
        gamma_warning: config.gamma_warning(),
    })
}
