use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::enrichment::{CheckReport, Checker, TransformedOperator};
use crate::error::{Error, Result};
use crate::operators::{OperatorSpec, SymMatrix};
use crate::space::Vector;

/// Parses the `--op` mini-grammar:
/// `scalar:<a>`, `rotation:<theta>`, `reflection:<c>[,<c>...]`,
/// `identity[:<dim>]`, `matrix:<path>` and `saturation[:<dim>]`.
///
/// The matrix file holds `{"q": [[...], ...], "c": [...]}` with `c`
/// optional (zero).
pub fn parse_op(spec: &str) -> Result<OperatorSpec> {
    let (head, arg) = match spec.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (spec, None),
    };
    let bad = |reason: String| Error::Config {
        field: "op".into(),
        reason,
    };
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad(format!("`{s}` is not a finite number")))
    };
    let dim = |a: Option<&str>| -> Result<usize> {
        match a {
            None => Ok(1),
            Some(s) => s
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| bad(format!("`{s}` is not a dimension"))),
        }
    };
    let missing = || bad(format!("`{head}` needs an argument, e.g. {head}:<value>"));

    let op = match head {
        "scalar" => OperatorSpec::scalar(num(arg.ok_or_else(missing)?)?),
        "rotation" => OperatorSpec::rotation(num(arg.ok_or_else(missing)?)?),
        "reflection" => {
            let c = arg
                .ok_or_else(missing)?
                .split(',')
                .map(num)
                .collect::<Result<Vec<_>>>()?;
            OperatorSpec::reflection(Vector::new(c)?)
        }
        "identity" => OperatorSpec::identity(dim(arg)?),
        "saturation" => OperatorSpec::saturation(dim(arg)?),
        "matrix" => read_matrix(Path::new(arg.ok_or_else(missing)?))?,
        other => return Err(bad(format!("unknown operator `{other}`"))),
    };
    Ok(op)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    q: SymMatrix,
    c: Option<Vector>,
}

fn read_matrix(path: &Path) -> Result<OperatorSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        field: "op".into(),
        reason: format!("{}: {e}", path.display()),
    })?;
    let m: MatrixFile = serde_json::from_str(&text).map_err(|e| Error::Config {
        field: "op".into(),
        reason: format!("{}: {e}", path.display()),
    })?;
    let c = m.c.unwrap_or_else(|| Vector::zeros(m.q.dim()));
    OperatorSpec::affine(m.q, c)
}

/// Where `k` comes from in a check run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KSource {
    Given(f64),
    Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckArgs {
    pub op: OperatorSpec,
    pub b: f64,
    pub k: KSource,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutput {
    pub operator: String,
    pub b: f64,
    pub k: f64,
    pub k_estimated: bool,
    pub lambda: f64,
    /// `t` used for the relaxed map, `0.5 (1 - k)`.
    pub t: f64,
    pub enriched_spc: CheckReport,
    pub averaged_spc: CheckReport,
    pub residual_cocoercive: CheckReport,
    pub relaxed_nonexpansive: CheckReport,
    pub passed: bool,
}

impl CheckOutput {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            super::EXIT_OK
        } else {
            super::EXIT_AUDIT
        }
    }
}

/// Runs the four links of the averaging chain on one shared sample.
pub fn check(args: &CheckArgs, checker: &Checker) -> Result<CheckOutput> {
    let op = &args.op;
    let lambda = crate::enrichment::lambda_of_b(args.b)?;
    let pairs = op.sample_pairs(args.samples, args.seed)?;
    let (k, k_estimated) = match args.k {
        KSource::Given(k) => (k, false),
        KSource::Estimate => (checker.estimate_min_k(op, args.b, &pairs)?, true),
    };
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Config {
            field: if k_estimated { "estimate".into() } else { "k".into() },
            reason: format!("k = {k} is outside [0, 1)"),
        });
    }
    let t = 0.5 * (1.0 - k);
    let averaged = TransformedOperator::averaged(op.clone(), lambda)?;
    let residual = TransformedOperator::residual(op.clone(), lambda)?;
    let relaxed = TransformedOperator::relaxed(op.clone(), lambda, t)?;

    let enriched_spc = checker.enriched_spc(op, args.b, k, &pairs)?;
    let averaged_spc = checker.spc(&averaged, k, &pairs)?;
    let residual_cocoercive = checker.cocoercive(&residual, k, &pairs)?;
    let relaxed_nonexpansive = checker.nonexpansive(&relaxed, &pairs)?;
    let passed =
        enriched_spc.passed && averaged_spc.passed && residual_cocoercive.passed && relaxed_nonexpansive.passed;
    Ok(CheckOutput {
        operator: op.name(),
        b: args.b,
        k,
        k_estimated,
        lambda,
        t,
        enriched_spc,
        averaged_spc,
        residual_cocoercive,
        relaxed_nonexpansive,
        passed,
    })
}
