//! Bundled experiments that replay every acceptance check.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::ExperimentConfig;
use super::experiment::{run_config, strip_wall_time, RunOutcome};
use crate::enrichment::{Checker, TransformedOperator};
use crate::error::{Error, Result};
use crate::iteration::{self, decompose_gamma, IterationConfig, Schedule, Scheme, Status, Trace};
use crate::operators::{Certificate, MinK, OperatorSpec, Provenance, SymMatrix};
use crate::space::{self, Sign, Vector};

/// Experiment configs shipped with the crate, `(file name, contents)`.
pub const SUITE_CONFIGS: &[(&str, &str)] = &[
    ("fejer-affine.json", include_str!("../../suite/fejer-affine.json")),
    ("fejer-rotation.json", include_str!("../../suite/fejer-rotation.json")),
    ("fejer-scalar.json", include_str!("../../suite/fejer-scalar.json")),
    ("kras-diverge.json", include_str!("../../suite/kras-diverge.json")),
    ("kras-rate.json", include_str!("../../suite/kras-rate.json")),
    ("mann-collapse.json", include_str!("../../suite/mann-collapse.json")),
];

const PAIRS: usize = 2000;
const SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    /// Tolerance for sampled inequality checks.
    pub check_tol: f64,
}

impl SuiteOptions {
    pub fn from_env() -> Result<Self> {
        Ok(Self {
            check_tol: Checker::from_env()?.tol,
        })
    }
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            check_tol: crate::enrichment::CHECK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    /// Sorted by name.
    pub results: Vec<CriterionResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            super::EXIT_OK
        } else {
            super::EXIT_AUDIT
        }
    }

    pub fn table(&self) -> String {
        let width = self.results.iter().map(|r| r.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for r in &self.results {
            let mark = if r.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{:<width$}  {mark}  {}", r.name, r.detail);
        }
        let n_pass = self.results.iter().filter(|r| r.passed).count();
        let _ = writeln!(out, "{n_pass}/{} criteria passed", self.results.len());
        out
    }
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CriterionResult {
    CriterionResult { name, passed, detail }
}

pub fn suite_configs() -> Result<Vec<ExperimentConfig>> {
    SUITE_CONFIGS
        .iter()
        .map(|(file, text)| {
            ExperimentConfig::from_json(text).map_err(|e| Error::Config {
                field: (*file).to_string(),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Runs the bundled experiments concurrently, writing their artifacts to `out_dir`.
pub fn run_experiments(out_dir: &Path, checker: &Checker) -> Result<Vec<RunOutcome>> {
    let configs = suite_configs()?;
    let mut outcomes = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| s.spawn(move || run_config(c, out_dir, checker)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    outcomes.sort_by(|a, b| a.config.name.cmp(&b.config.name));
    Ok(outcomes)
}

pub fn suite(out_dir: &Path, opts: &SuiteOptions) -> Result<SuiteReport> {
    let checker = Checker::new(opts.check_tol);
    let runs = run_experiments(out_dir, &checker)?;
    let trace = |name: &str| -> &Trace {
        &runs
            .iter()
            .find(|r| r.config.name == name)
            .expect("bundled experiment")
            .trace
    };

    let fejer = [trace("fejer-scalar"), trace("fejer-rotation"), trace("fejer-affine")];
    let mut results = vec![
        identities(),
        scalar_sharpness(&checker)?,
        enriched_nonexpansive(&checker)?,
        proof_chain(&checker)?,
        relaxed_threshold(&checker)?,
        kras_rate(trace("kras-rate"), trace("kras-diverge")),
        mann_collapse(trace("mann-collapse")),
        fejer_audits(&fejer)?,
        residual_monotonicity(&fejer),
        estimator_vs_oracle(&checker)?,
        scheme_equivalence()?,
        rotation(trace("fejer-rotation")),
        determinism(&runs, &out_dir.join("rerun"), &checker)?,
    ];
    results.sort_by(|a, b| a.name.cmp(b.name));
    Ok(SuiteReport { results })
}

fn uniform_vector(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> Vector {
    Vector::from_fn(dim, |_| rng.random_range(-half_width..=half_width))
}

fn identities() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for dim in [1, 2, 10, 50] {
        for _ in 0..10_000 {
            let t: f64 = rng.random();
            let x = uniform_vector(&mut rng, dim, 10.0);
            let y = uniform_vector(&mut rng, dim, 10.0);
            let scale = space::identity_scale(&x, &y);
            for gap in [
                space::identity_gap_i(&x, &y, Sign::Plus),
                space::identity_gap_i(&x, &y, Sign::Minus),
                space::identity_gap_ii(t, &x, &y),
            ] {
                worst = worst.max(gap.expect("same dimension").abs() / scale);
            }
        }
    }
    outcome(
        "01-identities",
        worst <= 1e-12,
        format!("max |gap|/scale = {worst:.3e}"),
    )
}

fn scalar_sharpness(checker: &Checker) -> Result<CriterionResult> {
    let op = OperatorSpec::scalar(-3.0);
    let pairs = op.sample_pairs(PAIRS, SEED)?;
    let at = checker.enriched_spc(&op, 0.0, 0.5, &pairs)?;
    let below = checker.enriched_spc(&op, 0.0, 0.45, &pairs)?;
    let again = checker.enriched_spc(&op, 0.0, 0.45, &op.sample_pairs(PAIRS, SEED)?)?;
    let passed = at.passed
        && at.max_violation <= 1e-12
        && !below.passed
        && below.witness.is_some()
        && below.witness == again.witness;
    Ok(outcome(
        "02-scalar-sharpness",
        passed,
        format!(
            "k=0.5 max {:.3e}; k=0.45 max {:.3e}",
            at.max_violation, below.max_violation
        ),
    ))
}

fn enriched_nonexpansive(checker: &Checker) -> Result<CriterionResult> {
    let op = OperatorSpec::scalar(-3.0);
    let pairs = op.sample_pairs(PAIRS, SEED)?;
    let ne = checker.enriched_nonexpansive(&op, 1.0, &pairs)?;
    let spc = checker.enriched_spc(&op, 1.0, 0.0, &pairs)?;
    let passed = ne.passed && ne.max_violation.abs() <= 1e-12 && spc.passed;
    Ok(outcome(
        "03-enriched-nonexpansive",
        passed,
        format!(
            "b=1 max {:.3e}; (b=1, k=0) max {:.3e}",
            ne.max_violation, spc.max_violation
        ),
    ))
}

/// Catalog operators with closed-form constants, at two enrichment levels.
pub fn oracle_catalog() -> Vec<OperatorSpec> {
    let v = |c: &[f64]| Vector::new(c.to_vec()).expect("finite");
    vec![
        OperatorSpec::scalar(-3.0),
        OperatorSpec::scalar(0.5),
        OperatorSpec::scalar(-1.0),
        OperatorSpec::rotation(std::f64::consts::FRAC_PI_3),
        OperatorSpec::reflection(v(&[4.0, -1.0])),
        OperatorSpec::identity(2),
        OperatorSpec::affine(SymMatrix::diag(&[-3.0, 0.5]).expect("diagonal"), v(&[1.0, 1.0])).expect("valid"),
    ]
}

fn proof_chain(checker: &Checker) -> Result<CriterionResult> {
    let mut failures = Vec::new();
    let mut cases = 0;
    for op in oracle_catalog() {
        let pairs = op.sample_pairs(PAIRS, SEED)?;
        for b in [0.0, 1.0] {
            let Some(MinK::Feasible(k)) = op.oracle_min_k(b) else {
                continue;
            };
            cases += 1;
            let lambda = 1.0 / (b + 1.0);
            let mut ok = checker.enriched_spc(&op, b, k, &pairs)?.passed;
            ok &= checker
                .spc(&TransformedOperator::averaged(op.clone(), lambda)?, k, &pairs)?
                .passed;
            ok &= checker
                .cocoercive(&TransformedOperator::residual(op.clone(), lambda)?, k, &pairs)?
                .passed;
            for f in [0.25, 0.5, 0.75, 0.99] {
                let relaxed = TransformedOperator::relaxed(op.clone(), lambda, f * (1.0 - k))?;
                ok &= checker.nonexpansive(&relaxed, &pairs)?.passed;
            }
            if !ok {
                failures.push(format!("{} b={b}", op.name()));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{cases} operator/b cases, no violations")
    } else {
        format!("violations: {}", failures.join(", "))
    };
    Ok(outcome("04-proof-chain", failures.is_empty(), detail))
}

fn relaxed_threshold(checker: &Checker) -> Result<CriterionResult> {
    let op = OperatorSpec::scalar(-3.0);
    let pairs = op.sample_pairs(PAIRS, SEED)?;
    let inside = checker.nonexpansive(&TransformedOperator::relaxed(op.clone(), 1.0, 0.49)?, &pairs)?;
    let outside_map = TransformedOperator::relaxed(op, 1.0, 0.51)?;
    let outside = checker.nonexpansive(&outside_map, &pairs)?;
    let factor = outside.witness_pair().map(|(x, y)| {
        let d = (&outside_map.evaluate(&x).expect("dim") - &outside_map.evaluate(&y).expect("dim")).norm();
        d / (&x - &y).norm()
    });
    let passed = inside.passed && !outside.passed && factor.is_some_and(|f| (f - 1.04).abs() <= 1e-12);
    Ok(outcome(
        "05-relaxed-threshold",
        passed,
        format!(
            "t=0.49 max {:.3e}; t=0.51 witness factor {:?}",
            inside.max_violation, factor
        ),
    ))
}

fn kras_rate(rate: &Trace, diverge: &Trace) -> CriterionResult {
    let worst = rate
        .iterates
        .iter()
        .take(61)
        .enumerate()
        .map(|(n, x)| {
            let exact = 0.6f64.powi(n as i32);
            (x.norm() - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    let passed = rate.is_converged()
        && rate.iterates.len() > 60
        && worst <= 1e-12
        && matches!(diverge.status, Status::Diverged { .. });
    outcome(
        "06-krasnoselskij-rate",
        passed,
        format!("max rel err {worst:.3e}; {}; gamma=0.6 {}", rate.status, diverge.status),
    )
}

fn mann_collapse(trace: &Trace) -> CriterionResult {
    let x1 = trace.iterates.get(1);
    let passed = x1.is_some_and(|x| x.as_slice() == [0.0]);
    outcome("07-mann-collapse", passed, format!("x1 = {x1:?}"))
}

fn fejer_audits(traces: &[&Trace]) -> Result<CriterionResult> {
    let mut passed = true;
    let mut parts = Vec::new();
    for t in traces {
        let f = iteration::fejer_audit(t, None, t.k)?;
        let s = iteration::summability(t, None, t.k)?;
        passed &= f.passed && s.lhs <= s.rhs + 1e-6;
        parts.push(format!("{:.1e}", f.max_deficit));
    }
    Ok(outcome(
        "08-fejer",
        passed,
        format!("max deficits {}", parts.join(", ")),
    ))
}

fn residual_monotonicity(traces: &[&Trace]) -> CriterionResult {
    let mut passed = true;
    let mut worst = 0.0f64;
    for t in traces {
        let ratio = iteration::residual_monotonicity_audit(t).unwrap_or(0.0);
        worst = worst.max(ratio);
        passed &= ratio <= 1.0 + 1e-9;
        passed &= iteration::is_nonincreasing(&iteration::asymptotic_regularity_audit(t), 1e-9);
    }
    outcome(
        "09-residual-monotonicity",
        passed,
        format!("max beta ratio {worst:.12}"),
    )
}

/// Orthonormal basis from Gram-Schmidt on Gaussian draws.
fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v = Vector::from_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
        for _ in 0..2 {
            for q in &basis {
                v = Vector::lincomb(1.0, &v, -v.dot(q), q);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push((1.0 / norm) * &v);
        }
    }
    basis
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> SymMatrix {
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    let vectors = random_orthonormal(rng, n);
    SymMatrix::from_eigen(&values, &vectors).expect("orthonormal basis")
}

fn estimator_vs_oracle(checker: &Checker) -> Result<CriterionResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let grid = [0.0, 0.5, 1.0, 2.0];
    let mut worst = 0.0f64;
    let mut monotone = true;
    for i in 0..20 {
        let q = random_symmetric(&mut rng, 5, -4.0, 1.0);
        let op = OperatorSpec::affine(q.clone(), Vector::zeros(5))?;
        let pairs = op.sample_pairs(PAIRS, SEED + i)?;
        let frontier = checker.estimate_frontier(&op, &grid, &pairs)?;
        for &(b, k_hat) in &frontier {
            let k = crate::operators::symmetric_min_k(&q, b)
                .value()
                .unwrap_or(f64::INFINITY);
            worst = worst.max((k_hat - k).abs());
        }
        monotone &= frontier.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    }
    Ok(outcome(
        "10-estimator-vs-oracle",
        worst <= 1e-6 && monotone,
        format!("max |estimate - oracle| = {worst:.3e}; frontier nonincreasing: {monotone}"),
    ))
}

fn scheme_equivalence() -> Result<CriterionResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_records = 0.0f64;
    let mut worst_vmu = 0.0f64;
    let mut same_len = true;
    for _ in 0..5 {
        let eig: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..0.9)).collect();
        let c = uniform_vector(&mut rng, 3, 2.0);
        let x0 = uniform_vector(&mut rng, 3, 5.0);
        let b = rng.random_range(0.0..2.0);
        let frac = rng.random_range(0.1..0.9);
        let op = OperatorSpec::affine(SymMatrix::diag(&eig)?, c)?;
        let k = op.oracle_min_k(b).and_then(MinK::value).expect("eigenvalues below one");
        let cert = Certificate::new(b, k, Provenance::Analytic)?;
        let lambda = cert.lambda;
        let alpha = k + frac * (1.0 - k);
        let gamma = lambda * (1.0 - alpha);

        let mn = iteration::mann(
            &IterationConfig::new(
                op.clone(),
                cert.clone(),
                Scheme::Mann {
                    schedule: Schedule::Constant { alpha },
                    statement_form: false,
                },
                x0.clone(),
            )
            .max_iter(300),
        )?;
        let kr = iteration::krasnoselskij(
            &IterationConfig::new(op.clone(), cert, Scheme::Krasnoselskij { gamma }, x0).max_iter(300),
        )?;
        same_len &= mn.records.len() == kr.records.len();
        for (a, m) in kr.records.iter().zip(&mn.records) {
            worst_records = worst_records
                .max((a.beta - m.beta).abs() / (1.0 + a.beta))
                .max((a.step - m.step).abs() / (1.0 + a.step));
        }

        let (t, mu) = decompose_gamma(gamma, b, k)?;
        for w in kr.iterates.windows(2) {
            let x = &w[0];
            let u = lambda * &(x - &op.evaluate(x)?);
            let u_t = Vector::lincomb(1.0, x, -t, &u);
            let v_mu = Vector::lincomb(1.0 - mu, x, mu, &u_t);
            worst_vmu = worst_vmu.max((&v_mu - &w[1]).norm() / (1.0 + x.norm()));
        }
    }
    Ok(outcome(
        "11-scheme-equivalence",
        same_len && worst_records <= 1e-12 && worst_vmu <= 1e-12,
        format!("records {worst_records:.3e}; V_mu {worst_vmu:.3e}"),
    ))
}

fn rotation(trace: &Trace) -> CriterionResult {
    let target = 0.75f64.sqrt();
    let worst = trace
        .iterates
        .windows(2)
        .filter(|w| w[0].norm() > 1e-300)
        .map(|w| (w[1].norm() / w[0].norm() - target).abs())
        .fold(0.0, f64::max);
    let at = match trace.status {
        Status::Converged { at } => Some(at),
        _ => None,
    };
    let passed = worst <= 1e-12 && at.is_some_and(|n| n <= 200) && trace.last_beta() <= 1e-10;
    outcome(
        "12-rotation",
        passed,
        format!("max ratio err {worst:.3e}; {}", trace.status),
    )
}

fn determinism(first: &[RunOutcome], rerun_dir: &Path, checker: &Checker) -> Result<CriterionResult> {
    let second = run_experiments(rerun_dir, checker)?;
    let mut mismatches = Vec::new();
    for (a, b) in first.iter().zip(&second) {
        if fs::read(&a.trace_path)? != fs::read(&b.trace_path)? {
            mismatches.push(format!("{}.trace.csv", a.config.name));
        }
        let sa = strip_wall_time(&fs::read_to_string(&a.summary_path)?);
        let sb = strip_wall_time(&fs::read_to_string(&b.summary_path)?);
        if sa != sb {
            mismatches.push(format!("{}.summary.json", a.config.name));
        }
    }
    let passed = mismatches.is_empty() && first.len() == second.len();
    let detail = if passed {
        format!("{} experiments byte-identical", first.len())
    } else {
        format!("differs: {}", mismatches.join(", "))
    };
    Ok(outcome("13-determinism", passed, detail))
}
