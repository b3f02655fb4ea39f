use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::enrichment::Checker;
use crate::error::Result;
use crate::iteration::{self, IterationConfig, Scheme, Status, Trace, MONOTONE_TOL};
use crate::operators::Certificate;
use crate::space::Vector;

/// Slack on `delta_n <= 1`.
pub const RATIO_TOL: f64 = 1e-9;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_AUDIT: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Audit {
    Passed { value: f64, bound: f64 },
    Failed { value: f64, bound: f64 },
    Skipped { reason: String },
}

impl Audit {
    fn compare(value: f64, bound: f64) -> Self {
        if value <= bound {
            Audit::Passed { value, bound }
        } else {
            Audit::Failed { value, bound }
        }
    }

    fn skipped(reason: &str) -> Self {
        Audit::Skipped {
            reason: reason.to_string(),
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, Audit::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub passed: Vec<String>,
    pub failed: Vec<String>,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub operator: String,
    pub certificate: Certificate,
    pub scheme: Scheme,
    pub status: Status,
    pub iterations: usize,
    pub final_residual: f64,
    pub final_x: Vector,
    pub gamma_warning: bool,
    pub bounded_domain: bool,
    pub audits: BTreeMap<String, Audit>,
    pub checks: Checks,
    pub exit_code: i32,
    /// Seconds; the only field that differs between identical runs.
    pub wall_time_s: f64,
}

impl Summary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Everything produced by one experiment.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub iteration: IterationConfig,
    pub trace: Trace,
    pub summary: Summary,
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code
    }
}

/// Reads a config file, runs it and writes `<name>.trace.csv` and
/// `<name>.summary.json` into `out_dir`.
pub fn run(config_path: &Path, out_dir: &Path) -> Result<RunOutcome> {
    let config = ExperimentConfig::from_path(config_path)?;
    run_config(&config, out_dir, &Checker::from_env()?)
}

pub fn run_config(config: &ExperimentConfig, out_dir: &Path, checker: &Checker) -> Result<RunOutcome> {
    let start = Instant::now();
    let iteration = config.resolve(checker)?;
    let trace = iteration::run(&iteration)?;
    let audits = audits(config, &iteration, &trace)?;

    let mut checks = Checks {
        passed: vec![],
        failed: vec![],
        skipped: vec![],
    };
    for (name, audit) in &audits {
        match audit {
            Audit::Passed { .. } => checks.passed.push(name.clone()),
            Audit::Failed { .. } => checks.failed.push(name.clone()),
            Audit::Skipped { .. } => checks.skipped.push(name.clone()),
        }
    }
    let exit_code = match trace.status {
        Status::Diverged { .. } => EXIT_DIVERGED,
        Status::Converged { .. } if checks.failed.is_empty() => EXIT_OK,
        _ => EXIT_AUDIT,
    };

    let mut summary = Summary {
        name: config.name.clone(),
        operator: config.operator.name(),
        certificate: iteration.certificate.clone(),
        scheme: config.scheme.clone(),
        status: trace.status,
        iterations: trace.records.last().map_or(0, |r| r.n),
        final_residual: trace.last_beta(),
        final_x: trace.final_x.clone(),
        gamma_warning: trace.gamma_warning,
        bounded_domain: config.operator.domain.is_bounded(),
        audits,
        checks,
        exit_code,
        wall_time_s: 0.0,
    };

    fs::create_dir_all(out_dir)?;
    let trace_path = out_dir.join(format!("{}.trace.csv", config.name));
    let summary_path = out_dir.join(format!("{}.summary.json", config.name));
    write_atomic(&trace_path, trace.to_csv_string().as_bytes())?;
    summary.wall_time_s = start.elapsed().as_secs_f64();
    write_atomic(&summary_path, summary.to_json().as_bytes())?;

    Ok(RunOutcome {
        config: config.clone(),
        iteration,
        trace,
        summary,
        trace_path,
        summary_path,
    })
}

/// Writes to a sibling temp file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Removes the `wall_time_s` line so two summaries can be compared byte for byte.
pub fn strip_wall_time(summary_json: &str) -> String {
    summary_json
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"wall_time_s\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn audits(config: &ExperimentConfig, it: &IterationConfig, trace: &Trace) -> Result<BTreeMap<String, Audit>> {
    let k = it.certificate.k;
    let mut out = BTreeMap::new();
    let is_mann = matches!(it.scheme, Scheme::Mann { .. });
    let has_p = trace.reference.is_some();

    let fejer_skip = match (is_mann, has_p) {
        (false, _) => Some("requires the mann scheme"),
        (true, false) => Some("no known fixed point"),
        (true, true) => None,
    };
    match fejer_skip {
        Some(reason) => {
            out.insert("fejer_max_deficit".into(), Audit::skipped(reason));
            out.insert("summability".into(), Audit::skipped(reason));
        }
        None => {
            let f = iteration::fejer_audit(trace, None, k)?;
            out.insert("fejer_max_deficit".into(), Audit::compare(f.max_deficit, f.bound));
            let s = iteration::summability(trace, None, k)?;
            out.insert(
                "summability".into(),
                Audit::compare(s.lhs, s.rhs + iteration::FEJER_REL_TOL * (1.0 + s.rhs)),
            );
        }
    }

    let diverged = matches!(trace.status, Status::Diverged { .. });
    let monotone_skip = if diverged {
        Some("run diverged")
    } else if trace.gamma_warning {
        Some("step outside the safe range")
    } else {
        None
    };
    match monotone_skip {
        Some(reason) => {
            out.insert("residual_max_ratio".into(), Audit::skipped(reason));
            out.insert("step_norms_nonincreasing".into(), Audit::skipped(reason));
        }
        None => {
            out.insert(
                "residual_max_ratio".into(),
                match iteration::residual_monotonicity_audit(trace) {
                    Some(r) => Audit::compare(r, 1.0 + RATIO_TOL),
                    None => Audit::skipped("fewer than two nonzero residuals"),
                },
            );
            let steps = iteration::asymptotic_regularity_audit(trace);
            let scale = steps.first().map_or(1.0, |s| s.abs().max(1.0));
            let worst_rise = steps.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            out.insert(
                "step_norms_nonincreasing".into(),
                Audit::compare(worst_rise, MONOTONE_TOL * scale),
            );
        }
    }

    out.insert(
        "fixed_point".into(),
        if trace.is_converged() {
            let c = iteration::cluster_fixed_point_check(trace, &it.operator, it.lambda())?;
            if c.dist_nonincreasing == Some(false) {
                Audit::Failed {
                    value: c.residual,
                    bound: c.threshold,
                }
            } else {
                Audit::compare(c.residual, c.threshold)
            }
        } else {
            Audit::skipped("run did not converge")
        },
    );

    out.insert(
        "self_map".into(),
        if config.operator.domain.is_bounded() {
            match config.operator.self_map_violation(config.sample_count, config.seed)? {
                None => Audit::Passed { value: 0.0, bound: 0.0 },
                Some(_) => Audit::Failed { value: 1.0, bound: 0.0 },
            }
        } else {
            Audit::skipped("unbounded domain; inequalities are checked on the whole space")
        },
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(scheme: &str, extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"name": "t", "operator": {{"variant": "scalar_linear", "a": -3}},
                "enrichment": "oracle", "scheme": {scheme}, "x0": [1.0]{extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let ok = run_config(
            &cfg(r#"{"kind": "krasnoselskij", "gamma": 0.4}"#, ""),
            dir.path(),
            &Checker::default(),
        )
        .unwrap();
        assert_eq!(ok.exit_code(), EXIT_OK);
        assert!(ok.trace_path.exists() && ok.summary_path.exists());
        assert!(matches!(ok.summary.audits["fejer_max_deficit"], Audit::Skipped { .. }));

        let div = run_config(
            &cfg(r#"{"kind": "krasnoselskij", "gamma": 0.6}"#, ""),
            dir.path(),
            &Checker::default(),
        )
        .unwrap();
        assert_eq!(div.exit_code(), EXIT_DIVERGED);

        let slow = cfg(r#"{"kind": "krasnoselskij", "gamma": 0.01}"#, r#", "max_iter": 10"#);
        assert_eq!(
            run_config(&slow, dir.path(), &Checker::default()).unwrap().exit_code(),
            EXIT_AUDIT
        );
    }

    #[test]
    fn mann_runs_carry_every_audit() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            r#"{"kind": "mann", "schedule": {"kind": "constant", "alpha": 0.75}}"#,
            "",
        );
        let out = run_config(&c, dir.path(), &Checker::default()).unwrap();
        assert_eq!(out.exit_code(), EXIT_OK);
        for key in [
            "fejer_max_deficit",
            "summability",
            "residual_max_ratio",
            "step_norms_nonincreasing",
            "fixed_point",
        ] {
            assert!(matches!(out.summary.audits[key], Audit::Passed { .. }), "{key}");
        }
        let json = fs::read_to_string(&out.summary_path).unwrap();
        assert!(json.trim_end().ends_with('}'));
        let last_field = json.lines().rev().nth(1).unwrap();
        assert!(last_field.trim_start().starts_with("\"wall_time_s\""));
    }

    #[test]
    fn repeat_runs_match_outside_wall_time() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let c = cfg(
            r#"{"kind": "mann", "schedule": {"kind": "power_decay", "k": 0.5, "c": 0.5, "p": 1}}"#,
            r#", "max_iter": 500"#,
        );
        let x = run_config(&c, a.path(), &Checker::default()).unwrap();
        let y = run_config(&c, b.path(), &Checker::default()).unwrap();
        assert_eq!(fs::read(&x.trace_path).unwrap(), fs::read(&y.trace_path).unwrap());
        assert_eq!(
            strip_wall_time(&fs::read_to_string(&x.summary_path).unwrap()),
            strip_wall_time(&fs::read_to_string(&y.summary_path).unwrap())
        );
    }
}
