use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::enrichment::Checker;
use crate::error::{Error, Result};
use crate::iteration::{IterationConfig, Scheme, DEFAULT_MAX_ITER, DEFAULT_TOL_RESIDUAL};
use crate::operators::{Certificate, OperatorSpec, Provenance};
use crate::space::Vector;

pub const DEFAULT_SAMPLE_COUNT: usize = 2000;

/// How the experiment obtains `(b, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Enrichment {
    Given { b: f64, k: f64 },
    Mode(EnrichmentMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnrichmentMode {
    /// Closed-form least `k` at the config's `b`.
    Oracle,
    /// Sampled estimate using `sample_count` and `seed`.
    Estimate,
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_tol() -> f64 {
    DEFAULT_TOL_RESIDUAL
}

fn default_samples() -> usize {
    DEFAULT_SAMPLE_COUNT
}

/// One experiment, as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub operator: OperatorSpec,
    pub enrichment: Enrichment,
    /// Used by the `oracle` and `estimate` modes.
    #[serde(default)]
    pub b: f64,
    pub scheme: Scheme,
    pub x0: Vector,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol_residual: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub sample_count: usize,
    #[serde(default)]
    pub divergence_bound: Option<f64>,
}

fn config_err(field: impl Into<String>, reason: impl ToString) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.to_string(),
    }
}

/// Field named in a serde message such as "missing field `x0`".
fn quoted_field(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.inner().to_string();
            let field = match (path.as_str(), quoted_field(&msg)) {
                (".", Some(f)) => f.to_string(),
                (".", None) => "<root>".to_string(),
                (p, Some(f)) if msg.starts_with("missing field") => format!("{p}.{f}"),
                (p, _) => p.to_string(),
            };
            config_err(field, msg)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        let name_ok = !self.name.is_empty()
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            && !self.name.starts_with('.');
        if !name_ok {
            return Err(config_err("name", "use letters, digits, '-', '_' or '.'"));
        }
        self.operator.validate().map_err(|e| config_err("operator", e))?;
        if self.sample_count == 0 {
            return Err(config_err("sample_count", "must be at least 1"));
        }
        Ok(())
    }

    /// Resolves the enrichment constants into a certificate carrying the
    /// operator's closed-form fixed point when it has one.
    pub fn certificate(&self, checker: &Checker) -> Result<Certificate> {
        let cert = match &self.enrichment {
            Enrichment::Given { b, k } => {
                Certificate::new(*b, *k, Provenance::Given).map_err(|e| config_err("enrichment", e))?
            }
            Enrichment::Mode(EnrichmentMode::Oracle) => {
                if self.operator.oracle_min_k(self.b).is_none() {
                    return Err(config_err(
                        "enrichment",
                        format!(
                            "\"oracle\" needs a closed-form constant; {} has none",
                            self.operator.name()
                        ),
                    ));
                }
                self.operator
                    .analytic_certificate(self.b)
                    .map_err(|e| config_err("b", e))?
            }
            Enrichment::Mode(EnrichmentMode::Estimate) => {
                let pairs = self.operator.sample_pairs(self.sample_count, self.seed)?;
                let k = checker
                    .estimate_min_k(&self.operator, self.b, &pairs)
                    .map_err(|e| config_err("enrichment", e))?;
                Certificate::new(
                    self.b,
                    k,
                    Provenance::Empirical {
                        sample_count: pairs.len(),
                        seed: self.seed,
                    },
                )
                .map_err(|e| config_err("enrichment", e))?
            }
        };
        Ok(cert.with_fixed_point(self.operator.known_fixed_point()))
    }

    /// Fully concrete iteration input; nothing is resolved after this point.
    pub fn resolve(&self, checker: &Checker) -> Result<IterationConfig> {
        let cert = self.certificate(checker)?;
        let mut cfg = IterationConfig::new(self.operator.clone(), cert, self.scheme.clone(), self.x0.clone())
            .max_iter(self.max_iter)
            .tol_residual(self.tol_residual);
        if let Some(bound) = self.divergence_bound {
            cfg = cfg.divergence_bound(bound);
        }
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => config_err(name, reason),
            Error::DimensionMismatch { .. } => config_err("x0", e),
            other => config_err("scheme", other),
        })?;
        Ok(cfg)
    }
}
