//! Experiment files, artifact emission, the `check` report and the bundled suite.
//!
//! Exit codes shared by the command-line entry points:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | converged and every audit passed (or every check passed) |
//! | 1 | configuration or flag error |
//! | 2 | an audit or check failed, or the iteration budget ran out |
//! | 3 | the iteration diverged |

mod check;
mod config;
mod experiment;
mod suite;

pub use check::{check, parse_op, CheckArgs, CheckOutput, KSource};
pub use config::{Enrichment, EnrichmentMode, ExperimentConfig, DEFAULT_SAMPLE_COUNT};
pub use experiment::{
    run, run_config, strip_wall_time, Audit, Checks, RunOutcome, Summary, EXIT_AUDIT, EXIT_CONFIG, EXIT_DIVERGED,
    EXIT_OK, RATIO_TOL,
};
pub use suite::{
    oracle_catalog, random_symmetric, run_experiments, suite, suite_configs, CriterionResult, SuiteOptions,
    SuiteReport, SUITE_CONFIGS,
};
