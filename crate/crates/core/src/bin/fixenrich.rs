use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use fixenrich::enrichment::Checker;
use fixenrich::harness::{self, CheckArgs, KSource, SuiteOptions, EXIT_CONFIG};

/// Enriched strictly pseudocontractive operators: checks, iterations and audits.
///
/// FIXENRICH_TOL overrides the slack of sampled inequality checks (default 1e-9).
#[derive(Parser)]
#[command(name = "fixenrich", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment file and write its trace CSV and summary JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Sample the inequality chain for one operator and print a JSON report.
    #[command(group(ArgGroup::new("k_source").required(true).args(["k", "estimate"])))]
    Check {
        /// scalar:<a> | rotation:<theta> | reflection:<c>[,<c>..] | identity[:n] | matrix:<path> | saturation[:n]
        #[arg(long, allow_hyphen_values = true)]
        op: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, allow_hyphen_values = true)]
        k: Option<f64>,
        /// Use the sampled least k instead of --k.
        #[arg(long)]
        estimate: bool,
        #[arg(long, default_value_t = harness::DEFAULT_SAMPLE_COUNT)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every bundled acceptance experiment and print a pass/fail table.
    Suite {
        #[arg(long, default_value = "suite-out")]
        out_dir: PathBuf,
    },
}

/// Prints without panicking when stdout is closed early (e.g. piped into `head`).
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn fail(err: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {err}");
    exit(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run { config, out_dir } => match harness::run(&config, &out_dir) {
            Ok(out) => {
                emit(&format!(
                    "{}: {} after {} iterations, final residual {:e}",
                    out.summary.name, out.summary.status, out.summary.iterations, out.summary.final_residual
                ));
                if !out.summary.checks.failed.is_empty() {
                    emit(&format!("failed audits: {}", out.summary.checks.failed.join(", ")));
                }
                emit(&format!(
                    "wrote {} and {}",
                    out.trace_path.display(),
                    out.summary_path.display()
                ));
                exit(out.exit_code())
            }
            Err(e) => fail(e),
        },
        Command::Check {
            op,
            b,
            k,
            estimate,
            samples,
            seed,
        } => {
            let checker = match Checker::from_env() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let op = match harness::parse_op(&op) {
                Ok(op) => op,
                Err(e) => return fail(e),
            };
            let k = match (k, estimate) {
                (Some(k), false) => KSource::Given(k),
                _ => KSource::Estimate,
            };
            match harness::check(
                &CheckArgs {
                    op,
                    b,
                    k,
                    samples,
                    seed,
                },
                &checker,
            ) {
                Ok(report) => {
                    emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
                    exit(report.exit_code())
                }
                Err(e) => fail(e),
            }
        }
        Command::Suite { out_dir } => {
            let opts = match SuiteOptions::from_env() {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            match harness::suite(&out_dir, &opts) {
                Ok(report) => {
                    emit(report.table().trim_end());
                    exit(report.exit_code())
                }
                Err(e) => fail(e),
            }
        }
    }
}
