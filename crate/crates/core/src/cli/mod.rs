//! Command-line driver.
//!
//! Every command reads an [`ExperimentConfig`], validates it completely, runs
//! on a worker pool capped by `--threads`, and writes `report.json` into the
//! output directory (also echoed on stdout).
//!
//! Exit codes: 0 pass, 1 a verdict failed, 2 usage or configuration error,
//! 3 data or I/O error, 4 numerical non-convergence.

mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

pub use config::{ConfigError, ExperimentConfig, Leaf, LEAVES, SCHEMA_VERSION};
pub use report::{strip_wall_clock, Report, WALL_CLOCK_KEY};

use crate::error::Error;
use report::Findings;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const COMMANDS: [(&str, &str); 7] = [
    ("simulate", "Draw exceedance samples and write them as CSV and/or binary"),
    ("verify-rn", "Random norming: factorization statistic, permutation p-value and marginal KS distances"),
    ("verify-dn", "Deterministic norming: ECDF against the limit law H and the factorization test"),
    ("limit-h", "Export the limit law H and the product H1 H2 over a grid"),
    ("gap", "Factorization gap max |H - H1 H2| over the quantile grid"),
    ("chi", "Empirical tail-dependence coefficient over a ladder of levels"),
    ("diagnose", "Fit norming functions to a CSV and test the residuals for independence"),
];

/// A command that stopped before producing a report.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { code: EXIT_CONFIG, message: e.0 }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), message: e.to_string() }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Capacity { .. } | Error::ModelMismatch { .. } | Error::InsufficientData { .. } => {
            EXIT_CONFIG
        }
        Error::MissingColumn(_)
        | Error::MissingFile(_)
        | Error::Format(_)
        | Error::Degenerate(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => EXIT_DATA,
        Error::Quadrature { .. } | Error::FitConvergence(_) => EXIT_NUMERICAL,
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub code: i32,
}

pub fn command() -> Command {
    let mut common = vec![
        Arg::new("config")
            .long("config")
            .value_name("PATH")
            .value_parser(value_parser!(PathBuf))
            .help("experiment configuration (JSON)"),
        Arg::new("threads")
            .long("threads")
            .value_name("K")
            .env("CEVNORM_THREADS")
            .value_parser(value_parser!(usize))
            .help("worker threads (0 = all cores); results do not depend on it"),
    ];
    for leaf in LEAVES {
        common.push(
            Arg::new(leaf.flag)
                .long(leaf.flag)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .allow_hyphen_values(true)
                .help(format!("{} [{}]", leaf.help, leaf.path)),
        );
    }
    Command::new("cevnorm")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Conditioned extreme value limits under random and deterministic norming")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommands(COMMANDS.iter().map(|(name, about)| Command::new(*name).about(*about).args(common.clone())))
}

/// Parses arguments and runs one command. Clap's own messages (help,
/// version, usage errors) come back as a `Failure` carrying their text.
pub fn execute<I, T>(args: I) -> Result<Outcome, Failure>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command().try_get_matches_from(args).map_err(|e| Failure {
        code: if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS },
        message: e.render().to_string(),
    })?;
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let threads = sub.get_one::<usize>("threads").copied().unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure { code: EXIT_CONFIG, message: format!("cannot start worker pool: {e}") })?;
    pool.install(|| run_command(name, sub))
}

fn run_command(name: &str, sub: &ArgMatches) -> Result<Outcome, Failure> {
    let started = Instant::now();
    let overrides: Vec<(Leaf, String)> = LEAVES
        .iter()
        .filter_map(|leaf| sub.get_one::<String>(leaf.flag).map(|v| (*leaf, v.clone())))
        .collect();
    let cfg = ExperimentConfig::assemble(sub.get_one::<PathBuf>("config").map(PathBuf::as_path), &overrides)?;
    cfg.validate()?;
    let model = cfg.model()?;
    let out = cfg.io.out.clone();
    std::fs::create_dir_all(&out).map_err(Error::from)?;

    let mut f = Findings::default();
    match name {
        "simulate" => commands::simulate(&cfg, &model, &out, &mut f)?,
        "verify-rn" => commands::verify_rn(&cfg, &model, &mut f)?,
        "verify-dn" => commands::verify_dn(&cfg, &model, &out, &mut f)?,
        "limit-h" => commands::limit_h(&cfg, &model, &out, &mut f)?,
        "gap" => commands::gap(&cfg, &model, &out, &mut f)?,
        "chi" => commands::chi(&cfg, &model, &mut f)?,
        "diagnose" => commands::diagnose(&cfg, &out, &mut f)?,
        other => unreachable!("unknown command {other}"),
    }

    let passed = (!f.verdicts.is_empty()).then(|| f.verdicts.values().all(|&v| v));
    let report = Report {
        command: name.to_owned(),
        config_hash: cfg.hash(),
        config: cfg,
        metrics: f.metrics,
        verdicts: f.verdicts,
        passed,
        version: env!("CARGO_PKG_VERSION").to_owned(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    std::fs::write(out.join("report.json"), report.to_json()).map_err(Error::from)?;
    let code = if passed == Some(false) { EXIT_VERDICT } else { EXIT_PASS };
    Ok(Outcome { report, code })
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match execute(args) {
        Ok(outcome) => {
            print!("{}", outcome.report.to_json());
            outcome.code
        }
        Err(f) if f.code == EXIT_PASS => {
            print!("{}", f.message);
            EXIT_PASS
        }
        Err(f) => {
            eprintln!("error: {}", f.message.trim_end());
            f.code
        }
    }
}
