//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a verification check fails, 2 for bad
//! input or usage.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::engine::{
    format_sig17, return_series_with, series_to_csv, series_to_json_lines, Backend, EngineConfig,
    EngineError, DEFAULT_EXACT_CAP,
};
use crate::lattice::{bundled, law_to_json, parse_law_json, LawError, StepLaw};
use crate::sim::{
    binomial_sigma, first_return_histogram, simulate_meetings, simulate_returns, SimConfig,
    SimError,
};
use crate::verify::{
    constant_audit_with, verify_reduction_with, verify_sweep_with, VerificationSummary,
    VerifyError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "z2walk", version, about = "Exact and simulated random walks on Z^2")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate, bundle or transform step-law files.
    Law {
        #[command(subcommand)]
        action: LawAction,
    },
    /// Return probabilities P[S_n = 0] and their partial sums.
    Series(SeriesArgs),
    /// Check the moment, symmetry and ball inequalities for n = 1..=n-max.
    Verify(VerifyArgs),
    /// Audit the constant K = max |B_n|/n and certify P[S_2n = 0] >= 1/(4Kn).
    Audit(AuditArgs),
    /// Seeded Monte Carlo runs.
    Simulate(SimulateArgs),
}

#[derive(Debug, Subcommand)]
enum LawAction {
    /// Check a law file and print a short description.
    Validate {
        #[arg(long)]
        law: PathBuf,
    },
    /// Write the bundled example laws into a directory.
    Bundle {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print the increment law of the difference of two independent walks.
    Difference {
        #[arg(long)]
        law: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Exact,
    Float,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Exact => Backend::Exact,
            BackendArg::Float => Backend::Float,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct SeriesArgs {
    #[arg(long)]
    law: PathBuf,
    #[arg(long)]
    n_max: u64,
    #[arg(long, value_enum, default_value = "exact")]
    backend: BackendArg,
    #[arg(long, value_enum, default_value = "csv")]
    output: OutputArg,
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    exact_cap: u64,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    law: PathBuf,
    #[arg(long)]
    n_max: u64,
    /// Certify the two-walk reduction instead of the single-walk chain.
    #[arg(long)]
    reduction: bool,
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    exact_cap: u64,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long)]
    law: PathBuf,
    #[arg(long)]
    n_max: u64,
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    exact_cap: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimKind {
    Returns,
    Meetings,
    FirstReturn,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    kind: SimKind,
    #[arg(long)]
    law: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 64)]
    horizon: u64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("MalformedLawFile: {path}: {kind}: {source}")]
    Law {
        path: PathBuf,
        kind: &'static str,
        source: LawError,
    },
    #[error("{0}")]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Verify(#[from] VerifyError),
    #[error("{0}")]
    Sim(#[from] SimError),
}

/// What a CLI invocation produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome::ok(text)
            } else {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(outcome) => outcome,
        Err(e) => Outcome {
            code: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn law_error_kind(e: &LawError) -> &'static str {
    match e {
        LawError::EmptySupport => "EmptySupport",
        LawError::WeightSumMismatch { .. } => "WeightSumMismatch",
        LawError::NonPositiveWeight { .. } => "NonPositiveWeight",
        LawError::NonPositiveDenominator(_) => "NonPositiveDenominator",
        LawError::DuplicateAtom(_) => "DuplicateAtom",
        LawError::DenominatorOverflow(..) => "DenominatorOverflow",
        LawError::Malformed(_) => "Malformed",
    }
}

pub fn load_law(path: &Path) -> Result<StepLaw, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_law_json(&text).map_err(|source| CliError::Law {
        path: path.to_owned(),
        kind: law_error_kind(&source),
        source,
    })
}

/// Writes every bundled law as `<name>.json` under `dir`.
pub fn emit_law_bundle(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (name, law) in bundled::all() {
        let path = dir.join(format!("{name}.json"));
        fs::write(&path, law_to_json(&law)).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

fn dispatch(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Law { action } => law_command(action),
        Command::Series(args) => series_command(args),
        Command::Verify(args) => verify_command(args),
        Command::Audit(args) => audit_command(args),
        Command::Simulate(args) => simulate_command(args),
    }
}

fn law_command(action: LawAction) -> Result<Outcome, CliError> {
    match action {
        LawAction::Validate { law: path } => {
            let law = load_law(&path)?;
            Ok(Outcome::ok(format!(
                "ok: {}: {} atoms, denominator {}, symmetric: {}, second moment: {}\n",
                path.display(),
                law.support_len(),
                law.denominator(),
                law.is_symmetric(),
                law.second_moment()
            )))
        }
        LawAction::Bundle { dir } => {
            let mut out = String::new();
            for path in emit_law_bundle(&dir)? {
                writeln!(out, "{}", path.display()).unwrap();
            }
            Ok(Outcome::ok(out))
        }
        LawAction::Difference { law: path } => {
            let law = load_law(&path)?;
            let diff = law.difference().map_err(|source| CliError::Law {
                path: path.clone(),
                kind: law_error_kind(&source),
                source,
            })?;
            Ok(Outcome::ok(law_to_json(&diff)))
        }
    }
}

fn config(exact_cap: u64) -> EngineConfig {
    EngineConfig {
        exact_cap,
        ..Default::default()
    }
}

fn series_command(args: SeriesArgs) -> Result<Outcome, CliError> {
    let law = load_law(&args.law)?;
    let rows = return_series_with(&law, args.n_max, args.backend.into(), &config(args.exact_cap))?;
    Ok(Outcome::ok(match args.output {
        OutputArg::Csv => series_to_csv(&rows),
        OutputArg::Json => series_to_json_lines(&rows),
    }))
}

/// Exit code for a completed check.
pub fn verdict_code(pass: bool) -> i32 {
    if pass {
        EXIT_OK
    } else {
        EXIT_VERIFICATION_FAILED
    }
}

fn verify_command(args: VerifyArgs) -> Result<Outcome, CliError> {
    let law = load_law(&args.law)?;
    let cfg = config(args.exact_cap);
    if args.reduction {
        let report = verify_reduction_with(&law, args.n_max, &cfg)?;
        return Ok(Outcome {
            code: verdict_code(report.all_ok()),
            stdout: format!("{}\n", report.to_json()),
            stderr: String::new(),
        });
    }
    let records = verify_sweep_with(&law, args.n_max, &cfg)?;
    let summary = VerificationSummary::from_records(&records);
    let mut out = String::new();
    for r in &records {
        writeln!(out, "{}", r.to_json()).unwrap();
    }
    writeln!(
        out,
        "{}",
        serde_json::json!({ "summary": summary })
    )
    .unwrap();
    Ok(Outcome {
        code: verdict_code(summary.all_pass),
        stdout: out,
        stderr: String::new(),
    })
}

fn audit_command(args: AuditArgs) -> Result<Outcome, CliError> {
    let law = load_law(&args.law)?;
    let audit = constant_audit_with(&law, args.n_max, &config(args.exact_cap))?;
    Ok(Outcome {
        code: verdict_code(audit.certified),
        stdout: format!("{}\n", audit.to_json()),
        stderr: String::new(),
    })
}

fn simulate_command(args: SimulateArgs) -> Result<Outcome, CliError> {
    let law = load_law(&args.law)?;
    let cfg = SimConfig {
        seed: args.seed,
        trials: args.trials,
        horizon: args.horizon,
        law,
    };
    let mut out = String::new();
    match args.kind {
        SimKind::Returns => {
            let stats = simulate_returns(&cfg)?;
            let backend = if cfg.horizon <= DEFAULT_EXACT_CAP {
                Backend::Exact
            } else {
                Backend::Float
            };
            let exact = return_series_with(&cfg.law, cfg.horizon, backend, &config(DEFAULT_EXACT_CAP))?;
            out.push_str("n,frequency,exact,abs_err,sigma\n");
            for row in exact {
                let f = stats.frequency(row.n);
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    row.n,
                    format_sig17(f),
                    format_sig17(row.p_return),
                    format_sig17((f - row.p_return).abs()),
                    format_sig17(binomial_sigma(row.p_return, cfg.trials))
                )
                .unwrap();
            }
        }
        SimKind::Meetings => {
            let stats = simulate_meetings(&cfg)?;
            out.push_str("trial,meeting_count\n");
            for (i, m) in stats.per_trial.iter().enumerate() {
                writeln!(out, "{i},{m}").unwrap();
            }
        }
        SimKind::FirstReturn => {
            let hist = first_return_histogram(&cfg)?;
            out.push_str("n,count\n");
            for (n, c) in &hist.counts {
                writeln!(out, "{n},{c}").unwrap();
            }
            writeln!(out, "overflow,{}", hist.overflow).unwrap();
        }
    }
    Ok(Outcome::ok(out))
}
