//! Command-line front end tying the engine together: exact verdicts with
//! witness recipes, endpoint eligibility, fold-and-distribute reductions,
//! profile search, merge-process replays, numerical verification suites, and
//! parameter scans.
//!
//! Conventions shared by every subcommand:
//!
//! * input is a JSON problem document (`--spec`); rationals travel as
//!   `"num/den"` strings end to end and are never converted to decimals
//!   outside the Monte Carlo layer;
//! * output goes to stdout in the selected `--format`; identical invocations
//!   produce byte-identical output (the Monte Carlo seed defaults to a fixed
//!   constant, never the clock);
//! * exit codes: 0 affirmative (bounded / eligible / found / suite passed),
//!   1 negative (unbounded / not eligible / hypotheses failed / suite
//!   failed), 2 out of scope, 3 resource budget exceeded, 64 unreadable or
//!   malformed input (with a JSON pointer to the offending field).
//!
//! The environment variable `MFI_RAT_BIT_BUDGET` caps the bit size of
//! intermediate rationals in the exact solver (default 4096).

mod foldcmd;
mod input;
mod process;
mod render;
mod scan;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mfi_core::{
    check_endpoint, check_integrability, condition_report_json, decide_boundedness,
    endpoint_decision_json, find_admissible_profile, format_rat, linsystem_json, BoundednessDecision,
    DocError, EndpointDecision, EngineError, KernelError, LinError, SystemKind,
};

/// Fixed default seed: reruns reproduce bit-exactly unless the user asks for
/// a different stream.
const DEFAULT_SEED: u64 = 299_792_458;

const EXIT_NEGATIVE: u8 = 1;
const EXIT_OUT_OF_SCOPE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_INPUT: u8 = 64;

/// Failures surfaced to the user, each tied to one exit code.
#[derive(Debug)]
enum CliError {
    /// Unreadable or malformed input; `location` is a JSON pointer or flag
    /// name when known. Exit 64.
    Input { location: String, detail: String },
    /// A resource budget stopped the computation. Exit 3.
    Resource(String),
    /// The command ran and its answer is negative (failed hypotheses,
    /// invalid step, write failure). Exit 1.
    Failure(String),
}

impl CliError {
    fn input(location: impl Into<String>, detail: impl Into<String>) -> Self {
        CliError::Input {
            location: location.into(),
            detail: detail.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input { .. } => EXIT_INPUT,
            CliError::Resource(_) => EXIT_RESOURCE,
            CliError::Failure(_) => EXIT_NEGATIVE,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input { location, detail } if location.is_empty() => {
                format!("invalid input: {detail}")
            }
            CliError::Input { location, detail } => {
                format!("invalid input at {location}: {detail}")
            }
            CliError::Resource(detail) => format!("resource budget exceeded: {detail}"),
            CliError::Failure(detail) => detail.clone(),
        }
    }
}

impl From<DocError> for CliError {
    fn from(err: DocError) -> Self {
        match err {
            DocError::Json(detail) => CliError::input("", detail),
            DocError::Field { pointer, detail } => CliError::Input {
                location: pointer,
                detail,
            },
        }
    }
}

impl From<LinError> for CliError {
    fn from(err: LinError) -> Self {
        match err {
            LinError::BitBudgetExceeded { .. } | LinError::IterationLimit(_) => {
                CliError::Resource(err.to_string())
            }
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<KernelError> for CliError {
    fn from(err: KernelError) -> Self {
        match err {
            KernelError::SubsetCapExceeded { .. } | KernelError::TooManyPoints(_) => {
                CliError::Resource(err.to_string())
            }
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(err: EngineError) -> Self {
        match err {
            EngineError::Kernel(k) => k.into(),
            EngineError::Lin(l) => l.into(),
            other => CliError::Failure(other.to_string()),
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct SpecArg {
    /// Path to the JSON problem document.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
}

#[derive(Args)]
struct ProfileArg {
    /// Lebesgue exponents overriding the document's "p": comma-separated
    /// rationals or "inf", e.g. "4/3,2,inf".
    #[arg(long, value_name = "LIST")]
    profile: Option<String>,
}

#[derive(Args)]
struct McArgs {
    /// Random seed for the Monte Carlo layer.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Monte Carlo samples per estimate.
    #[arg(long, default_value_t = 400_000)]
    samples: u64,
}

#[derive(Copy, Clone, ValueEnum)]
enum FoldModeArg {
    /// Bare-kernel fold preserving cluster integrability.
    Integrability,
    /// Profiled fold with the last exponent at infinity.
    SupNorm,
    /// Profiled fold with every exponent interior.
    WeakPower,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Suite {
    Selberg,
    Envelope,
    Homogeneity,
    Witness,
    All,
}

#[derive(Parser)]
#[command(
    name = "mfi",
    version,
    about = "Boundedness verdicts, certificates, and numerical checks for \
             multilinear functionals with pairwise power kernels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide boundedness; exit 0 bounded, 1 unbounded, 2 out of scope.
    Check {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        profile: ProfileArg,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// List clusters violating the integrability bound; exit 1 if any.
    Integrable {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Endpoint eligibility when exactly one exponent sits on the boundary.
    Endpoint {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        profile: ProfileArg,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Eliminate the last point, writing one reduced document per branch.
    Fold {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        profile: ProfileArg,
        /// Elimination regime.
        #[arg(long, value_enum)]
        mode: FoldModeArg,
        /// Directory for the reduced documents (default: the input's).
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        /// Include the mode's distribution system in the output for audit.
        #[arg(long)]
        dump_system: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Search for an interior profile making every subset row strict.
    FindProfile {
        #[command(flatten)]
        spec: SpecArg,
        /// Include the single-weight balance system in the output for audit.
        #[arg(long)]
        dump_system: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Replay a merge-process document and print the step trace.
    Process {
        #[command(flatten)]
        spec: SpecArg,
        /// After the listed steps, run the greedy concentration driver for
        /// at most this many further merges and append a summary.
        #[arg(long, value_name = "N")]
        max_steps: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run a numerical verification suite against the document.
    Verify {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        profile: ProfileArg,
        /// Which checks to run; `all` runs every suite whose preconditions
        /// the document meets and skips the rest.
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Sweep one parameter over a rational grid and report verdicts.
    Scan {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        profile: ProfileArg,
        /// Grid description: "alpha[i][j],start,stop,steps" or
        /// "r[i],start,stop,steps" with 1-based indices and rational bounds.
        #[arg(long, value_name = "PARAM,START,STOP,STEPS")]
        grid: String,
        /// Re-balance the remaining exponents to preserve the homogeneity
        /// balance at every grid point.
        #[arg(long)]
        rebalance: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are successes; anything else is a usage
            // error, reported on our own exit code (clap's default of 2
            // would collide with the out-of-scope verdict).
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_INPUT,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Check {
            spec,
            profile,
            format,
        } => cmd_check(&spec, &profile, format),
        Command::Integrable { spec, format } => cmd_integrable(&spec, format),
        Command::Endpoint {
            spec,
            profile,
            format,
        } => cmd_endpoint(&spec, &profile, format),
        Command::Fold {
            spec,
            profile,
            mode,
            out_dir,
            dump_system,
            format,
        } => foldcmd::run(&spec, &profile, mode, out_dir, dump_system, format),
        Command::FindProfile {
            spec,
            dump_system,
            format,
        } => cmd_find_profile(&spec, dump_system, format),
        Command::Process {
            spec,
            max_steps,
            format,
        } => process::run(&spec, max_steps, format),
        Command::Verify {
            spec,
            profile,
            suite,
            mc,
            format,
        } => verify::run(&spec, &profile, suite, &mc, format),
        Command::Scan {
            spec,
            profile,
            grid,
            rebalance,
            format,
        } => scan::run(&spec, &profile, &grid, rebalance, format),
    }
}

fn cmd_check(spec: &SpecArg, profile: &ProfileArg, format: Format) -> Result<u8, CliError> {
    let doc = input::load_document(&spec.spec)?;
    let prof = input::require_profile(&doc, profile)?;
    let report = decide_boundedness(&doc.spec, &prof)?;
    let out = match format {
        Format::Json => condition_report_json(&report),
        Format::Text => render::report_text(&report),
        Format::Csv => render::report_csv(&report),
    };
    println!("{out}");
    Ok(match report.verdict {
        BoundednessDecision::Bounded => 0,
        BoundednessDecision::Unbounded { .. } => EXIT_NEGATIVE,
        BoundednessDecision::OutOfScope { .. } => EXIT_OUT_OF_SCOPE,
    })
}

fn cmd_integrable(spec: &SpecArg, format: Format) -> Result<u8, CliError> {
    let doc = input::load_document(&spec.spec)?;
    let violations = check_integrability(&doc.spec)?;
    let n = doc.spec.n_rat();
    let detail: Vec<(Vec<usize>, String, String)> = violations
        .iter()
        .map(|j| {
            let capacity = (mfi_core::rat_int(j.len() as i64 - 1)) * &n;
            (
                j.one_based(),
                format_rat(&doc.spec.subset_alpha_sum(*j)),
                format_rat(&capacity),
            )
        })
        .collect();
    let out = match format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = detail
                .iter()
                .map(|(subset, sum, cap)| {
                    serde_json::json!({
                        "subset": subset,
                        "alpha_sum": sum,
                        "capacity": cap,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({
                "integrable": violations.is_empty(),
                "violations": rows,
            }))
            .expect("serializable")
        }
        Format::Csv => {
            let mut out = String::from("subset,alpha_sum,capacity");
            for (subset, sum, cap) in &detail {
                out.push('\n');
                out.push_str(&render::csv_line(&[
                    render::subset_str(subset),
                    sum.clone(),
                    cap.clone(),
                ]));
            }
            out
        }
        Format::Text => {
            if detail.is_empty() {
                "every cluster is integrable".to_string()
            } else {
                detail
                    .iter()
                    .map(|(subset, sum, cap)| {
                        format!(
                            "{} carries {} at or above its capacity {}",
                            render::subset_str(subset),
                            sum,
                            cap
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            }
        }
    };
    println!("{out}");
    Ok(if violations.is_empty() { 0 } else { EXIT_NEGATIVE })
}

fn cmd_endpoint(spec: &SpecArg, profile: &ProfileArg, format: Format) -> Result<u8, CliError> {
    let doc = input::load_document(&spec.spec)?;
    let prof = input::require_profile(&doc, profile)?;
    let decision = check_endpoint(&doc.spec, &prof).map_err(|e| match e {
        KernelError::EndpointCount(k) => CliError::input(
            "/p",
            format!("endpoint checks need exactly one boundary exponent, found {k}"),
        ),
        other => other.into(),
    })?;
    let out = match format {
        Format::Json => endpoint_decision_json(&decision),
        Format::Text | Format::Csv => render::endpoint_text(&decision),
    };
    println!("{out}");
    Ok(match decision {
        EndpointDecision::L1Eligible | EndpointDecision::BMOEligible => 0,
        EndpointDecision::NotEligible { .. } => EXIT_NEGATIVE,
    })
}

fn cmd_find_profile(spec: &SpecArg, dump_system: bool, format: Format) -> Result<u8, CliError> {
    let doc = input::load_document(&spec.spec)?;
    let found = find_admissible_profile(&doc.spec)?;
    let system = if dump_system {
        Some(mfi_core::build_system(
            SystemKind::SingleWeights,
            &doc.spec,
            None,
        )?)
    } else {
        None
    };
    let out = match format {
        Format::Json => {
            let mut body = serde_json::Map::new();
            body.insert("found".into(), serde_json::json!(found.is_some()));
            if let Some(prof) = &found {
                let p: Vec<String> = prof
                    .reciprocals()
                    .iter()
                    .map(mfi_core::render_exponent)
                    .collect();
                body.insert("p".into(), serde_json::json!(p));
            }
            if let Some(sys) = &system {
                let sys_value: serde_json::Value =
                    serde_json::from_str(&linsystem_json(sys)).expect("valid JSON");
                body.insert("system".into(), sys_value);
            }
            serde_json::to_string_pretty(&serde_json::Value::Object(body)).expect("serializable")
        }
        Format::Text | Format::Csv => {
            let mut out = String::new();
            if let Some(sys) = &system {
                out.push_str(&sys.render());
            }
            match &found {
                Some(prof) => {
                    let p: Vec<String> = prof
                        .reciprocals()
                        .iter()
                        .map(mfi_core::render_exponent)
                        .collect();
                    out.push_str(&format!("p = ({})", p.join(", ")));
                }
                None => out.push_str("no admissible interior profile exists"),
            }
            out
        }
    };
    println!("{out}");
    Ok(if found.is_some() { 0 } else { EXIT_NEGATIVE })
}
