use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use weylab::catalog::descriptions;
use weylab::report::{write_reports, ScenarioReport};
use weylab::scenario::OutputFormat;
use weylab::verify::acceptance_scenarios;
use weylab::{run_scenario, Error, RunOptions, Scenario};

const EXIT_PASS: u8 = 0;
const EXIT_CHECK_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

const DEFAULT_OUT_DIR: &str = "weylab-out";

#[derive(Parser)]
#[command(name = "weylab", version, about = "Verification suites for the bundle of Weyl structures of a projective structure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Multiply every tolerance by this factor.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
    /// Override the number of sampled points.
    #[arg(long)]
    points: Option<usize>,
    /// Override the sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the scenario's, else `weylab-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// List the geometry catalog and the available checks.
    ListGeometries,
    /// Run the built-in acceptance suite.
    VerifyAll {
        #[command(flatten)]
        args: RunArgs,
    },
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn fail(code: u8, e: &Error) -> ExitCode {
    let kind = match e {
        Error::Scenario(_) => "scenario",
        Error::Parse(_) => "parse",
        Error::Io(_) => "io",
        _ if e.is_numerical() => "numerical",
        _ => "internal",
    };
    let payload = serde_json::json!({ "error": { "kind": kind, "message": e.to_string() } });
    eprintln!("{payload}");
    ExitCode::from(code)
}

fn error_code(e: &Error) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("WEYLAB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| Error::Scenario(format!("WEYLAB_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Scenario(e.to_string()))
}

fn print_summary(report: &ScenarioReport) {
    let status = if report.pass { "PASS" } else { "FAIL" };
    println!("{status} scenario {} [{}]", report.scenario_id, report.geometry);
    for c in &report.checks {
        println!("  {}", c.summary_line());
    }
}

fn finish(reports: &[ScenarioReport], dir: &Path, stem: &str, format: OutputFormat) -> ExitCode {
    for r in reports {
        print_summary(r);
    }
    match write_reports(dir, stem, reports, format) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => return fail(EXIT_USAGE, &e),
    }
    let checks = reports.iter().flat_map(|r| &r.checks);
    if checks.clone().any(|c| c.error.is_some()) {
        ExitCode::from(EXIT_NUMERICAL)
    } else if checks.clone().all(|c| c.pass) {
        ExitCode::from(EXIT_PASS)
    } else {
        ExitCode::from(EXIT_CHECK_FAILURE)
    }
}

fn options(args: &RunArgs) -> RunOptions {
    RunOptions { tol_scale: args.tol_scale, points: args.points, seed: args.seed }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return fail(EXIT_USAGE, &e);
    }
    match cli.command {
        Command::ListGeometries => {
            for (name, desc) in descriptions() {
                println!("{name:<12} {desc}");
            }
            println!();
            println!("checks:");
            for c in weylab::CheckName::ALL {
                println!("  {:<26} {}", c.as_str(), c.description());
            }
            ExitCode::from(EXIT_PASS)
        }
        Command::Run { scenario, args } => {
            let s = match Scenario::from_path(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(EXIT_USAGE, &e),
            };
            let report = match run_scenario(&s, &options(&args)) {
                Ok(r) => r,
                Err(e) => return fail(error_code(&e), &e),
            };
            let dir = args.out.clone().or_else(|| s.output.dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            finish(&[report], &dir, &s.id, args.format.unwrap_or(s.output.format))
        }
        Command::VerifyAll { args } => {
            let seed = args.seed.unwrap_or(0);
            let opts = RunOptions { seed: Some(seed), ..options(&args) };
            let mut reports = Vec::new();
            for s in acceptance_scenarios(seed) {
                match run_scenario(&s, &opts) {
                    Ok(r) => reports.push(r),
                    Err(e) => return fail(error_code(&e), &e),
                }
            }
            let dir = args.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            finish(&reports, &dir, "verify-all", args.format.unwrap_or_default())
        }
    }
}
