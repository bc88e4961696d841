use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sl_lab::coefficients::BUILTIN_NAMES;
use sl_lab::harness::{
    self, any_failed, findings_from_report_json, format_findings, parse_stages, HarnessError, ProblemSource, RunConfig,
    Stage,
};

/// Limit-point / limit-circle laboratory for half-line Sturm–Liouville operators.
#[derive(Parser)]
#[command(name = "sl-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the requested stages (default: all) and write a consolidated report.
    Run(RunArgs),
    /// Local integrability and positivity checks.
    Validate(CommonArgs),
    /// Integral and growth criteria.
    Criteria(CommonArgs),
    /// Semiboundedness probe via Dirichlet truncations.
    Semibound(CommonArgs),
    /// Zero / conjugate point counts on a λ grid.
    Oscillate(CommonArgs),
    /// Count L² solutions at nonreal z.
    Classify(CommonArgs),
    /// Cutoff identity and inequality data (needs the semibound stage).
    Replay(CommonArgs),
    /// Consistency checks across all builtins, or on a saved report.
    Suite(SuiteArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Builtin problem name.
    #[arg(long, conflicts_with = "config")]
    problem: Option<String>,
    /// TOML problem file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Report path (JSON); CSV sidecars are written next to it.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long)]
    rho_max: Option<f64>,
    #[arg(long)]
    d_max: Option<f64>,
    /// Spectral parameter for classification, `RE,IM`.
    #[arg(long, value_name = "RE,IM", allow_hyphen_values = true)]
    z: Option<String>,
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
    /// λ grid for the oscillation stage, comma separated.
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    lambdas: Option<String>,
    /// Leave out timestamps and timings.
    #[arg(long)]
    reproducible: bool,
    /// Analyse the left half-line of a file problem by reflection.
    #[arg(long)]
    reflect: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `all` or a comma-separated list of validate,criteria,semibound,oscillate,classify,replay.
    #[arg(long, default_value = "all")]
    stages: String,
}

#[derive(Args)]
struct SuiteArgs {
    /// Re-check a saved report instead of running the builtins.
    #[arg(long, value_name = "PATH", conflicts_with = "problem")]
    report: Option<PathBuf>,
    /// Restrict the builtin sweep (repeatable).
    #[arg(long)]
    problem: Vec<String>,
    /// Write all reports as one JSON array.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long)]
    rho_max: Option<f64>,
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    reproducible: bool,
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, HarnessError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::Invalid(format!("{what}: cannot parse {t:?} as a number")))
        })
        .collect()
}

fn build_config(a: &CommonArgs, stages: Vec<Stage>) -> Result<RunConfig, HarnessError> {
    let source = match (&a.problem, &a.config) {
        (Some(n), None) => ProblemSource::Builtin(n.clone()),
        (None, Some(p)) => ProblemSource::File(p.clone()),
        _ => {
            return Err(HarnessError::Invalid(format!(
                "give --problem NAME ({}) or --config PATH",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    let mut cfg = RunConfig::new(source).with_stages(&stages);
    cfg.rho_max = a.rho_max;
    cfg.d_max = a.d_max;
    cfg.tol = a.tol;
    cfg.reproducible = a.reproducible;
    cfg.reflect = a.reflect;
    cfg.out = a.out.clone();
    if let Some(z) = &a.z {
        let v = parse_list(z, "--z")?;
        if v.len() != 2 {
            return Err(HarnessError::Invalid(format!("--z expects RE,IM, got {z:?}")));
        }
        cfg.z = [v[0], v[1]];
    }
    if let Some(l) = &a.lambdas {
        cfg.lambdas = parse_list(l, "--lambdas")?;
    }
    Ok(cfg)
}

fn run_one(cfg: &RunConfig) -> Result<bool, HarnessError> {
    let mut report = harness::run(cfg)?;
    match &cfg.out {
        Some(out) => {
            harness::write_outputs(&mut report, out)?;
            println!("report written to {}", out.display());
            for s in &report.sidecars {
                println!("  sidecar {s}");
            }
            print!("{}", format_findings(&report.consistency));
        }
        None => {
            print!("{}", report.to_json()?);
            eprint!("{}", format_findings(&report.consistency));
        }
    }
    for s in &report.failed_stages {
        eprintln!("stage failed: {s}");
    }
    Ok(report.consistency_failed)
}

fn suite(a: &SuiteArgs) -> Result<bool, HarnessError> {
    if let Some(path) = &a.report {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let findings = findings_from_report_json(&text)?;
        print!("{}", format_findings(&findings));
        return Ok(any_failed(&findings));
    }
    let names: Vec<String> = if a.problem.is_empty() {
        BUILTIN_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        a.problem.clone()
    };
    let mut failed = false;
    let mut reports = Vec::new();
    for name in &names {
        let mut cfg = RunConfig::builtin(name);
        cfg.rho_max = a.rho_max;
        cfg.d_max = a.d_max;
        cfg.reproducible = a.reproducible;
        let r = harness::run(&cfg)?;
        println!("== {name}");
        print!("{}", format_findings(&r.consistency));
        failed |= r.consistency_failed;
        reports.push(r);
    }
    if let Some(out) = &a.out {
        let text = serde_json::to_string_pretty(&reports)? + "\n";
        harness::write_atomic(out, text.as_bytes())?;
    }
    Ok(failed)
}

fn single(a: &CommonArgs, stage: Stage) -> Result<bool, HarnessError> {
    run_one(&build_config(a, vec![stage])?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => parse_stages(&a.stages).and_then(|st| build_config(&a.common, st)).and_then(|c| run_one(&c)),
        Command::Validate(a) => single(a, Stage::Validate),
        Command::Criteria(a) => single(a, Stage::Criteria),
        Command::Semibound(a) => single(a, Stage::Semibound),
        Command::Oscillate(a) => single(a, Stage::Oscillate),
        Command::Classify(a) => single(a, Stage::Classify),
        Command::Replay(a) => single(a, Stage::Replay),
        Command::Suite(a) => suite(a),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("consistency check failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
