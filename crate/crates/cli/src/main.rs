//! `rollman`: run rolling experiments from JSON configs.
//!
//! Exit codes: 0 success, 1 computational failure (including failed
//! expectations), 2 configuration error.

mod commands;
mod config;
mod expect;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use commands::{Command, Outcome};
use config::{Loaded, Overrides};
use expect::CheckOutcome;

pub const TOOL: &str = "rollman";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Compute(#[from] rollman_core::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Compute(e) => e.code(),
            CliError::Io(_) => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    fn record(&self) -> Value {
        json!({ "code": self.code(), "message": self.to_string() })
    }
}

#[derive(Parser)]
#[command(name = "rollman", version, about = "Rolling of Riemannian manifolds: trajectories, brackets and controllability")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Debug)]
struct Flags {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for reports; the report goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's integration `step`.
    #[arg(long)]
    step: Option<f64>,
    /// Overrides the config's bracket `depth`.
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the rolling system under a control.
    Roll(Flags),
    /// Rank of the iterated brackets of the rolling distribution.
    Larc(Flags),
    /// Holonomy algebra of `M` at a point.
    Holonomy(Flags),
    /// Controllability of the no-spin system.
    NsCheck(Flags),
    /// Statistics of the rolling curvature over random states.
    RolScan(Flags),
    /// Lift/projection commutation for a dimension gap of one.
    Dimgap(Flags),
    /// Run a batch of experiments.
    Report(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Status {
    Ok,
    Failed,
    Error,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: &'a str,
    seed: Option<u64>,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<Value>,
    tolerances: Value,
    checks: Vec<CheckOutcome>,
    result: Value,
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

/// A finished experiment: status, report text and optional trajectory CSV.
struct Finished {
    status: Status,
    report: String,
    csv: Option<String>,
}

impl Finished {
    /// Writes `<stem>.json` (and `<stem>.csv`) under `dir`.
    fn write(&self, dir: &Path, stem: &str) -> Result<(), CliError> {
        write_atomic(&dir.join(format!("{stem}.json")), self.report.as_bytes())?;
        if let Some(csv) = &self.csv {
            write_atomic(&dir.join(format!("{stem}.csv")), csv.as_bytes())?;
        }
        Ok(())
    }
}

fn run_one(command: Command, loaded: &Loaded) -> Result<Finished, CliError> {
    let (status, outcome, error) = match commands::run(command, &loaded.config) {
        Ok(o) => {
            let status = if o.failure.is_some() { Status::Failed } else { Status::Ok };
            (status, o, None)
        }
        Err(e @ CliError::Config(_)) => return Err(e),
        Err(e) => (Status::Error, Outcome::default(), Some(e)),
    };
    let checks = if error.is_none() { expect::evaluate(&outcome.result, &loaded.config.expect) } else { vec![] };
    let status = if status == Status::Ok && checks.iter().any(|c| !c.pass) { Status::Failed } else { status };
    let envelope = Envelope {
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        config_hash: &loaded.hash,
        seed: outcome.seed.or(loaded.config.seed),
        status,
        failure: outcome.failure.clone(),
        error: error.as_ref().map(CliError::record),
        tolerances: outcome.tolerances.clone(),
        checks,
        result: outcome.result.clone(),
    };
    if let Some(e) = &error {
        eprintln!("{}", json!({ "error": e.record() }));
    }
    Ok(Finished { status, report: pretty(&envelope), csv: outcome.csv })
}

#[derive(Serialize)]
struct BatchLine {
    name: String,
    command: &'static str,
    config_hash: String,
    status: Status,
    failed_checks: Vec<String>,
}

fn expand_batch(loaded: &Loaded, overrides: &Overrides) -> Result<Vec<(String, Command, Loaded)>, CliError> {
    let entries = loaded.config.experiments.as_ref().ok_or_else(|| CliError::Config("`experiments` is required for report".into()))?;
    if entries.is_empty() {
        return Err(CliError::Config("`experiments` is empty".into()));
    }
    let mut jobs = vec![];
    for entry in entries {
        let command = Command::parse(&entry.command)?;
        if command == Command::Report {
            return Err(CliError::Config("batches cannot be nested".into()));
        }
        if entry.name.is_empty() || entry.name.contains(['/', '\\']) {
            return Err(CliError::Config(format!("invalid experiment name `{}`", entry.name)));
        }
        let (value, base) = match &entry.config {
            Value::String(rel) => {
                let path = loaded.base_dir.join(rel);
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (config::read_value(&path)?, base)
            }
            v @ Value::Object(_) => (v.clone(), loaded.base_dir.clone()),
            _ => return Err(CliError::Config(format!("experiment `{}`: config must be an object or a path", entry.name))),
        };
        let seeds: Vec<Option<u64>> = match &entry.seeds {
            Some(s) => s.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        for seed in seeds {
            let ov = Overrides { seed: seed.or(overrides.seed), ..*overrides };
            let name = match seed {
                Some(s) if entry.seeds.is_some() => format!("{}-s{s}", entry.name),
                _ => entry.name.clone(),
            };
            let job = config::load(value.clone(), &ov, base.clone()).map_err(|e| CliError::Config(format!("experiment `{name}`: {e}")))?;
            jobs.push((name, command, job));
        }
    }
    let mut names: Vec<&str> = jobs.iter().map(|j| j.0.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config("experiment names must be unique".into()));
    }
    Ok(jobs)
}

fn run_batch(loaded: &Loaded, overrides: &Overrides, out: Option<&Path>) -> Result<Status, CliError> {
    let jobs = expand_batch(loaded, overrides)?;
    let lines: Vec<BatchLine> = jobs
        .par_iter()
        .map(|(name, command, job)| {
            let done = run_one(*command, job)?;
            // without --out only the summary is printed
            if let Some(dir) = out {
                done.write(dir, name)?;
            }
            let report: Value = serde_json::from_str(&done.report).expect("own output parses");
            let failed_checks = report["checks"]
                .as_array()
                .map(|c| c.iter().filter(|c| c["pass"] == false).filter_map(|c| c["field"].as_str().map(String::from)).collect())
                .unwrap_or_default();
            Ok(BatchLine { name: name.clone(), command: command.name(), config_hash: job.hash.clone(), status: done.status, failed_checks })
        })
        .collect::<Result<_, CliError>>()?;
    let failed = lines.iter().filter(|l| l.status != Status::Ok).count();
    let status = if failed == 0 { Status::Ok } else { Status::Failed };
    let summary = json!({
        "tool": TOOL,
        "version": env!("CARGO_PKG_VERSION"),
        "command": Command::Report.name(),
        "config_hash": loaded.hash,
        "status": status,
        "passed": lines.len() - failed,
        "failed": failed,
        "experiments": lines,
    });
    let text = pretty(&summary);
    match out {
        Some(dir) => write_atomic(&dir.join("summary.json"), text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(status)
}

fn execute(command: Command, flags: &Flags) -> Result<Status, CliError> {
    let overrides = Overrides { seed: flags.seed, step: flags.step, depth: flags.depth };
    let value = config::read_value(&flags.config)?;
    let base = flags.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = config::load(value, &overrides, base)?;
    let out = flags.out.as_deref();
    if command == Command::Report {
        return run_batch(&loaded, &overrides, out);
    }
    if loaded.config.experiments.is_some() {
        return Err(CliError::Config("`experiments` is only valid for report".into()));
    }
    let done = run_one(command, &loaded)?;
    match out {
        Some(dir) => done.write(dir, command.name())?,
        None => print!("{}", done.report),
    }
    Ok(done.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Cmd::Roll(f) => (Command::Roll, f),
        Cmd::Larc(f) => (Command::Larc, f),
        Cmd::Holonomy(f) => (Command::Holonomy, f),
        Cmd::NsCheck(f) => (Command::NsCheck, f),
        Cmd::RolScan(f) => (Command::RolScan, f),
        Cmd::Dimgap(f) => (Command::Dimgap, f),
        Cmd::Report(f) => (Command::Report, f),
    };
    match execute(command, flags) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", json!({ "error": e.record() }));
            ExitCode::from(e.exit_code())
        }
    }
}
