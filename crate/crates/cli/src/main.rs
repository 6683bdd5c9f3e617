//! `qlayer <command> --config <path> [--output <path>] [--format json|csv]`
//!
//! Exit codes: 0 success, 2 usage, 3 NOT_CERTIFIED, 4 configuration,
//! 5 numerical failure, 6 i/o, 7 eigensolver and certificate disagree.
//! Every non-zero exit prints a one-line JSON cause on stderr.

use clap::{Parser, ValueEnum};
use qlayer::config::{load_config, OutputFormat};
use qlayer::report::{ErrorReport, Report, RunStatus, Table, ERROR_SCHEMA};
use qlayer::run::{configure_threads, run_command, Command};
use qlayer::Error;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const THREADS_VAR: &str = "QLAYER_THREADS";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Geometry summary: rho_m, C+-, total curvature, curvature extremes and profile.
    Curvature,
    /// Pointwise, transverse and mollifier identity suites.
    CheckIdentities,
    /// Variational bound-state certificate with its sigma sweep.
    Certify,
    /// Discrete spectrum, Neumann/Dirichlet bracketing and convergence study.
    Solve,
    /// Everything, plus the eigensolver/certificate consistency check.
    Full,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Curvature => Command::Curvature,
            Cmd::CheckIdentities => Command::CheckIdentities,
            Cmd::Certify => Command::Certify,
            Cmd::Solve => Command::Solve,
            Cmd::Full => Command::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "qlayer", version, about = "Bound states of curved quantum layers")]
struct Cli {
    command: Cmd,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Report destination; overrides `output.path`. Standard output otherwise.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_)
        | Error::Validation { .. }
        | Error::UnknownSurface(_)
        | Error::BadParams(_)
        | Error::InvalidThickness { .. } => 4,
        Error::Io(_) => 6,
        _ => 5,
    }
}

fn threads_from_env() -> Result<Option<usize>, Error> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Validation {
                field: THREADS_VAR.into(),
                constraint: format!("must be a positive integer, got `{s}`"),
            }),
        },
    }
}

fn write_table<W: Write>(w: W, t: &Table) -> Result<(), Error> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut out = csv::Writer::from_writer(w);
    out.write_record(&t.header).map_err(io)?;
    for r in &t.rows {
        out.write_record(r).map_err(io)?;
    }
    out.flush().map_err(|e| Error::Io(e.to_string()))
}

/// `<dir>/<stem>.<table>.csv` next to the main table.
fn sidecar(path: &Path, table: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{table}.csv"))
}

fn create(path: &Path) -> Result<std::fs::File, Error> {
    std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(report: &Report, path: Option<&Path>, format: OutputFormat) -> Result<(), Error> {
    match format {
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
            match path {
                Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
                None => {
                    println!("{text}");
                    Ok(())
                }
            }
        }
        OutputFormat::Csv => {
            let tables = report.tables();
            let Some(main) = tables.first() else {
                return Err(Error::Io("the report carries no table".into()));
            };
            match path {
                Some(p) => {
                    write_table(create(p)?, main)?;
                    for t in &tables[1..] {
                        write_table(create(&sidecar(p, t.name))?, t)?;
                    }
                    Ok(())
                }
                None => write_table(std::io::stdout().lock(), main),
            }
        }
    }
}

fn fail(command: Option<&str>, e: &Error) -> ExitCode {
    let doc = ErrorReport::new(command, e);
    eprintln!("{}", serde_json::to_string(&doc).unwrap_or_else(|_| e.to_string()));
    ExitCode::from(exit_code(e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = Command::from(cli.command);
    let name = Some(cmd.name());
    match threads_from_env() {
        Ok(t) => configure_threads(t),
        Err(e) => return fail(name, &e),
    }
    let validated = match load_config(&cli.config) {
        Ok(v) => v,
        Err(e) => return fail(name, &e),
    };
    let report = match run_command(cmd, &validated) {
        Ok(r) => r,
        Err(e) => return fail(name, &e),
    };
    let out = &validated.config.output;
    let path = cli.output.clone().or_else(|| out.path.as_ref().map(PathBuf::from));
    let format = match cli.format {
        Some(Format::Json) => OutputFormat::Json,
        Some(Format::Csv) => OutputFormat::Csv,
        None => out.format,
    };
    if let Err(e) = emit(&report, path.as_deref(), format) {
        return fail(name, &e);
    }
    let (code, cause) = match report.status {
        RunStatus::Ok => return ExitCode::SUCCESS,
        RunStatus::NotCertified => (3, "NOT_CERTIFIED"),
        RunStatus::Inconsistent => (7, "INCONSISTENT"),
    };
    eprintln!(
        "{}",
        serde_json::json!({ "schema": ERROR_SCHEMA, "command": cmd.name(), "error": cause, "message": "see report status" })
    );
    ExitCode::from(code)
}
