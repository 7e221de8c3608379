//! Command-line driver. Reports are JSON; exit codes are 0 (ok), 2 (bad
//! flags or config), 3 (I/O), 4 (a check failed).

pub mod args;
mod commands;
mod data;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::Path;

use clap::{CommandFactory, Parser};
use serde::Serialize;

use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

const SUBCOMMANDS: [&str; 7] = [
    "gen-data",
    "invariance-report",
    "procrustes-check",
    "train",
    "eval",
    "gradcheck",
    "ablation",
];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    CheckFailed(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
            CliError::Internal(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<wfa::Error> for CliError {
    fn from(e: wfa::Error) -> Self {
        use wfa::Error as E;
        match e {
            E::Io(_) | E::Parse { .. } | E::UnsupportedPly(_) => CliError::Io(e.to_string()),
            E::BadCount { .. }
            | E::BadIndex { .. }
            | E::BadRadius(_)
            | E::BadTolerance(_)
            | E::InvalidConfig(_)
            | E::TooFewPoints { .. }
            | E::ShapeMismatch(_) => CliError::Usage(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

pub(crate) fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match inject_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// Splices flags from the `--config` TOML file in right after the
/// subcommand name, so explicit flags that follow override them.
///
/// Top-level keys apply to every command that has such a flag; keys inside
/// a table named after the subcommand (e.g. `[train]`) apply to that command
/// only and must all be valid for it. `key = true` becomes `--key`, arrays
/// become comma-joined values, and underscores in keys become dashes.
fn inject_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut config_path: Option<OsString> = None;
    let mut sub_at: Option<usize> = None;
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if a == "--config" {
            config_path = argv.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.into());
        } else if sub_at.is_none() && SUBCOMMANDS.contains(&a.as_ref()) {
            sub_at = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(sub_at)) = (config_path, sub_at) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let sub = argv[sub_at].to_string_lossy().into_owned();

    // shared top-level keys only reach commands that have the flag
    let known: Vec<String> = Cli::command()
        .find_subcommand(&sub)
        .map(|c| c.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect())
        .unwrap_or_default();
    let mut injected = Vec::new();
    for (key, value) in &table {
        match value {
            toml::Value::Table(section) if *key == sub => {
                for (k, v) in section {
                    push_flag(&mut injected, k, v)?;
                }
            }
            toml::Value::Table(_) => {}
            v if known.contains(&key.replace('_', "-")) => push_flag(&mut injected, key, v)?,
            _ => {}
        }
    }
    let mut out = argv[..=sub_at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[sub_at + 1..]);
    Ok(out)
}

fn scalar(key: &str, v: &toml::Value) -> Result<String, CliError> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        _ => Err(CliError::Usage(format!("config key {key:?}: unsupported value {v}"))),
    }
}

fn push_flag(out: &mut Vec<OsString>, key: &str, v: &toml::Value) -> Result<(), CliError> {
    let flag = format!("--{}", key.replace('_', "-"));
    match v {
        toml::Value::Boolean(true) => out.push(flag.into()),
        toml::Value::Boolean(false) => {}
        toml::Value::Array(items) => {
            let parts = items.iter().map(|i| scalar(key, i)).collect::<Result<Vec<_>, _>>()?;
            out.push(format!("{flag}={}", parts.join(",")).into());
        }
        other => out.push(format!("{flag}={}", scalar(key, other)?).into()),
    }
    Ok(())
}

/// Report wrapper: tool identity, the resolved flags, then the result.
#[derive(Serialize)]
pub(crate) struct Envelope<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a C,
    pub result: &'a R,
}

/// Writes the report to `out` (and a summary table to standard output), or
/// the JSON to standard output when `out` is absent.
pub(crate) fn emit<C: Serialize, R: Serialize>(
    command: &Command,
    config: &C,
    result: &R,
    out: Option<&Path>,
    table: impl FnOnce() -> String,
) -> Result<(), CliError> {
    let env = Envelope {
        tool: "wfa",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        config,
        result,
    };
    let mut json = serde_json::to_string_pretty(&env).map_err(|e| CliError::Internal(e.to_string()))?;
    json.push('\n');
    match out {
        Some(path) => {
            fs::write(path, json).map_err(|e| io_err(path, e))?;
            print!("{}", table());
        }
        None => print!("{json}"),
    }
    Ok(())
}
