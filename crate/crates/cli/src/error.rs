use std::io;
use std::path::PathBuf;

use fairtopk_core::Error as CoreError;
use serde::Serialize;

pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const PARTIAL: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    /// Malformed input file; `at` names the file and position.
    #[error("{at}: {message}")]
    Input { at: String, message: String },

    #[error(transparent)]
    Solve(#[from] CoreError),

    #[error("{failed} of {total} points failed")]
    Partial { failed: usize, total: usize },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input { .. } => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Solve(e) => core_exit_code(e),
            CliError::Partial { .. } => exit::PARTIAL,
        }
    }

    /// Machine readable form written next to failed solves.
    pub fn report(&self) -> ErrorReport {
        let (kind, family) = match self {
            CliError::Usage(_) => ("usage", None),
            CliError::Io { .. } => ("io", None),
            CliError::Input { .. } => ("input", None),
            CliError::Solve(e) => (core_kind(e), infeasible_family(e)),
            CliError::Partial { .. } => ("partial", None),
        };
        ErrorReport { status: "error", kind, family, message: self.to_string(), exit_code: self.exit_code() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub status: &'static str,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<fairtopk_core::program::Family>,
    pub message: String,
    pub exit_code: i32,
}

pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Infeasible(_) => exit::INFEASIBLE,
        CoreError::Numerical(_) | CoreError::Unbounded | CoreError::NoSolution { .. } => exit::NUMERICAL,
        CoreError::InvalidInput(_)
        | CoreError::Dimension(_)
        | CoreError::OutOfRange { .. }
        | CoreError::TooLarge { .. } => exit::USAGE,
    }
}

/// Short tag used in CSV error columns.
pub fn core_kind(e: &CoreError) -> &'static str {
    match e {
        CoreError::Infeasible(_) => "infeasible",
        CoreError::Numerical(_) => "numerical",
        CoreError::Unbounded => "unbounded",
        CoreError::NoSolution { .. } => "no_solution",
        CoreError::InvalidInput(_) => "invalid_input",
        CoreError::Dimension(_) => "dimension",
        CoreError::OutOfRange { .. } => "out_of_range",
        CoreError::TooLarge { .. } => "too_large",
    }
}

fn infeasible_family(e: &CoreError) -> Option<fairtopk_core::program::Family> {
    match e {
        CoreError::Infeasible(f) => Some(*f),
        _ => None,
    }
}

/// `kind` plus the violated family for infeasibility, e.g. `infeasible:gmv`.
pub fn error_tag(e: &CoreError) -> String {
    match e {
        CoreError::Infeasible(f) => format!(
            "infeasible:{}",
            serde_json::to_value(f).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
        ),
        other => core_kind(other).to_string(),
    }
}
