//! Error classification with stable exit codes and one-line machine-parsable
//! diagnostics.

use std::fmt;

/// Exit codes are part of the CLI contract:
/// 1 runtime, 2 schema/config violation, 3 hash mismatch, 4 missing artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Runtime,
    Schema,
    HashMismatch,
    MissingArtifact,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Runtime => 1,
            ErrorKind::Schema => 2,
            ErrorKind::HashMismatch => 3,
            ErrorKind::MissingArtifact => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::Runtime => "runtime",
            ErrorKind::Schema => "schema_violation",
            ErrorKind::HashMismatch => "hash_mismatch",
            ErrorKind::MissingArtifact => "missing_artifact",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub detail: String,
}

impl CliError {
    pub fn schema(detail: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Schema, detail: detail.into() }
    }

    pub fn missing(detail: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::MissingArtifact, detail: detail.into() }
    }

    pub fn runtime(detail: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Runtime, detail: detail.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "modprior: code={} kind={} detail={:?}",
            self.kind.exit_code(),
            self.kind.label(),
            self.detail
        )
    }
}

impl From<modprior::Error> for CliError {
    fn from(e: modprior::Error) -> Self {
        let kind = match &e {
            modprior::Error::ProvenanceMismatch(_) => ErrorKind::HashMismatch,
            modprior::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                ErrorKind::MissingArtifact
            }
            modprior::Error::Json(_) => ErrorKind::Schema,
            _ => ErrorKind::Runtime,
        };
        CliError { kind, detail: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        let kind = if e.kind() == std::io::ErrorKind::NotFound {
            ErrorKind::MissingArtifact
        } else {
            ErrorKind::Runtime
        };
        CliError { kind, detail: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::schema(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Open a required input, mapping absence to the missing-artifact code.
pub fn require_file(path: &std::path::Path) -> CliResult<()> {
    if !path.exists() {
        return Err(CliError::missing(format!("required input {} does not exist", path.display())));
    }
    Ok(())
}
