//! Error taxonomy of the command-line tool.
//!
//! Every failure is either a *validation* error (the invocation itself is
//! unacceptable: contradictory flags, out-of-range values) or a *runtime*
//! error (the invocation was fine but the work failed: unreadable files,
//! malformed inputs, diverging training). Validation errors exit with code
//! 2, runtime errors with code 1, and both print a single machine-readable
//! JSON object to stderr.

use std::fmt::Display;

#[derive(Debug)]
pub enum CliError {
    /// The command line itself is invalid; exit code 2.
    Validation(String),
    /// The requested work could not be completed; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Runtime(_) => "runtime",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }

    /// Prints the error as one JSON line on stderr.
    pub fn emit(&self) {
        let payload = serde_json::json!({
            "error": { "kind": self.kind(), "message": self.message() }
        });
        eprintln!("{payload}");
    }
}

/// Prints one line to stdout, ignoring write failures: stdout is
/// informational (outputs live in files), and a reader closing the pipe
/// early must not crash the tool.
pub fn print_line(text: impl Display) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{text}");
}

/// Wraps any displayable error as a validation failure.
pub fn validation(err: impl Display) -> CliError {
    CliError::Validation(err.to_string())
}

/// Wraps any displayable error as a runtime failure.
pub fn runtime(err: impl Display) -> CliError {
    CliError::Runtime(err.to_string())
}

/// Runtime failure with the offending path prepended.
pub fn runtime_at(path: impl Display, err: impl Display) -> CliError {
    CliError::Runtime(format!("{path}: {err}"))
}
