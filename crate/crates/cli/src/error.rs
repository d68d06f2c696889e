use std::fmt;
use std::path::{Path, PathBuf};

/// Failure of a CLI command; rendered as `error[<category>]: <message>`.
#[derive(Debug)]
pub enum CliError {
    Core(mdh_core::Error),
    Parse {
        path: PathBuf,
        line: u64,
        column: Option<u64>,
        message: String,
    },
    Io {
        path: Option<PathBuf>,
        source: std::io::Error,
    },
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: Some(path.to_path_buf()),
            source,
        }
    }

    pub fn csv(path: &Path, err: csv::Error) -> Self {
        let line = err.position().map_or(0, csv::Position::line);
        match err.into_kind() {
            csv::ErrorKind::Io(source) => CliError::io(path, source),
            other => CliError::Parse {
                path: path.to_path_buf(),
                line,
                column: None,
                message: format!("{other:?}"),
            },
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Parse { .. } => "parse",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Parse {
                path,
                line,
                column: Some(c),
                message,
            } => write!(f, "{}: line {line}, column {c}: {message}", path.display()),
            CliError::Parse {
                path, line, message, ..
            } => write!(f, "{}: line {line}: {message}", path.display()),
            CliError::Io { path: Some(p), source } => write!(f, "{}: {source}", p.display()),
            CliError::Io { path: None, source } => write!(f, "{source}"),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl From<mdh_core::Error> for CliError {
    fn from(e: mdh_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(source: std::io::Error) -> Self {
        CliError::Io { path: None, source }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}
