use std::path::PathBuf;

/// Every failure the library can report. CLI exit codes are derived from the
/// variant (see [`Error::exit_code`]).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate signal: no horizontal earth-rate component to extract a heading from")]
    DegenerateSignal,
    #[error("window covers zero samples")]
    EmptyWindow,
    #[error("window of {window_s} s exceeds sequence duration of {duration_s} s")]
    WindowTooLong { window_s: f64, duration_s: f64 },
    #[error("degenerate sequence: channel {channel} has standard deviation {std:e}")]
    DegenerateSequence { channel: usize, std: f64 },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("sequence has no heading label")]
    MissingLabel,
    #[error("rate mismatch: {source_hz} Hz is not an integer multiple of {target_hz} Hz")]
    RateMismatch { source_hz: f64, target_hz: f64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("config error in `{field}`{}: {message}", at_line(.line))]
    Config {
        field: String,
        line: Option<usize>,
        message: String,
    },
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },
    #[error("checksum mismatch in {0}")]
    Checksum(PathBuf),
    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(PathBuf),
    #[error("format error in {file}, line {line}: {message}")]
    Format {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn at_line(line: &Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            line: None,
            message: message.into(),
        }
    }

    pub fn shape(message: impl Into<String>) -> Self {
        Error::Shape(message.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end. Zero is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Config { .. } => 3,
            Error::Format { .. } => 4,
            Error::MissingArtifact(_) | Error::MissingCheckpoint(_) => 5,
            Error::Checksum(_) => 6,
            Error::Divergence { .. } => 7,
            Error::Shape(_) | Error::RateMismatch { .. } => 8,
            Error::DegenerateSignal
            | Error::DegenerateSequence { .. }
            | Error::EmptyWindow
            | Error::WindowTooLong { .. }
            | Error::MissingLabel
            | Error::EmptyBatch => 9,
        }
    }
}
