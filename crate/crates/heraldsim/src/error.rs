use thiserror::Error;

/// Unified error type for the crate.
///
/// The CLI maps variants onto process exit codes: configuration problems
/// exit with 2, malformed data files with 3, and metrics that are
/// mathematically undefined for the requested inputs with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: {message}")]
    Stream {
        path: String,
        line: usize,
        message: String,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error(
        "inconsistent efficiency: conditional click probability {p_click:.6} exceeds the \
         Klyshko efficiency {klyshko:.6}"
    )]
    InconsistentEfficiency { p_click: f64, klyshko: f64 },

    #[error("degenerate joint spectrum: {0}")]
    DegenerateJsa(String),

    #[error("pattern space too large: {modes} modes (at most {max} supported)")]
    TooManyModes { modes: usize, max: usize },
}

impl Error {
    /// Exit code used by the command-line frontend.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::DegenerateJsa(_) | Error::TooManyModes { .. } => 2,
            Error::Io(_) | Error::Stream { .. } => 3,
            Error::UndefinedMetric(_) | Error::InconsistentEfficiency { .. } => 4,
        }
    }
}
