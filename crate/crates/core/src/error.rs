use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed raster or kernel file. `offset` is the byte position where
    /// parsing stopped.
    #[error("{context}: {message} (at byte {offset})")]
    Format {
        context: String,
        offset: usize,
        message: String,
    },

    #[error("unsupported channel count {0}; only 1 (PGM) and 3 (PPM) can be written")]
    UnsupportedChannels(usize),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("kernel has even dimension {width}x{height}; both sides must be odd")]
    KernelShape { width: usize, height: usize },

    #[error("kernel is degenerate: {0}")]
    DegenerateKernel(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("division guard hit at {count} pixel(s): blurred estimate is not positive")]
    DivisionGuard { count: usize },

    #[error("non-positive denominator {value:e} at pixel ({x}, {y}, channel {channel}) with alpha = {alpha}")]
    Stability {
        x: usize,
        y: usize,
        channel: usize,
        value: f64,
        alpha: f64,
    },

    #[error("constrained descent produced non-positive value at iteration {iteration}; reduce tau (currently {tau})")]
    StepSize { iteration: usize, tau: f64 },

    #[error("iteration {iteration} produced a non-finite value")]
    Divergence { iteration: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable identifier used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::UnsupportedChannels(_) => "unsupported-channels",
            Error::InvalidImage(_) => "invalid-image",
            Error::KernelShape { .. } => "kernel-shape",
            Error::DegenerateKernel(_) => "degenerate-kernel",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::Domain(_) => "domain",
            Error::DivisionGuard { .. } => "division-guard",
            Error::Stability { .. } => "stability",
            Error::StepSize { .. } => "step-size",
            Error::Divergence { .. } => "divergence",
            Error::Config(_) => "config",
        }
    }

    /// True for errors that signal a numerically diverging or unstable run.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::Stability { .. }
                | Error::StepSize { .. }
                | Error::DivisionGuard { .. }
        )
    }
}
