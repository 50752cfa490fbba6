use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires a single-mode space, got {0} modes")]
    NotSingleMode(usize),

    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{what} did not converge: {diagnostics}")]
    Convergence { what: String, diagnostics: String },

    #[error(
        "Fock truncation leakage {leakage:.3e} at t = {time:.3} exceeds {threshold:.1e} \
         (cutoff {cutoff}); rerun with cutoff >= {suggested_cutoff}"
    )]
    Leakage {
        leakage: f64,
        threshold: f64,
        time: f64,
        cutoff: usize,
        suggested_cutoff: usize,
    },

    #[error("integration step size underflow at t = {time:.6} (h = {step:.3e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("steady state is not unique: {0}")]
    Degenerate(String),

    #[error("missing configuration orbit {0}")]
    MissingOrbit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn convergence(what: impl Into<String>, diagnostics: impl Into<String>) -> Self {
        Error::Convergence {
            what: what.into(),
            diagnostics: diagnostics.into(),
        }
    }
}
