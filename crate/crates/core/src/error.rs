//! Error type shared across the crate.

/// Crate-wide error enum. Numerical routines return `Domain`/`Range` style
/// variants instead of panicking so the CLI can map them to exit codes.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported order: {0}")]
    UnsupportedOrder(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("projection needs a positive quadratic form, got {0}")]
    NonpositiveForm(f64),
    #[error("degenerate initial iterate: {0}")]
    DegenerateInit(String),
    #[error("window error: {0}")]
    Window(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
