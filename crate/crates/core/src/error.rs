use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("orbit access at index {requested} exceeds the symbol window horizon {horizon}")]
    HorizonExceeded { requested: i64, horizon: usize },

    #[error("matrix is numerically singular (|det| = {det:e})")]
    SingularValue { det: f64 },

    #[error("perturbed cocycle is singular at t = {t:e} (|det| = {det:e})")]
    SingularPerturbation { t: f64, det: f64 },

    #[error("no spectral gap: {0}")]
    NoGap(String),

    #[error("points too far apart for the bracket: d = {distance} > tau = {tau}")]
    PointsTooFar { distance: f64, tau: f64 },

    #[error("base system and point kinds do not match")]
    KindMismatch,

    #[error("invalid base system: {0}")]
    InvalidSystem(String),

    #[error("invalid cocycle: {0}")]
    InvalidCocycle(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    CheckFailed(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
