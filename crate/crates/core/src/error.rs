use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of range: {constraint} (got {value})")]
    ParamOutOfRange {
        constraint: &'static str,
        value: f64,
    },

    #[error("negative density {value} at node {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("negative sound speed {value} at node {index}")]
    NegativeSoundSpeed { index: usize, value: f64 },

    #[error("vacuum encountered at node {index} (value {value} below floor {floor})")]
    VacuumEncountered {
        index: usize,
        value: f64,
        floor: f64,
    },

    #[error("grid too coarse: {n} cells cannot support a derivative of order {order}")]
    GridTooCoarse { n: usize, order: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("window radius {radius} exceeds domain half-width {half_width}")]
    WindowExceedsDomain { radius: f64, half_width: f64 },

    #[error("tail exponent a = {a} outside admissible window {window}")]
    WindowViolation { a: f64, window: String },

    #[error("non-finite value in field `{field}` at node {index}")]
    NonFiniteState { field: &'static str, index: usize },

    #[error("singular tridiagonal system at row {row}")]
    SingularTridiagonal { row: usize },

    #[error("blow-up detected at t = {t}: max wave speed {max_speed}")]
    BlowupDetected { t: f64, max_speed: f64 },

    #[error(
        "Picard iteration did not converge after {iterations} iterations (residual {residual})"
    )]
    PicardNoConvergence { iterations: usize, residual: f64 },

    #[error("step failed at t = {t}: {source}")]
    StepFailed { t: f64, source: Box<Error> },

    #[error("Euler reference run failed ({0}); try a shorter t_end")]
    EulerBlowup(Box<Error>),

    #[error("check is vacuous: {0}")]
    DegenerateCheck(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// The innermost error, looking through step/time wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::StepFailed { source, .. } => source.root(),
            Error::EulerBlowup(inner) => inner.root(),
            other => other,
        }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(
            self.root(),
            Error::BlowupDetected { .. } | Error::NonFiniteState { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
