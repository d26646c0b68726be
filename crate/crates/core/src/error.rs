use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field is in {found} space, expected {expected}")]
    WrongSpace { expected: &'static str, found: &'static str },

    #[error("domain truncation: boundary magnitude {boundary_magnitude:.3e} exceeds {tolerance:.1e}")]
    DomainTruncation { boundary_magnitude: f64, tolerance: f64 },

    #[error("fixed-point map is not contracting (T1 too small?): expansion factor {expansion_factor:.3} at T1 = {t1}")]
    NonContraction { expansion_factor: f64, t1: f64 },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last update {last_update:.3e})")]
    NoConvergence { iterations: usize, last_update: f64 },

    #[error("s_max too small: tail error bound {bound:.3e} exceeds {tolerance:.1e}")]
    TailTooLarge { bound: f64, tolerance: f64 },

    #[error("map is not invertible at t = {t}: {detail}")]
    NotInvertible { t: f64, detail: String },

    #[error("point x = {x} at t = {t} lies outside the momentum window |x/t| <= {window}")]
    OutOfWindow { t: f64, x: f64, window: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("blow-up detected at t = {t}")]
    BlowUp { t: f64 },

    #[error("domain escape at t = {t}: boundary mass {boundary_mass:.3e}")]
    DomainEscape { t: f64, boundary_mass: f64 },

    #[error("insufficient data: {got} points in fit window, need {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
