use thiserror::Error;

use crate::geodesic::GeodesicPath;

/// Errors raised by the geometry engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the domain of chart `{chart}`")]
    OutOfDomain { chart: String, point: Vec<f64> },

    #[error("metric of chart `{chart}` is not positive definite at {point:?} (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { chart: String, point: Vec<f64>, min_eig: f64 },

    #[error("finite-difference stencil around {point:?} leaves the domain of chart `{chart}`")]
    StencilOutsideDomain { chart: String, point: Vec<f64> },

    #[error("trajectory left the chart domain at t = {t}")]
    LeftDomain { t: f64, partial: Box<GeodesicPath> },

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("no shooting start converged ({detail})")]
    NoConvergence { detail: String },

    #[error("graph oracle distance {oracle} disagrees with shooting distance {shooting}")]
    OracleMismatch { oracle: f64, shooting: f64 },

    #[error("parameter {value} outside the valid range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("initial derivative is not orthogonal to the geodesic (inner product {inner:e})")]
    NotOrthogonal { inner: f64 },

    #[error("radius {radius} is not below the injectivity estimate {injectivity}")]
    RadiusBeyondInjectivity { radius: f64, injectivity: f64 },

    #[error("work budget exhausted: {what}")]
    BudgetExceeded { what: String },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Whether the failure is numerical (as opposed to a problem with the inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::LeftDomain { .. }
                | Error::NonFiniteState { .. }
                | Error::NoConvergence { .. }
                | Error::OracleMismatch { .. }
                | Error::BudgetExceeded { .. }
                | Error::StencilOutsideDomain { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
