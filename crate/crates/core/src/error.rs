use thiserror::Error;

/// Errors raised by the geometry, form, certifier and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate parametrization at q = ({q1}, {q2}): |p_1 x p_2| = {cross:e}")]
    DegenerateParametrization { q1: f64, q2: f64, cross: f64 },

    #[error("quadrature did not converge: last two refinements differ by {delta:e} (tolerance {tol:e})")]
    QuadratureDivergence { delta: f64, tol: f64 },

    #[error("invalid layer thickness: a = {half_width} is not below rho_m = {rho_m}")]
    InvalidThickness { half_width: f64, rho_m: f64 },

    #[error("layer metric degenerates at q = ({q1}, {q2}), u = {u}: 1 - 2Mu + Ku^2 = {factor:e}")]
    MetricDegenerate { q1: f64, q2: f64, u: f64, factor: f64 },

    #[error("metric derivatives unavailable: {0}")]
    DerivativeUnavailable(String),

    #[error("trial function violates the Dirichlet condition at u = +-a (|psi| = {trace:e})")]
    NonAdmissibleTrial { trace: f64 },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("grid too coarse: spacing {spacing} exceeds {limit} inside the deformation")]
    GridTooCoarse { spacing: f64, limit: f64 },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("shift {shift} is not below the spectrum (shifted operator is indefinite)")]
    ShiftAboveSpectrum { shift: f64 },

    #[error("unknown surface family `{0}`")]
    UnknownSurface(String),

    #[error("bad surface parameters: {0}")]
    BadParams(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error in `{field}`: {constraint}")]
    Validation { field: String, constraint: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag used in reports and exit codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateParametrization { .. } => "DegenerateParametrization",
            Error::QuadratureDivergence { .. } => "QuadratureDivergence",
            Error::InvalidThickness { .. } => "InvalidThickness",
            Error::MetricDegenerate { .. } => "MetricDegenerate",
            Error::DerivativeUnavailable(_) => "DerivativeUnavailable",
            Error::NonAdmissibleTrial { .. } => "NonAdmissibleTrial",
            Error::Domain(_) => "DomainError",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::NoConvergence(_) => "NoConvergence",
            Error::ShiftAboveSpectrum { .. } => "ShiftAboveSpectrum",
            Error::UnknownSurface(_) => "UnknownSurface",
            Error::BadParams(_) => "BadParams",
            Error::Parse(_) => "ParseError",
            Error::Validation { .. } => "ValidationError",
            Error::Io(_) => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
