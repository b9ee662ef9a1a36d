use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// Every variant belongs to one module; [`Error::module`] and [`Error::code`]
/// feed the structured `ERROR <module> <code> <detail>` lines of the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("homogeneous coordinates are all zero")]
    ZeroVector,
    #[error("point lies in the projection center")]
    PointInCenter,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("center and target subspaces intersect")]
    SubspacesIntersect,

    #[error("map is degenerate: near-common zero at {witness:?} (min ratio {ratio:.3e})")]
    DegenerateMap { witness: Vec<(f64, f64)>, ratio: f64 },
    #[error("homotopy path failed: {0}")]
    SolverFailure(String),
    #[error("target is a critical value: {0}")]
    CriticalValue(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("center lies on the curve")]
    CenterOnCurve,

    #[error("subspace has wrong dimension for a line current: {0}")]
    WrongDimension(usize),
    #[error("refinement budget of {0} nodes exceeded")]
    RefinementBudgetExceeded(usize),
    #[error("theta {0} outside the disc domain")]
    ThetaOutOfDomain(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("trapping violated at {witness:?}: u(f(x)) = {value:.3e}")]
    TrappingViolated { witness: Vec<(f64, f64)>, value: f64 },
    #[error("fiber section not star-shaped over {base:?}: section along ray angle {angle:.4} is not an interval from 0 at t = {t:.4}")]
    NotStarShaped { base: Vec<(f64, f64)>, angle: f64, t: f64 },
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("region definition: {0}")]
    Region(String),

    #[error("resultant overflow: {0}")]
    ResultantOverflow(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("curves share a common component")]
    CommonComponent,

    #[error("io: {0}")]
    Io(String),
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn module(&self) -> &'static str {
        use Error::*;
        match self {
            ZeroVector | PointInCenter | DimensionMismatch { .. } | SubspacesIntersect => {
                "projective"
            }
            DegenerateMap { .. } | SolverFailure(_) | CriticalValue(_) | Parse { .. } => {
                "endomorphism"
            }
            CenterOnCurve => "green",
            WrongDimension(_)
            | RefinementBudgetExceeded(_)
            | ThetaOutOfDomain(_)
            | DegenerateFit(_) => "currents",
            TrappingViolated { .. } | NotStarShaped { .. } | NonConvergence(_) | Region(_) => "attractor",
            ResultantOverflow(_) | PrecisionExhausted(_) | CommonComponent => "algebraic",
            Io(_) | Config(_) => "cli",
        }
    }

    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            ZeroVector => "ZeroVector",
            PointInCenter => "PointInCenter",
            DimensionMismatch { .. } => "DimensionMismatch",
            SubspacesIntersect => "SubspacesIntersect",
            DegenerateMap { .. } => "DegenerateMap",
            SolverFailure(_) => "SolverFailure",
            CriticalValue(_) => "CriticalValue",
            Parse { .. } => "Parse",
            CenterOnCurve => "CenterOnCurve",
            WrongDimension(_) => "WrongDimension",
            RefinementBudgetExceeded(_) => "RefinementBudgetExceeded",
            ThetaOutOfDomain(_) => "ThetaOutOfDomain",
            DegenerateFit(_) => "DegenerateFit",
            TrappingViolated { .. } => "TrappingViolated",
            NotStarShaped { .. } => "NotStarShaped",
            NonConvergence(_) => "NonConvergence",
            Region(_) => "Region",
            ResultantOverflow(_) => "ResultantOverflow",
            PrecisionExhausted(_) => "PrecisionExhausted",
            CommonComponent => "CommonComponent",
            Io(_) => "Io",
            Config(_) => "Config",
        }
    }

    /// Hypothesis failures (trapping, star shape) map to exit code 2,
    /// everything else numerical to 3.
    pub fn is_hypothesis_failure(&self) -> bool {
        matches!(self, Error::TrappingViolated { .. } | Error::NotStarShaped { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
