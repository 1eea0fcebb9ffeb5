use std::fmt;

use thiserror::Error;

/// Which structural assumption of the intercept/no-intercept transfer failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Premise {
    /// `cᵀf(x) = 1` does not hold on the non-origin support.
    Hyperplane,
    /// The origin is not a support point of the intercept design.
    OriginInSupport,
    /// The intercept and no-intercept intensities differ (`u ≠ ũ`).
    IntensityMatch,
    /// The weighted no-intercept regressor does not vanish at the origin.
    VanishesAtOrigin,
    /// The model must carry an intercept for this operation.
    InterceptModel,
    /// The origin must lie in the experimental region.
    OriginInRegion,
}

impl fmt::Display for Premise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Premise::Hyperplane => "hyperplane c'f(x)=1 on the non-origin support",
            Premise::OriginInSupport => "origin in the design support",
            Premise::IntensityMatch => "intercept and no-intercept intensities coincide",
            Premise::VanishesAtOrigin => "weighted regressor vanishes at the origin",
            Premise::InterceptModel => "model with intercept",
            Premise::OriginInRegion => "origin inside the experimental region",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("design has no support points")]
    EmptyDesign,
    #[error("support point {0} lies outside the experimental region")]
    PointOutsideRegion(usize),
    #[error("support point {0} has a non-positive or non-finite weight")]
    NonpositiveWeight(usize),
    #[error("origin is not a support point")]
    OriginNotInSupport,
    #[error("design is supported on the origin only")]
    OnlyOriginSupported,
    #[error("origin weight {0} is outside (0, 1)")]
    WeightOutOfRange(f64),
    #[error("origin is already a support point")]
    OriginAlreadyPresent,
    #[error("grid resolution {0} is below the minimum of 2")]
    ResolutionTooSmall(usize),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("wrong dimension: expected {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("nonlinear family has no GLM regression vector or intensity")]
    NonlinearFamily,
    #[error("nonlinear parameter makes the gradient singular at x = {0}")]
    SingularNonlinearParam(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("information matrix is singular (condition number {condition:.3e})")]
    SingularInformation { condition: f64 },
    #[error("premise violated: {0}")]
    PremiseViolated(Premise),
    #[error("input must be positive: {0}")]
    NonpositiveInput(&'static str),
    #[error("design has no support points besides the origin")]
    NoNonOriginPoints,
    #[error("design is not in the origin-plus-hyperplane class (residual {residual:.3e})")]
    NotInXi0 { residual: f64 },
    #[error("origin weight {actual} differs from the required {expected}")]
    WrongOriginWeight { expected: f64, actual: f64 },
    #[error("T1 is negative (min {min:.6e} at {argmin:?})")]
    T1Negative { min: f64, argmin: Vec<f64> },
    #[error("input design is not locally optimal (max sensitivity excess {max_excess:.6e})")]
    NotOptimalInput { max_excess: f64 },
    #[error("transfer condition violated (margin {margin:.6e} at {argmin:?})")]
    ConditionViolated { margin: f64, argmin: Vec<f64> },
    #[error("candidate points do not support a nonsingular information matrix")]
    SingularCandidates,
    #[error("no convergence after {iterations} iterations (max excess {max_excess:.6e})")]
    NoConvergence { max_excess: f64, iterations: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
