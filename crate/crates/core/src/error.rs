use thiserror::Error;

/// Failures raised anywhere in the linearization pipeline.
///
/// Variants fall into two families: violated mathematical hypotheses (the
/// system is outside the regime where the bounds hold) and plain I/O or
/// input errors. [`Error::exit_code`] maps them to process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("zero vector: {0}")]
    ZeroVector(String),

    #[error("dense eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("system is not dissipative: Re(lambda_1) = {re_lambda1}")]
    NonDissipative { re_lambda1: f64 },

    #[error("Reynolds-type number R = {r} is not below 1")]
    RNotBelowOne { r: f64 },

    #[error("quadratic part vanishes; characteristic quadratic is degenerate")]
    DegenerateQuadratic,

    #[error("characteristic quadratic has complex roots (discriminant {discriminant})")]
    ComplexRoots { discriminant: f64 },

    #[error("system is not rescaled: ||u_in|| = {u_in_norm} must be below 1")]
    NotRescaled { u_in_norm: f64 },

    #[error("forcing is nonzero; homogeneous bound does not apply")]
    NotHomogeneous,

    #[error("Carleman system needs ~{needed} nonzeros, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("truncation level {required} exceeds the cap {cap}")]
    TruncationCap { required: usize, cap: usize },

    #[error("iterate norm {norm:e} exceeded overflow guard at step {step}")]
    Overflow { step: usize, norm: f64 },

    #[error("solution blows up at t* = {t_star}")]
    SingularTime { t_star: f64 },

    #[error("step {h} exceeds the stability limit {limit}")]
    StepTooLarge { h: f64, limit: f64 },

    #[error("hypothesis not certified: {0}")]
    HypothesisUnverified(String),

    #[error("epsilon {0} outside the admissible range")]
    EpsilonOutOfRange(f64),

    #[error("nonlinearity strength r = {0} is below sqrt(2)")]
    RTooSmall(f64),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable upper-case identifier printed as `ERROR <code>: <msg>`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ShapeMismatch(_) => "SHAPE_MISMATCH",
            Error::ZeroVector(_) => "ZERO_VECTOR",
            Error::EigenFailure(_) => "EIGEN_FAILURE",
            Error::NonDissipative { .. } => "NON_DISSIPATIVE",
            Error::RNotBelowOne { .. } => "R_NOT_BELOW_ONE",
            Error::DegenerateQuadratic => "DEGENERATE_QUADRATIC",
            Error::ComplexRoots { .. } => "COMPLEX_ROOTS",
            Error::NotRescaled { .. } => "NOT_RESCALED",
            Error::NotHomogeneous => "NOT_HOMOGENEOUS",
            Error::BudgetExceeded { .. } => "BUDGET_EXCEEDED",
            Error::TruncationCap { .. } => "TRUNCATION_CAP",
            Error::Overflow { .. } => "OVERFLOW",
            Error::SingularTime { .. } => "SINGULAR_TIME",
            Error::StepTooLarge { .. } => "STEP_TOO_LARGE",
            Error::HypothesisUnverified(_) => "HYPOTHESIS_UNVERIFIED",
            Error::EpsilonOutOfRange(_) => "EPSILON_OUT_OF_RANGE",
            Error::RTooSmall(_) => "R_TOO_SMALL",
            Error::ParameterOutOfRange(_) => "PARAMETER_OUT_OF_RANGE",
            Error::Parse { .. } => "PARSE",
            Error::Config(_) => "CONFIG",
            Error::Io(_) => "IO",
        }
    }

    /// 2 for violated mathematical hypotheses, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonDissipative { .. }
            | Error::RNotBelowOne { .. }
            | Error::DegenerateQuadratic
            | Error::ComplexRoots { .. }
            | Error::NotRescaled { .. }
            | Error::NotHomogeneous
            | Error::SingularTime { .. }
            | Error::StepTooLarge { .. }
            | Error::HypothesisUnverified(_)
            | Error::EpsilonOutOfRange(_)
            | Error::RTooSmall(_)
            | Error::Overflow { .. } => 2,
            _ => 1,
        }
    }
}
