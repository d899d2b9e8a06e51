use thiserror::Error;

pub type Result<T> = std::result::Result<T, RwreError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RwreError {
    #[error("invalid model field `{field}`: {reason}")]
    InvalidModel { field: String, reason: String },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: String, reason: String },

    #[error("index {index} outside window [{lo}, {hi}]")]
    IndexOutOfWindow { index: i64, lo: i64, hi: i64 },

    #[error("series at site {site} is not summable (decay ratio {ratio:.6} after {terms} terms)")]
    NonSummable { site: i64, terms: usize, ratio: f64 },

    #[error("window too small: site {site} needs data left of {lo}")]
    WindowTooSmall { site: i64, lo: i64 },

    #[error("moment estimate for kappa = {kappa} does not stabilize")]
    MomentDivergence { kappa: f64 },

    #[error("quadrature did not converge (last change {last_change:e})")]
    QuadratureNonConvergence { last_change: f64 },

    #[error("model is not CLT-eligible: {reason}")]
    NotCltEligible { reason: String },

    #[error("walk reached left guard at {position}")]
    LeftGuardBreach { position: i64 },

    #[error("walk reached right edge of the window at {position}")]
    RightGuardBreach { position: i64 },

    #[error("step budget of {max_steps} exceeded")]
    StepBudgetExceeded { max_steps: u64 },

    #[error("empty sample set")]
    EmptySample,

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

/// Coarse error families, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Eligibility,
    Numerical,
    GuardBreach,
}

impl RwreError {
    pub fn class(&self) -> ErrorClass {
        use RwreError::*;
        match self {
            InvalidModel { .. } | InvalidArgument { .. } => ErrorClass::Config,
            NotCltEligible { .. } => ErrorClass::Eligibility,
            NonSummable { .. }
            | WindowTooSmall { .. }
            | MomentDivergence { .. }
            | QuadratureNonConvergence { .. }
            | IndexOutOfWindow { .. }
            | EmptySample
            | InsufficientData(_) => ErrorClass::Numerical,
            LeftGuardBreach { .. } | RightGuardBreach { .. } | StepBudgetExceeded { .. } => ErrorClass::GuardBreach,
        }
    }

    /// Stable name of the variant, for reports.
    pub fn kind(&self) -> &'static str {
        use RwreError::*;
        match self {
            InvalidModel { .. } => "InvalidModel",
            InvalidArgument { .. } => "InvalidArgument",
            IndexOutOfWindow { .. } => "IndexOutOfWindow",
            NonSummable { .. } => "NonSummable",
            WindowTooSmall { .. } => "WindowTooSmall",
            MomentDivergence { .. } => "MomentDivergence",
            QuadratureNonConvergence { .. } => "QuadratureNonConvergence",
            NotCltEligible { .. } => "NotCltEligible",
            LeftGuardBreach { .. } => "LeftGuardBreach",
            RightGuardBreach { .. } => "RightGuardBreach",
            StepBudgetExceeded { .. } => "StepBudgetExceeded",
            EmptySample => "EmptySample",
            InsufficientData(_) => "InsufficientData",
        }
    }

    pub(crate) fn invalid_arg(name: &str, reason: impl Into<String>) -> Self {
        RwreError::InvalidArgument {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
