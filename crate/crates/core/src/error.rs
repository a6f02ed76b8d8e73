use thiserror::Error;

pub type Result<T, E = QcdError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcdError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("detector already stopped at step {0}")]
    AlreadyStopped(u64),

    /// The caller supplied an observation when the detector asked to skip,
    /// or withheld one when it asked to observe.
    #[error("observation contract violated: {0}")]
    ObservationContract(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config error: {0}")]
    Config(String),
}

impl QcdError {
    pub(crate) fn invalid_model(msg: impl Into<String>) -> Self {
        QcdError::InvalidModel(msg.into())
    }

    pub(crate) fn invalid_input(msg: impl Into<String>) -> Self {
        QcdError::InvalidInput(msg.into())
    }

    pub(crate) fn invalid_plan(msg: impl Into<String>) -> Self {
        QcdError::InvalidPlan(msg.into())
    }
}
