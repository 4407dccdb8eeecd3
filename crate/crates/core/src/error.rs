use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum MadError {
    /// A configuration or call parameter is outside its domain. `field` is a
    /// dotted path such as `designs[2].schedule.a`.
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },

    #[error("arm index {arm} out of range for {n_arms} arms")]
    ArmOutOfRange { arm: usize, n_arms: usize },

    /// The operation is mathematically undefined for the supplied value.
    #[error("domain error: {0}")]
    Domain(String),

    /// Something that the design guarantees cannot happen did happen.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MadError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        MadError::InvalidParameter {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Prefix the field path of an `InvalidParameter` error, leaving other
    /// variants untouched.
    pub fn within(self, prefix: &str) -> Self {
        match self {
            MadError::InvalidParameter { field, message } => MadError::InvalidParameter {
                field: format!("{prefix}.{field}"),
                message,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, MadError>;

pub(crate) fn check_arm(arm: usize, n_arms: usize) -> Result<()> {
    if arm < n_arms {
        Ok(())
    } else {
        Err(MadError::ArmOutOfRange { arm, n_arms })
    }
}
