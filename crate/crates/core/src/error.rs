use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model invariant does not hold. `invariant` names it.
    #[error("invalid model: {invariant}: {detail}")]
    InvalidModel {
        invariant: &'static str,
        detail: String,
    },

    #[error("group index {index} out of range (model has {groups} groups)")]
    GroupIndex { index: usize, groups: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge: achieved {achieved:e} with {nodes} nodes (target {target:e})")]
    Quadrature {
        achieved: f64,
        nodes: usize,
        target: f64,
    },

    #[error("steepness violation: derivative did not reach {target} within {doublings} doublings")]
    Steepness { target: f64, doublings: u32 },

    #[error("moving-average truncation tolerance {tol:e} unachievable within lag {max_lag}")]
    Truncation { tol: f64, max_lag: i64 },

    #[error("degenerate target: {0}")]
    Degenerate(String),

    #[error("model is not gaussian; closed form unavailable")]
    NotGaussian,

    #[error("model document: {0}")]
    Document(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn model(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidModel {
            invariant,
            detail: detail.into(),
        }
    }

    /// True for failures of the numerical machinery (quadrature, root bracketing)
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::Steepness { .. } | Error::Truncation { .. }
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel { .. } => "invalid_model",
            Error::GroupIndex { .. } => "group_index",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Quadrature { .. } => "quadrature",
            Error::Steepness { .. } => "steepness",
            Error::Truncation { .. } => "truncation",
            Error::Degenerate(_) => "degenerate",
            Error::NotGaussian => "not_gaussian",
            Error::Document(_) => "document",
        }
    }
}
