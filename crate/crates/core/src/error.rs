use thiserror::Error;

/// Which side interval of a component a missing mass refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => f.write_str("left"),
            Side::Right => f.write_str("right"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The pair is not in convex order; `witness` is a point with `u_mu(witness) > u_nu(witness)`.
    #[error("convex order violated at y = {witness}: u_mu - u_nu = {excess:e}")]
    ConvexOrderViolation { witness: f64, excess: f64 },

    /// A residual measure would need negative mass at `position`.
    #[error("residual mass negative at y = {position}: deficit {deficit:e}")]
    NegativeResidual { position: f64, deficit: f64 },

    /// The target second marginal has no mass in a side interval used for barycentre repair.
    #[error("no target mass in the {0} side interval")]
    SideMassMissing(Side),

    /// The stability pipeline could not produce a coupling.
    #[error("pipeline failure: {reason}")]
    PipelineFailure { reason: String, report: Option<Box<crate::pipeline::PipelineReport>> },

    /// Malformed input file.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Invariant that should hold for valid inputs was broken.
    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PipelineFailure { .. }
            | Error::SideMassMissing(_)
            | Error::NegativeResidual { .. }
            | Error::Internal(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
