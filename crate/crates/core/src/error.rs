//! Error taxonomy shared by the whole crate.
//!
//! Variants are grouped by how a caller should react, and each group maps to
//! a stable process exit code (see [`Error::exit_code`]) so scripts can
//! branch on the failure class.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed something structurally invalid (sizes, indices, flags).
    #[error("argument error: {0}")]
    Argument(String),

    /// Axis extents disagree in a contraction or reshape.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Operation needed a tensor of a different rank.
    #[error("rank error: {0}")]
    Rank(String),

    /// A gate failed its unitarity precondition.
    #[error("gate error: {0}")]
    Gate(String),

    /// An MPS violated a precondition (e.g. unnormalized input to entropies).
    #[error("state error: {0}")]
    State(String),

    /// File contents did not match the documented format.
    #[error("format error: {0}")]
    Format(String),

    /// Linear-algebra failure: non-convergence, NaN/Inf, ill-conditioning.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Polar projection of a rank-deficient latent (maximizer not unique).
    #[error("degenerate projection: {0}")]
    DegenerateProjection(String),

    /// Overlap modulus underflowed; the log-fidelity loss is undefined.
    #[error("orthogonal states: {0}")]
    Orthogonality(String),

    /// A hard size guard (dense oracles, exact diagonalization).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code class: 2 argument/config, 3 numerical, 4 capacity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_)
            | Error::Dimension(_)
            | Error::Rank(_)
            | Error::Gate(_)
            | Error::State(_)
            | Error::Format(_)
            | Error::Io(_) => 2,
            Error::Numerical(_) | Error::DegenerateProjection(_) | Error::Orthogonality(_) => 3,
            Error::Capacity(_) => 4,
        }
    }
}
