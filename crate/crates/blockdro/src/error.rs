use crate::chull::ChullError;
use crate::dag::DagError;
use crate::moments::MomentError;
use blockdro_conic::{SolverError, Status};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Chull(#[from] ChullError),
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solver stopped with {status:?} (gap {gap:.2e}, primal residual {primal_residual:.2e}, dual residual {dual_residual:.2e})")]
    SolveFailed { status: Status, gap: f64, primal_residual: f64, dual_residual: f64 },
    #[error("moment partition does not match the representation: {0}")]
    PartitionMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("n must be even for the paired partition, got {0}")]
    OddDimension(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("second-moment residual has eigenvalue {0:.3e}, below the clipping threshold")]
    NegativePhi(f64),
    #[error("not chordal")]
    NotChordalPattern,
    #[error("partial matrix is not partial PSD: {0}")]
    NotPartialPsd(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
