//! Primal-dual interior-point solver for problems over products of free, nonnegative and
//! positive semidefinite cones.
//!
//! Problems are stated as `maximize c'x  s.t.  A x = b,  x in K`; the solver also returns the
//! dual `minimize b'y  s.t.  A'y - c in K`. PSD blocks use the packed layout of [`cone`].

pub mod builder;
pub mod cone;
mod ipm;
mod linalg;
pub mod problem;
pub mod sparse;

pub use builder::{Affine, LmiBuilder, ProblemBuilder, Var};
pub use cone::{pack, packed_index, packed_len, unpack, ConeStructure};
pub use ipm::solve;
pub use problem::{BlockSdpProblem, SdpSolution, Settings, SolverError, Status};
pub use sparse::SparseMatrix;
