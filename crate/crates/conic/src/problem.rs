use crate::cone::{packed_len, unpack, ConeStructure};
use crate::sparse::SparseMatrix;
use nalgebra::DMatrix;
use thiserror::Error;

/// `maximize c'x  s.t.  A x = b,  x in K`, with dual `minimize b'y  s.t.  A'y - c = z in K`.
#[derive(Debug, Clone)]
pub struct BlockSdpProblem {
    pub cone: ConeStructure,
    pub objective: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iterations: usize,
    /// Static diagonal regularization of the Schur complement, relative to its largest diagonal entry.
    pub regularization: f64,
    pub verbose: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self { gap_tol: 1e-8, feas_tol: 1e-8, max_iterations: 200, regularization: 1e-9, verbose: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: Status,
    /// Primal iterate in packed layout.
    pub x: Vec<f64>,
    /// Multipliers of the equality rows.
    pub y: Vec<f64>,
    /// Dual slack `A'y - c` in packed layout.
    pub z: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|primal - dual| / (1 + |primal|)`
    pub gap: f64,
    /// `||b - A x|| / (1 + ||b||)`
    pub primal_residual: f64,
    /// `||A'y - z - c|| / (1 + ||c||)`
    pub dual_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("objective has length {got}, cone dimension is {expected}")]
    ObjectiveLength { expected: usize, got: usize },
    #[error("constraint matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    MatrixShape { rows: usize, cols: usize, expected_rows: usize, expected_cols: usize },
    #[error("problem data contains a non-finite value")]
    NonFinite,
    #[error("PSD block {0} does not exist")]
    NoSuchBlock(usize),
    #[error("PSD blocks must have positive order")]
    EmptyBlock,
}

impl BlockSdpProblem {
    pub fn new(cone: ConeStructure, objective: Vec<f64>, a: SparseMatrix, b: Vec<f64>) -> Result<Self, SolverError> {
        let p = Self { cone, objective, a, b };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), SolverError> {
        let n = self.cone.dim();
        if self.cone.psd_block_sizes.iter().any(|&k| k == 0) {
            return Err(SolverError::EmptyBlock);
        }
        if self.objective.len() != n {
            return Err(SolverError::ObjectiveLength { expected: n, got: self.objective.len() });
        }
        if self.a.ncols() != n || self.a.nrows() != self.b.len() {
            return Err(SolverError::MatrixShape {
                rows: self.a.nrows(),
                cols: self.a.ncols(),
                expected_rows: self.b.len(),
                expected_cols: n,
            });
        }
        let finite = self.objective.iter().chain(self.b.iter()).all(|v| v.is_finite())
            && self.a.to_triplets().iter().all(|t| t.2.is_finite());
        if !finite {
            return Err(SolverError::NonFinite);
        }
        Ok(())
    }
}

impl SdpSolution {
    pub fn psd_block(&self, cone: &ConeStructure, b: usize) -> Result<DMatrix<f64>, SolverError> {
        block_of(&self.x, cone, b)
    }

    pub fn psd_dual_block(&self, cone: &ConeStructure, b: usize) -> Result<DMatrix<f64>, SolverError> {
        block_of(&self.z, cone, b)
    }
}

fn block_of(v: &[f64], cone: &ConeStructure, b: usize) -> Result<DMatrix<f64>, SolverError> {
    let k = *cone.psd_block_sizes.get(b).ok_or(SolverError::NoSuchBlock(b))?;
    let off = cone.psd_offset(b);
    Ok(unpack(k, &v[off..off + packed_len(k)]))
}
