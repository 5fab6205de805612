//! Polyhedral liftings of `conv{(x, x^1 x^1', ..., x^R x^R') : x in X}` and vertex
//! decompositions of points in them.

mod birkhoff;
mod explicit;
mod flow;
mod interval;

pub use birkhoff::{birkhoff_rep, birkhoff_rep_columns, decompose_doubly_stochastic, permutation_vertices};
pub use explicit::{explicit_enumeration_rep, explicit_enumeration_rep_with_limit, DEFAULT_VERTEX_LIMIT};
pub use flow::{decompose_flow, flow_rep};
pub use interval::{
    decompose_interval_point, enumerate_interval_partitions, interval_index, interval_partition_rep,
    interval_partition_rep_for, interval_partitions, intervals, IntervalPartition, MAX_ENUMERATION_N,
};

use crate::dag::DagError;
use crate::moments::Partition;
use blockdro_conic::{packed_index, packed_len, SparseMatrix};
use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

/// Numerical support threshold for peeling and matching.
pub const SUPPORT_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChullError {
    #[error("the interval representation needs even n, got {0}")]
    OddDimension(usize),
    #[error("enumeration refused for n = {n} (limit {limit})")]
    TooLarge { n: usize, limit: usize },
    #[error("{count} vertices exceed the limit of {limit}")]
    TooManyVertices { count: usize, limit: usize },
    #[error("vertex set is empty")]
    EmptyVertexSet,
    #[error("vertices must have length {expected}, found {found}")]
    VertexLength { expected: usize, found: usize },
    #[error("point is not feasible for the interval representation: {0}")]
    NotFeasible(String),
    #[error("not a unit flow: {0}")]
    NotAFlow(String),
    #[error("not doubly stochastic: {0}")]
    NotDoublyStochastic(String),
    #[error("no perfect matching on the support; retry with a smaller support threshold")]
    NoPerfectMatching,
    #[error("partition does not fit this representation: {0}")]
    UnsupportedPartition(String),
    #[error(transparent)]
    Dag(#[from] DagError),
}

/// A variable of a hull representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HullVar {
    /// `p_i`, the lifted `x_i`.
    P(usize),
    /// Entry `(a, b)` (`a <= b`, positions within the block) of `X^r`.
    X { block: usize, a: usize, b: usize },
    /// Auxiliary nonnegative variable.
    Aux(usize),
}

impl HullVar {
    pub fn x(block: usize, a: usize, b: usize) -> Self {
        HullVar::X { block, a: a.min(b), b: a.max(b) }
    }
}

/// Meaning of an auxiliary variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxKind {
    /// `t_kj` for the integer interval `[k, j]`, 1-based.
    Interval { k: usize, j: usize },
    /// Weight of the listed vertex.
    Vertex(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub terms: Vec<(HullVar, f64)>,
    pub rhs: f64,
}

/// Linear equalities over `(p, X^1, ..., X^R, aux)` whose feasible set projects onto the hull.
/// Auxiliaries are nonnegative; `nonneg` lists further nonnegative `P`/`X` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ChullRep {
    pub partition: Partition,
    pub aux: Vec<AuxKind>,
    pub rows: Vec<LinearRow>,
    pub nonneg: Vec<HullVar>,
    /// Equalities in `p` alone that every point of `X` satisfies.
    pub affine: Vec<LinearRow>,
}

impl ChullRep {
    pub fn n(&self) -> usize {
        self.partition.n()
    }

    /// Flat index: `p` first, then each packed `X^r`, then the auxiliaries.
    pub fn var_index(&self, v: HullVar) -> usize {
        let n = self.n();
        match v {
            HullVar::P(i) => i,
            HullVar::X { block, a, b } => {
                n + (0..block).map(|r| packed_len(self.partition.block(r).len())).sum::<usize>() + packed_index(a, b)
            }
            HullVar::Aux(k) => n + self.x_len() + k,
        }
    }

    fn x_len(&self) -> usize {
        (0..self.partition.len()).map(|r| packed_len(self.partition.block(r).len())).sum()
    }

    pub fn n_vars(&self) -> usize {
        self.n() + self.x_len() + self.aux.len()
    }

    /// `(A, b)` over the flat variable index.
    pub fn constraint_matrix(&self) -> (SparseMatrix, Vec<f64>) {
        let rows = self.rows.iter().map(|r| r.terms.iter().map(|&(v, c)| (self.var_index(v), c)).collect()).collect();
        (SparseMatrix::from_rows(self.n_vars(), rows), self.rows.iter().map(|r| r.rhs).collect())
    }

    pub fn nonneg_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.nonneg.iter().map(|&h| self.var_index(h)).collect();
        v.extend((0..self.aux.len()).map(|k| self.var_index(HullVar::Aux(k))));
        v
    }

    /// Equalities `a' x^r = beta` on block `r` alone implied by the affine rows, with `a` over
    /// positions in the block.
    pub fn block_affine(&self, r: usize) -> Vec<(Vec<f64>, f64)> {
        let k = self.affine.len();
        if k == 0 {
            return Vec::new();
        }
        let n = self.n();
        let mut e = DMatrix::<f64>::zeros(k, n);
        for (q, row) in self.affine.iter().enumerate() {
            for &(v, c) in &row.terms {
                if let HullVar::P(i) = v {
                    e[(q, i)] += c;
                }
            }
        }
        let rhs: Vec<f64> = self.affine.iter().map(|row| row.rhs).collect();
        let block = self.partition.block(r);
        let outside: Vec<usize> = (0..n).filter(|i| !block.contains(i)).collect();
        let m = DMatrix::from_fn(k, outside.len(), |q, j| e[(q, outside[j])]);
        let lambdas = null_vectors(&(&m * m.transpose()));
        lambdas
            .into_iter()
            .filter_map(|lam| {
                let a: Vec<f64> = block.iter().map(|&i| (0..k).map(|q| lam[q] * e[(q, i)]).sum()).collect();
                let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                (norm > 1e-8).then(|| {
                    let beta: f64 = (0..k).map(|q| lam[q] * rhs[q]).sum();
                    (a.iter().map(|v| v / norm).collect(), beta / norm)
                })
            })
            .collect()
    }

    /// Lifted point `(x, x^r x^r')` of a vertex in the flat variable index, with zero auxiliaries.
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_vars()];
        out[..self.n()].copy_from_slice(x);
        for (r, b) in self.partition.blocks().iter().enumerate() {
            for a in 0..b.len() {
                for c in a..b.len() {
                    out[self.var_index(HullVar::x(r, a, c))] = x[b[a]] * x[b[c]];
                }
            }
        }
        out
    }
}

/// Orthonormal eigenvectors of a PSD matrix for eigenvalues at relative level `1e-10` or below.
pub(crate) fn null_vectors(g: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let k = g.nrows();
    if k == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(g.clone());
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    (0..k)
        .filter(|&q| eig.eigenvalues[q] <= 1e-10 * scale)
        .map(|q| eig.eigenvectors.column(q).iter().copied().collect())
        .collect()
}

/// Rows whose terms are all `P` variables.
pub(crate) fn p_only(rows: &[LinearRow]) -> Vec<LinearRow> {
    rows.iter().filter(|r| r.terms.iter().all(|t| matches!(t.0, HullVar::P(_)))).cloned().collect()
}

/// A convex combination of vertices of `X`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VertexDecomposition {
    pub entries: Vec<(f64, Vec<f64>)>,
}

impl VertexDecomposition {
    pub fn weight_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.0).sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.entries.first().map_or(0, |e| e.1.len());
        let mut p = vec![0.0; n];
        for (a, x) in &self.entries {
            for i in 0..n {
                p[i] += a * x[i];
            }
        }
        p
    }

    /// `sum alpha x x'` over the full vector.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let n = self.entries.first().map_or(0, |e| e.1.len());
        let mut m = DMatrix::zeros(n, n);
        for (a, x) in &self.entries {
            let v = DMatrix::from_column_slice(n, 1, x);
            m += &v * v.transpose() * *a;
        }
        m
    }

    /// `sum alpha x^r x^r'` for each block.
    pub fn block_second_moments(&self, partition: &Partition) -> Vec<DMatrix<f64>> {
        let full = self.second_moment();
        partition
            .blocks()
            .iter()
            .map(|b| DMatrix::from_fn(b.len(), b.len(), |i, j| full[(b[i], b[j])]))
            .collect()
    }

    /// Largest deviation between the reconstruction and `(p, X^r)`.
    pub fn residual(&self, p: &[f64], x_blocks: &[DMatrix<f64>], partition: &Partition) -> f64 {
        let mp = self.mean();
        let mut r = mp.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        for (m, target) in self.block_second_moments(partition).iter().zip(x_blocks) {
            r = r.max((m - target).abs().max());
        }
        r
    }

    /// Rescales weights to sum to one.
    pub(crate) fn normalize(&mut self) {
        let s = self.weight_sum();
        if s > 0.0 {
            self.entries.iter_mut().for_each(|e| e.0 /= s);
        }
    }
}
