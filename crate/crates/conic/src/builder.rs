//! Helpers that assemble [`BlockSdpProblem`]s without hand-computing packed offsets.
//!
//! [`ProblemBuilder`] states a problem in the primal form (equality rows over cone
//! variables). [`LmiBuilder`] states one in the dual form: minimize a linear function of
//! free variables subject to affine expressions lying in cones.

use crate::cone::{entry_coefficient, packed_index, ConeStructure};
use crate::problem::{BlockSdpProblem, SdpSolution, SolverError};
use crate::sparse::SparseMatrix;
use std::f64::consts::SQRT_2;

/// A primal variable: a free scalar, a nonnegative scalar, or an entry of a PSD block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Free(usize),
    Nonneg(usize),
    Entry { block: usize, i: usize, j: usize },
}

#[derive(Debug, Clone, Default)]
pub struct ProblemBuilder {
    n_free: usize,
    n_nonneg: usize,
    blocks: Vec<usize>,
    rows: Vec<(Vec<(Var, f64)>, f64)>,
    objective: Vec<(Var, f64)>,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_free(&mut self) -> Var {
        self.n_free += 1;
        Var::Free(self.n_free - 1)
    }

    pub fn add_nonneg(&mut self) -> Var {
        self.n_nonneg += 1;
        Var::Nonneg(self.n_nonneg - 1)
    }

    /// Adds a PSD block of order `k` and returns its index.
    pub fn add_psd(&mut self, k: usize) -> usize {
        self.blocks.push(k);
        self.blocks.len() - 1
    }

    pub fn entry(&self, block: usize, i: usize, j: usize) -> Var {
        let k = self.blocks[block];
        assert!(i < k && j < k, "entry ({i}, {j}) outside block of order {k}");
        Var::Entry { block, i: i.min(j), j: i.max(j) }
    }

    /// Adds the row `sum coef * var = rhs`, where an `Entry` term means the matrix entry itself.
    pub fn add_row(&mut self, terms: Vec<(Var, f64)>, rhs: f64) -> usize {
        self.rows.push((terms, rhs));
        self.rows.len() - 1
    }

    /// Adds `coef * var` to the maximized objective.
    pub fn add_objective(&mut self, var: Var, coef: f64) {
        self.objective.push((var, coef));
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cone(&self) -> ConeStructure {
        ConeStructure::new(self.n_free, self.n_nonneg, self.blocks.clone())
    }

    fn column(&self, cone: &ConeStructure, v: Var) -> (usize, f64) {
        match v {
            Var::Free(i) => (i, 1.0),
            Var::Nonneg(i) => (cone.n_free + i, 1.0),
            Var::Entry { block, i, j } => (cone.psd_offset(block) + packed_index(i, j), entry_coefficient(i, j, 1.0)),
        }
    }

    pub fn build(&self) -> Result<BlockSdpProblem, SolverError> {
        let cone = self.cone();
        let n = cone.dim();
        let mut c = vec![0.0; n];
        for &(v, coef) in &self.objective {
            let (col, s) = self.column(&cone, v);
            c[col] += s * coef;
        }
        let rows: Vec<Vec<(usize, f64)>> = self
            .rows
            .iter()
            .map(|(terms, _)| {
                let mut row: Vec<(usize, f64)> = terms
                    .iter()
                    .map(|&(v, coef)| {
                        let (col, s) = self.column(&cone, v);
                        (col, s * coef)
                    })
                    .collect();
                merge_terms(&mut row);
                row
            })
            .collect();
        let b = self.rows.iter().map(|r| r.1).collect();
        BlockSdpProblem::new(cone, c, SparseMatrix::from_rows(n, rows), b)
    }

    /// Value of a variable in a solution of the built problem.
    pub fn value(&self, sol: &SdpSolution, v: Var) -> f64 {
        let cone = self.cone();
        let (col, s) = self.column(&cone, v);
        sol.x[col] * s
    }
}

/// Sums repeated columns and drops coefficients that cancelled to roundoff.
fn merge_terms(row: &mut Vec<(usize, f64)>) {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for &(c, v) in row.iter() {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    let scale = row.iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
    out.retain(|e| e.1.abs() > 1e-13 * scale);
    *row = out;
}

/// Affine expression `sum coef * y[var] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(v: usize) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * y[v]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Default)]
pub struct LmiBuilder {
    n_vars: usize,
    objective: Vec<f64>,
    equalities: Vec<Affine>,
    nonneg: Vec<Affine>,
    psd: Vec<(usize, Vec<(usize, usize, Affine)>)>,
}

impl LmiBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self) -> usize {
        self.n_vars += 1;
        self.objective.push(0.0);
        self.n_vars - 1
    }

    pub fn add_vars(&mut self, count: usize) -> Vec<usize> {
        (0..count).map(|_| self.add_var()).collect()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Adds `coef * y[var]` to the minimized objective.
    pub fn add_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] += coef;
    }

    pub fn add_equality(&mut self, e: Affine) {
        self.equalities.push(e);
    }

    pub fn add_nonneg(&mut self, e: Affine) {
        self.nonneg.push(e);
    }

    /// Requires the symmetric matrix with upper-triangle entries `(i, j, expr)` to be PSD;
    /// entries not listed are zero.
    pub fn add_psd(&mut self, k: usize, entries: Vec<(usize, usize, Affine)>) {
        for e in &entries {
            assert!(e.0 < k && e.1 < k, "entry ({}, {}) outside order {k}", e.0, e.1);
        }
        self.psd.push((k, entries));
    }

    /// The primal-form problem whose dual is the stated problem; the solution's `y` holds
    /// the stated variables and `dual_objective` the stated objective value.
    pub fn build(&self) -> Result<BlockSdpProblem, SolverError> {
        let cone = ConeStructure::new(self.equalities.len(), self.nonneg.len(), self.psd.iter().map(|p| p.0).collect());
        let n = cone.dim();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_vars];
        let mut c = vec![0.0; n];
        let mut put = |col: usize, e: &Affine, scale: f64, rows: &mut Vec<Vec<(usize, f64)>>| {
            for &(v, coef) in &e.terms {
                rows[v].push((col, scale * coef));
            }
            c[col] -= scale * e.constant;
        };
        for (i, e) in self.equalities.iter().enumerate() {
            put(i, e, 1.0, &mut rows);
        }
        for (i, e) in self.nonneg.iter().enumerate() {
            put(cone.n_free + i, e, 1.0, &mut rows);
        }
        for (bi, (_, entries)) in self.psd.iter().enumerate() {
            let off = cone.psd_offset(bi);
            for (i, j, e) in entries {
                let scale = if i == j { 1.0 } else { SQRT_2 };
                put(off + packed_index(*i, *j), e, scale, &mut rows);
            }
        }
        BlockSdpProblem::new(cone, c, SparseMatrix::from_rows(n, rows), self.objective.clone())
    }
}
