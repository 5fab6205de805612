//! Partial matrices, chordality of their pattern, and PSD completion.

use crate::error::{Error, Result};
use crate::moments::MomentSpec;
use crate::reduced::ReducedSolution;
use nalgebra::{DMatrix, SymmetricEigen};

/// Tolerance for the specified principal submatrices to count as PSD, relative to the
/// largest specified magnitude.
const PARTIAL_PSD_TOL: f64 = 1e-8;

/// A symmetric matrix with some entries specified.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialMatrix {
    n: usize,
    mask: Vec<bool>,
    values: DMatrix<f64>,
}

impl PartialMatrix {
    /// All entries missing.
    pub fn new(n: usize) -> Self {
        Self { n, mask: vec![false; n * n], values: DMatrix::zeros(n, n) }
    }

    /// Every entry specified.
    pub fn full(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut p = Self::new(n);
        for i in 0..n {
            for j in i..n {
                p.set(i, j, 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
        p
    }

    /// Builds from rows where `None` marks a missing entry; the pattern must be symmetric.
    pub fn from_options(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n = rows.len();
        let mut p = Self::new(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, v) in row.iter().enumerate() {
                match (v, rows[j][i]) {
                    (Some(a), Some(b)) if (a - b).abs() <= 1e-12 * (1.0 + a.abs()) => p.set(i, j, *a),
                    (None, None) => {}
                    _ => return Err(Error::InvalidArgument(format!("pattern or values not symmetric at ({i}, {j})"))),
                }
            }
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.mask[i * self.n + j] = true;
        self.mask[j * self.n + i] = true;
        self.values[(i, j)] = v;
        self.values[(j, i)] = v;
    }

    pub fn is_specified(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.is_specified(i, j).then(|| self.values[(i, j)])
    }

    /// Number of missing positions, counting `(i, j)` and `(j, i)` separately.
    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|m| !**m).count()
    }

    /// Specified values with zeros at missing positions.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&u| u != v && self.is_specified(v, u))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Chordality {
    /// A perfect elimination ordering, first eliminated vertex first.
    Chordal(Vec<usize>),
    NotChordal,
}

impl Chordality {
    pub fn is_chordal(&self) -> bool {
        matches!(self, Chordality::Chordal(_))
    }
}

/// Maximum cardinality search on the graph of off-diagonal specified entries, followed by a
/// check of the resulting ordering.
pub fn perfect_elimination_ordering(pattern: &PartialMatrix) -> Chordality {
    let n = pattern.n;
    let mut weight = vec![0usize; n];
    let mut numbered = vec![false; n];
    let mut order = vec![0usize; n];
    for slot in (0..n).rev() {
        let v = (0..n).filter(|&v| !numbered[v]).max_by_key(|&v| (weight[v], std::cmp::Reverse(v))).expect("vertex left");
        numbered[v] = true;
        order[slot] = v;
        for u in pattern.neighbors(v) {
            if !numbered[u] {
                weight[u] += 1;
            }
        }
    }
    if is_perfect_elimination(pattern, &order) {
        Chordality::Chordal(order)
    } else {
        Chordality::NotChordal
    }
}

/// Whether the later neighbors of every vertex form a clique.
pub(crate) fn is_perfect_elimination(pattern: &PartialMatrix, order: &[usize]) -> bool {
    let mut pos = vec![0usize; pattern.n];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    order.iter().all(|&v| {
        let later: Vec<usize> = pattern.neighbors(v).filter(|&u| pos[u] > pos[v]).collect();
        let Some(&first) = later.iter().min_by_key(|&&u| pos[u]) else { return true };
        later.iter().all(|&u| u == first || pattern.is_specified(first, u))
    })
}

/// `{v} + later neighbors of v` for each `v`; every maximal clique is among them.
fn elimination_cliques(pattern: &PartialMatrix, order: &[usize]) -> Vec<Vec<usize>> {
    let mut pos = vec![0usize; pattern.n];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    order
        .iter()
        .map(|&v| {
            let mut c: Vec<usize> = std::iter::once(v).chain(pattern.neighbors(v).filter(|&u| pos[u] > pos[v])).collect();
            c.sort_unstable();
            c
        })
        .collect()
}

/// A PSD completion of a partial PSD matrix with chordal pattern.
///
/// Vertices are added in reverse elimination order. A new vertex `v` with earlier-added
/// neighbors `K` (a clique) gets `A[v, u] = A[v, K] A[K, K]^+ A[K, u]` for every other added
/// `u`, which keeps the Schur complement of each step equal to that of the clique
/// `K + {v}`. Specified entries are never changed.
pub fn chordal_complete(partial: &PartialMatrix) -> Result<DMatrix<f64>> {
    let n = partial.n;
    if let Some(i) = (0..n).find(|&i| !partial.is_specified(i, i)) {
        return Err(Error::NotPartialPsd(format!("diagonal entry {i} is missing")));
    }
    let Chordality::Chordal(order) = perfect_elimination_ordering(partial) else {
        return Err(Error::NotChordalPattern);
    };
    let scale = partial.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for clique in elimination_cliques(partial, &order) {
        let sub = DMatrix::from_fn(clique.len(), clique.len(), |a, b| partial.values[(clique[a], clique[b])]);
        let lo = SymmetricEigen::new(sub).eigenvalues.min();
        if lo < -PARTIAL_PSD_TOL * scale {
            return Err(Error::NotPartialPsd(format!("submatrix on {clique:?} has eigenvalue {lo:.3e}")));
        }
    }
    let mut out = partial.values.clone();
    let mut pos = vec![0usize; n];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    for (k, &v) in order.iter().enumerate().rev() {
        let added = &order[k + 1..];
        let clique: Vec<usize> = partial.neighbors(v).filter(|&u| pos[u] > pos[v]).collect();
        let rest: Vec<usize> = added.iter().copied().filter(|u| !partial.is_specified(v, *u)).collect();
        if rest.is_empty() {
            continue;
        }
        if clique.is_empty() {
            for &u in &rest {
                out[(v, u)] = 0.0;
                out[(u, v)] = 0.0;
            }
            continue;
        }
        let kk = DMatrix::from_fn(clique.len(), clique.len(), |a, b| out[(clique[a], clique[b])]);
        let vk = DMatrix::from_fn(1, clique.len(), |_, b| out[(v, clique[b])]);
        let ku = DMatrix::from_fn(clique.len(), rest.len(), |a, b| out[(clique[a], rest[b])]);
        let row = vk * psd_pinv(&kk, KERNEL_TOL) * ku;
        for (b, &u) in rest.iter().enumerate() {
            out[(v, u)] = row[(0, b)];
            out[(u, v)] = row[(0, b)];
        }
    }
    Ok(out)
}

/// Relative eigenvalue level below which a clique direction is treated as null.
const KERNEL_TOL: f64 = 1e-8;

/// Pseudoinverse of a symmetric PSD matrix, dropping eigenvalues below `rel` of the largest.
fn psd_pinv(m: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let mut out = DMatrix::zeros(m.nrows(), m.nrows());
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > rel * top {
            let v = eig.eigenvectors.column(k);
            out += v * v.transpose() / l;
        }
    }
    out
}

/// The partial matrix `[[1, mu', p'], [mu, Delta, Y'], [p, Y, X]]` in coordinates
/// `[1, c, x]`: `Delta` and `Y` are specified on the moment blocks only, `X` in full.
pub fn assemble_lp(spec: &MomentSpec, sol: &ReducedSolution, full_x: &DMatrix<f64>) -> Result<PartialMatrix> {
    let n = spec.n();
    let part = spec.partition();
    if sol.p.len() != n || full_x.shape() != (n, n) || sol.y_blocks.len() != part.len() {
        return Err(Error::DimensionMismatch(format!(
            "n = {n}, solution p has length {}, X is {:?}",
            sol.p.len(),
            full_x.shape()
        )));
    }
    let mut l = PartialMatrix::new(2 * n + 1);
    l.set(0, 0, 1.0);
    for i in 0..n {
        l.set(0, 1 + i, spec.mu()[i]);
        l.set(0, 1 + n + i, sol.p[i]);
        for j in i..n {
            l.set(1 + n + i, 1 + n + j, 0.5 * (full_x[(i, j)] + full_x[(j, i)]));
        }
    }
    for (r, b) in part.blocks().iter().enumerate() {
        for (a, &i) in b.iter().enumerate() {
            for (c, &j) in b.iter().enumerate() {
                l.set(1 + i, 1 + j, spec.pi()[r][(a, c)]);
                l.set(1 + n + i, 1 + j, sol.y_blocks[r][(a, c)]);
            }
        }
    }
    Ok(l)
}
