//! Elimination of coordinates that a singular second-moment corner pins down.
//!
//! If `v' C v = 0` for the fixed corner `C` of a PSD moment block, every PSD completion `W`
//! satisfies `W v = 0`, so the block is `L W~ L'` for the coordinates left after solving
//! `v' xi = 0` for one coordinate per kernel vector. The same applies to an equality
//! `a' x = beta` holding on every point of the support.

use nalgebra::{DMatrix, SymmetricEigen};

/// Relative eigenvalue threshold below which a corner direction counts as singular.
pub const SINGULAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordMap {
    /// Original coordinates kept in the reduced block, increasing.
    pub kept: Vec<usize>,
    /// For each original coordinate, `(kept position, coefficient)` terms.
    pub expr: Vec<Vec<(usize, f64)>>,
}

impl CoordMap {
    pub fn identity(n: usize) -> Self {
        Self { kept: (0..n).collect(), expr: (0..n).map(|i| vec![(i, 1.0)]).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.kept.len() == self.expr.len()
    }

    pub fn reduced_order(&self) -> usize {
        self.kept.len()
    }

    /// Kept position of an original coordinate, if it was kept.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.kept.binary_search(&i).ok()
    }

    /// `L` with `W = L W~ L'`.
    pub fn lift_matrix(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.expr.len(), self.kept.len());
        for (i, terms) in self.expr.iter().enumerate() {
            for &(k, c) in terms {
                l[(i, k)] += c;
            }
        }
        l
    }

    /// Terms `(k, l, coef)` of entry `(i, j)` of `W` in `W~`.
    pub fn entry_terms(&self, i: usize, j: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for &(k, a) in &self.expr[i] {
            for &(l, b) in &self.expr[j] {
                out.push((k.min(l), k.max(l), a * b));
            }
        }
        out
    }
}

/// Map for a block of order `n` whose leading `corner.nrows()` coordinates carry the fixed
/// corner. Only coordinates in `eliminable` may be solved for; the identity is returned when
/// the corner is nonsingular.
pub fn reduce_corner(corner: &DMatrix<f64>, n: usize, eliminable: &[usize]) -> CoordMap {
    let coords: Vec<usize> = (0..corner.nrows()).collect();
    eliminate(kernel_vectors(corner, &coords, n), n, eliminable)
}

/// Kernel directions of a fixed principal submatrix whose rows sit at `coords` of an order-`n` block.
pub fn kernel_vectors(sub: &DMatrix<f64>, coords: &[usize], n: usize) -> Vec<Vec<f64>> {
    kernel_vectors_tol(sub, coords, n, SINGULAR_TOL)
}

/// As [`kernel_vectors`] with a given relative threshold.
pub fn kernel_vectors_tol(sub: &DMatrix<f64>, coords: &[usize], n: usize, tol: f64) -> Vec<Vec<f64>> {
    let eig = SymmetricEigen::new(sub.clone());
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    (0..sub.nrows())
        .filter(|&k| eig.eigenvalues[k] <= tol * scale)
        .map(|k| {
            let mut v = vec![0.0; n];
            for (a, &c) in coords.iter().enumerate() {
                v[c] = eig.eigenvectors[(a, k)];
            }
            v
        })
        .collect()
}

/// The vector `(-beta, a)` placed at coordinate `0` and `offset..offset + a.len()`, so that
/// `a' x = beta` reads `v' xi = 0` for `xi = [1, ..., x, ...]`.
pub fn affine_kernel(a: &[f64], beta: f64, offset: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = -beta;
    v[offset..offset + a.len()].copy_from_slice(a);
    v
}

/// Solves `v' xi = 0` for one coordinate in `eliminable` per independent kernel vector.
pub fn eliminate(kernel: Vec<Vec<f64>>, n: usize, eliminable: &[usize]) -> CoordMap {
    if kernel.is_empty() {
        return CoordMap::identity(n);
    }
    let mut rows = kernel;
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    for r in 0..rows.len() {
        let best = eliminable
            .iter()
            .copied()
            .filter(|c| !pivots.iter().any(|p| p.0 == *c))
            .map(|c| (c, rows[r][c].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((col, mag)) = best else { break };
        if mag < 1e-12 {
            continue;
        }
        let piv = rows[r][col];
        rows[r].iter_mut().for_each(|v| *v /= piv);
        for q in 0..rows.len() {
            if q != r {
                let f = rows[q][col];
                if f != 0.0 {
                    for i in 0..n {
                        rows[q][i] -= f * rows[r][i];
                    }
                }
            }
        }
        pivots.push((col, r));
    }
    let mut solved: Vec<Option<usize>> = vec![None; n];
    for &(p, r) in &pivots {
        solved[p] = Some(r);
    }
    let kept: Vec<usize> = (0..n).filter(|&i| solved[i].is_none()).collect();
    let pos = |i: usize| kept.binary_search(&i).expect("kept coordinate");
    let expr = (0..n)
        .map(|i| match solved[i] {
            None => vec![(pos(i), 1.0)],
            Some(r) => (0..n)
                .filter(|&j| solved[j].is_none() && rows[r][j].abs() > 1e-14)
                .map(|j| (pos(j), -rows[r][j]))
                .collect(),
        })
        .collect();
    CoordMap { kept, expr }
}
