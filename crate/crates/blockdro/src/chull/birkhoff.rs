//! Birkhoff polytope lifting. `p` is the row-major `m x m` assignment matrix.

use super::{ChullError, ChullRep, HullVar, LinearRow, VertexDecomposition, SUPPORT_EPS};
use crate::moments::Partition;

const MAX_PERMUTATION_M: usize = 8;

/// Blocks are the rows of `p`.
pub fn birkhoff_rep(m: usize) -> ChullRep {
    build(m, false)
}

/// Blocks are the columns of `p`.
pub fn birkhoff_rep_columns(m: usize) -> ChullRep {
    build(m, true)
}

fn build(m: usize, columns: bool) -> ChullRep {
    assert!(m >= 1, "assignment size must be positive");
    let blocks = (0..m).map(|r| (0..m).map(|k| if columns { k * m + r } else { r * m + k }).collect()).collect();
    let partition = Partition::new(m * m, blocks).expect("rows of a square matrix partition it");
    let mut rows = Vec::new();
    for i in 0..m {
        rows.push(LinearRow { terms: (0..m).map(|j| (HullVar::P(i * m + j), 1.0)).collect(), rhs: 1.0 });
    }
    // the last column sum is implied
    for j in 0..m - 1 {
        rows.push(LinearRow { terms: (0..m).map(|i| (HullVar::P(i * m + j), 1.0)).collect(), rhs: 1.0 });
    }
    for (r, block) in partition.blocks().iter().enumerate() {
        for a in 0..m {
            rows.push(LinearRow { terms: vec![(HullVar::x(r, a, a), 1.0), (HullVar::P(block[a]), -1.0)], rhs: 0.0 });
            for b in a + 1..m {
                rows.push(LinearRow { terms: vec![(HullVar::x(r, a, b), 1.0)], rhs: 0.0 });
            }
        }
    }
    let nonneg = (0..m * m).map(HullVar::P).collect();
    let affine = super::p_only(&rows);
    ChullRep { partition, aux: Vec::new(), rows, nonneg, affine }
}

/// All `m!` permutation matrices, row-major.
pub fn permutation_vertices(m: usize) -> Result<Vec<Vec<f64>>, ChullError> {
    if m > MAX_PERMUTATION_M {
        return Err(ChullError::TooLarge { n: m, limit: MAX_PERMUTATION_M });
    }
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..m).collect();
    permute(&mut perm, 0, &mut out);
    Ok(out)
}

fn permute(perm: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<f64>>) {
    let m = perm.len();
    if k == m {
        out.push(permutation_matrix(perm));
        return;
    }
    for i in k..m {
        perm.swap(k, i);
        permute(perm, k + 1, out);
        perm.swap(k, i);
    }
}

fn permutation_matrix(perm: &[usize]) -> Vec<f64> {
    let m = perm.len();
    let mut x = vec![0.0; m * m];
    for (i, &j) in perm.iter().enumerate() {
        x[i * m + j] = 1.0;
    }
    x
}

/// Birkhoff-von Neumann decomposition; each round removes the perfect matching on the support
/// whose smallest entry is largest.
pub fn decompose_doubly_stochastic(p: &[f64], m: usize) -> Result<VertexDecomposition, ChullError> {
    if p.len() != m * m {
        return Err(ChullError::NotDoublyStochastic(format!("expected {} entries, got {}", m * m, p.len())));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < -1e-9) {
        return Err(ChullError::NotDoublyStochastic(format!("entry {v} is negative or non-finite")));
    }
    for i in 0..m {
        let row: f64 = (0..m).map(|j| p[i * m + j]).sum();
        let col: f64 = (0..m).map(|j| p[j * m + i]).sum();
        if (row - 1.0).abs() > 1e-7 || (col - 1.0).abs() > 1e-7 {
            return Err(ChullError::NotDoublyStochastic(format!("row/column {i} sums to {row}/{col}")));
        }
    }
    let mut rest: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
    let mut out = VertexDecomposition::default();
    let mut peeled = 0.0;
    for _ in 0..=m * m {
        if 1.0 - peeled <= 1e-9 {
            break;
        }
        let Some(perm) = bottleneck_matching(&rest, m) else {
            if peeled >= 1.0 - 1e-6 {
                break;
            }
            return Err(ChullError::NoPerfectMatching);
        };
        let lambda = perm.iter().enumerate().map(|(i, &j)| rest[i * m + j]).fold(f64::INFINITY, f64::min);
        for (i, &j) in perm.iter().enumerate() {
            rest[i * m + j] -= lambda;
            if rest[i * m + j] <= SUPPORT_EPS {
                rest[i * m + j] = 0.0;
            }
        }
        peeled += lambda;
        out.entries.push((lambda, permutation_matrix(&perm)));
    }
    if (peeled - 1.0).abs() > 1e-6 {
        return Err(ChullError::NotDoublyStochastic(format!("permutations carry total weight {peeled}")));
    }
    out.normalize();
    Ok(out)
}

fn bottleneck_matching(w: &[f64], m: usize) -> Option<Vec<usize>> {
    let mut levels: Vec<f64> = w.iter().copied().filter(|&v| v > SUPPORT_EPS).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    let mut best = perfect_matching(w, m, levels.last().copied()?)?;
    let (mut lo, mut hi) = (0usize, levels.len() - 1);
    // levels[hi] is known feasible; find the smallest feasible index
    while lo < hi {
        let mid = (lo + hi) / 2;
        match perfect_matching(w, m, levels[mid]) {
            Some(p) => {
                best = p;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    Some(best)
}

fn perfect_matching(w: &[f64], m: usize, threshold: f64) -> Option<Vec<usize>> {
    let mut owner = vec![usize::MAX; m];
    for i in 0..m {
        let mut seen = vec![false; m];
        if !augment(i, w, m, threshold, &mut owner, &mut seen) {
            return None;
        }
    }
    let mut perm = vec![0; m];
    for (j, &i) in owner.iter().enumerate() {
        perm[i] = j;
    }
    Some(perm)
}

fn augment(i: usize, w: &[f64], m: usize, threshold: f64, owner: &mut [usize], seen: &mut [bool]) -> bool {
    for j in 0..m {
        if w[i * m + j] >= threshold && !seen[j] {
            seen[j] = true;
            if owner[j] == usize::MAX || augment(owner[j], w, m, threshold, owner, seen) {
                owner[j] = i;
                return true;
            }
        }
    }
    false
}
