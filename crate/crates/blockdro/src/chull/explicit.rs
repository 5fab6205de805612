//! Lifting by convex weights over an explicit vertex list.

use super::{null_vectors, AuxKind, ChullError, ChullRep, HullVar, LinearRow};
use nalgebra::{DMatrix, DVector};
use crate::moments::Partition;

pub const DEFAULT_VERTEX_LIMIT: usize = 4096;

pub fn explicit_enumeration_rep(vertices: &[Vec<f64>], partition: &Partition) -> Result<ChullRep, ChullError> {
    explicit_enumeration_rep_with_limit(vertices, partition, DEFAULT_VERTEX_LIMIT)
}

/// `sum alpha = 1`, `p = sum alpha x`, `X^r = sum alpha x^r x^r'`. Pass
/// `Partition::single_block` for the full second-moment matrix.
pub fn explicit_enumeration_rep_with_limit(
    vertices: &[Vec<f64>],
    partition: &Partition,
    limit: usize,
) -> Result<ChullRep, ChullError> {
    if vertices.is_empty() {
        return Err(ChullError::EmptyVertexSet);
    }
    if vertices.len() > limit {
        return Err(ChullError::TooManyVertices { count: vertices.len(), limit });
    }
    let n = partition.n();
    for v in vertices {
        if v.len() != n {
            return Err(ChullError::VertexLength { expected: n, found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ChullError::NotFeasible("vertex has non-finite entries".into()));
        }
    }
    let alpha = |k: usize| HullVar::Aux(k);
    let mut rows = vec![LinearRow { terms: (0..vertices.len()).map(|k| (alpha(k), 1.0)).collect(), rhs: 1.0 }];
    let combo = |head: HullVar, f: &dyn Fn(&[f64]) -> f64| {
        let mut terms = vec![(head, 1.0)];
        terms.extend(vertices.iter().enumerate().filter_map(|(k, v)| {
            let c = f(v);
            (c != 0.0).then_some((alpha(k), -c))
        }));
        LinearRow { terms, rhs: 0.0 }
    };
    for i in 0..n {
        rows.push(combo(HullVar::P(i), &|v| v[i]));
    }
    for (r, block) in partition.blocks().iter().enumerate() {
        for a in 0..block.len() {
            for b in a..block.len() {
                let (ia, ib) = (block[a], block[b]);
                rows.push(combo(HullVar::x(r, a, b), &|v| v[ia] * v[ib]));
            }
        }
    }
    Ok(ChullRep {
        partition: partition.clone(),
        aux: (0..vertices.len()).map(AuxKind::Vertex).collect(),
        rows,
        nonneg: Vec::new(),
        affine: affine_hull(vertices),
    })
}

/// Equalities `a' x = a' v_0` satisfied by every vertex.
fn affine_hull(vertices: &[Vec<f64>]) -> Vec<LinearRow> {
    let n = vertices[0].len();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for v in &vertices[1..] {
        let d = DVector::from_fn(n, |i, _| v[i] - vertices[0][i]);
        g += &d * d.transpose();
    }
    null_vectors(&g)
        .into_iter()
        .map(|a| LinearRow {
            rhs: a.iter().zip(&vertices[0]).map(|(x, y)| x * y).sum(),
            terms: a.iter().enumerate().filter(|t| t.1.abs() > 1e-14).map(|(i, &c)| (HullVar::P(i), c)).collect(),
        })
        .collect()
}
