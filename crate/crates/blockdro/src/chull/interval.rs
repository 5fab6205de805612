//! Interval-partition lifting for the appointment-scheduling polytope.
//!
//! Vertices of `{x : x_i - x_{i-1} >= -1, x_n <= 1, x >= 0}` are in bijection with partitions
//! of `{1, ..., n+1}` into integer intervals: inside an interval `[k, j]`, `x_i = j - i`.

use super::{AuxKind, ChullError, ChullRep, HullVar, LinearRow, VertexDecomposition, SUPPORT_EPS};
use crate::moments::Partition;

/// Largest `n` accepted by the enumeration helpers.
pub const MAX_ENUMERATION_N: usize = 20;

/// All intervals `[k, j]`, `1 <= k <= j <= n+1`, in auxiliary order (by `k`, then `j`).
pub fn intervals(n: usize) -> Vec<(usize, usize)> {
    let top = n + 1;
    (1..=top).flat_map(|k| (k..=top).map(move |j| (k, j))).collect()
}

pub fn interval_index(n: usize, k: usize, j: usize) -> usize {
    let top = n + 1;
    debug_assert!(1 <= k && k <= j && j <= top);
    (k - 1) * top - (k - 1) * k.saturating_sub(2) / 2 + (j - k)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalPartition {
    /// Consecutive 1-based intervals covering `{1, ..., n+1}`.
    pub intervals: Vec<(usize, usize)>,
}

impl IntervalPartition {
    pub fn vertex(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for &(k, j) in &self.intervals {
            for i in k..=j.min(n) {
                x[i - 1] = (j - i) as f64;
            }
        }
        x
    }

    /// Recovers the partition of an integral vertex.
    pub fn from_vertex(x: &[f64]) -> Option<Self> {
        let n = x.len();
        let mut out = Vec::new();
        let mut i = 1;
        while i <= n + 1 {
            let len = if i <= n { x[i - 1].round() as usize } else { 0 };
            let j = i + len;
            if j > n + 1 {
                return None;
            }
            for l in i..=j.min(n) {
                if (x[l - 1] - (j - l) as f64).abs() > 1e-9 {
                    return None;
                }
            }
            out.push((i, j));
            i = j + 1;
        }
        Some(Self { intervals: out })
    }
}

pub fn interval_partitions(n: usize) -> Result<Vec<IntervalPartition>, ChullError> {
    if n > MAX_ENUMERATION_N {
        return Err(ChullError::TooLarge { n, limit: MAX_ENUMERATION_N });
    }
    // bit i-1 set means a cut between i and i+1
    Ok((0u64..(1u64 << n))
        .map(|mask| {
            let mut ivs = Vec::new();
            let mut start = 1;
            for i in 1..=n {
                if mask >> (i - 1) & 1 == 1 {
                    ivs.push((start, i));
                    start = i + 1;
                }
            }
            ivs.push((start, n + 1));
            IntervalPartition { intervals: ivs }
        })
        .collect())
}

pub fn enumerate_interval_partitions(n: usize) -> Result<Vec<Vec<f64>>, ChullError> {
    Ok(interval_partitions(n)?.iter().map(|p| p.vertex(n)).collect())
}

/// The lifting for the consecutive-pair partition.
pub fn interval_partition_rep(n: usize) -> Result<ChullRep, ChullError> {
    if n < 2 || n % 2 != 0 {
        return Err(ChullError::OddDimension(n));
    }
    let partition = Partition::pairs(n).map_err(|e| ChullError::UnsupportedPartition(e.to_string()))?;
    interval_partition_rep_for(&partition)
}

/// The lifting for any partition into singletons and adjacent pairs `{i, i+1}`.
pub fn interval_partition_rep_for(partition: &Partition) -> Result<ChullRep, ChullError> {
    let n = partition.n();
    for b in partition.blocks() {
        let ok = match b.as_slice() {
            [_] => true,
            [i, j] => *j == i + 1,
            _ => false,
        };
        if !ok {
            return Err(ChullError::UnsupportedPartition(format!(
                "blocks must be singletons or adjacent pairs in increasing order, found {:?}",
                b.iter().map(|i| i + 1).collect::<Vec<_>>()
            )));
        }
    }
    let ivs = intervals(n);
    let aux: Vec<AuxKind> = ivs.iter().map(|&(k, j)| AuxKind::Interval { k, j }).collect();
    let t = |idx: usize| HullVar::Aux(idx);
    let mut rows = Vec::new();

    for i in 1..=n + 1 {
        let terms = ivs.iter().enumerate().filter(|(_, &(k, j))| k <= i && i <= j).map(|(q, _)| (t(q), 1.0)).collect();
        rows.push(LinearRow { terms, rhs: 1.0 });
    }
    for i in 1..=n {
        let (r, a) = partition.locate(i - 1);
        let mut lin = vec![(HullVar::P(i - 1), 1.0)];
        let mut quad = vec![(HullVar::x(r, a, a), 1.0)];
        for (q, &(k, j)) in ivs.iter().enumerate() {
            if k <= i && i <= j && j > i {
                let d = (j - i) as f64;
                lin.push((t(q), -d));
                quad.push((t(q), -d * d));
            }
        }
        rows.push(LinearRow { terms: lin, rhs: 0.0 });
        rows.push(LinearRow { terms: quad, rhs: 0.0 });
    }
    for (r, b) in partition.blocks().iter().enumerate() {
        if b.len() == 2 {
            let i = b[0] + 1;
            let mut terms = vec![(HullVar::x(r, 0, 1), 1.0)];
            for (q, &(k, j)) in ivs.iter().enumerate() {
                if k <= i && j >= i + 2 {
                    terms.push((t(q), -(((j - i) * (j - i - 1)) as f64)));
                }
            }
            rows.push(LinearRow { terms, rhs: 0.0 });
        }
    }
    Ok(ChullRep { partition: partition.clone(), aux, rows, nonneg: Vec::new(), affine: Vec::new() })
}

/// Peels interval partitions off a feasible `t` (auxiliary order of [`intervals`]).
pub fn decompose_interval_point(t: &[f64], n: usize) -> Result<VertexDecomposition, ChullError> {
    let ivs = intervals(n);
    if t.len() != ivs.len() {
        return Err(ChullError::NotFeasible(format!("expected {} interval weights, got {}", ivs.len(), t.len())));
    }
    if let Some(v) = t.iter().find(|v| !v.is_finite() || **v < -1e-7) {
        return Err(ChullError::NotFeasible(format!("weight {v} is negative or non-finite")));
    }
    let mut rest: Vec<f64> = t.iter().map(|v| v.max(0.0)).collect();
    let mut out = VertexDecomposition::default();
    let mut peeled = 0.0;
    'rounds: for _ in 0..=ivs.len() {
        let mut chain = Vec::new();
        let mut i = 1;
        while i <= n + 1 {
            // heaviest interval first, so solver-level flow imbalance cannot strand the chain
            let next = (i..=n + 1)
                .map(|j| interval_index(n, i, j))
                .filter(|&q| rest[q] > SUPPORT_EPS)
                .max_by(|&a, &b| rest[a].total_cmp(&rest[b]));
            match next {
                Some(q) => {
                    chain.push(q);
                    i = ivs[q].1 + 1;
                }
                None if chain.is_empty() => break 'rounds,
                None if peeled >= 1.0 - 1e-6 => break 'rounds,
                None => {
                    return Err(ChullError::NotFeasible(format!("no support interval starts at {i}")));
                }
            }
        }
        let lambda = chain.iter().map(|&q| rest[q]).fold(f64::INFINITY, f64::min);
        for &q in &chain {
            rest[q] -= lambda;
            if rest[q] <= SUPPORT_EPS {
                rest[q] = 0.0;
            }
        }
        peeled += lambda;
        let part = IntervalPartition { intervals: chain.iter().map(|&q| ivs[q]).collect() };
        out.entries.push((lambda, part.vertex(n)));
    }
    if (peeled - 1.0).abs() > 1e-6 {
        return Err(ChullError::NotFeasible(format!("peeled total weight {peeled}")));
    }
    out.normalize();
    Ok(out)
}
