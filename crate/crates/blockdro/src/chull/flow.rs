//! Unit-flow lifting for longest paths, with arcs grouped by head node.

use super::{ChullError, ChullRep, HullVar, LinearRow, VertexDecomposition, SUPPORT_EPS};
use crate::dag::Dag;

/// Conservation rows for every node except the sink (implied by the others), plus
/// `X^r_aa = p_a` and `X^r_ab = 0` for the arcs entering each node.
pub fn flow_rep(dag: &Dag) -> Result<ChullRep, ChullError> {
    let partition = dag.incoming_partition();
    let m = dag.m();
    let mut rows = Vec::new();
    for v in 0..m - 1 {
        let mut terms: Vec<(HullVar, f64)> = dag.outgoing(v).into_iter().map(|a| (HullVar::P(a), 1.0)).collect();
        terms.extend(dag.incoming(v).into_iter().map(|a| (HullVar::P(a), -1.0)));
        rows.push(LinearRow { terms, rhs: if v == 0 { 1.0 } else { 0.0 } });
    }
    for (r, block) in partition.blocks().iter().enumerate() {
        for a in 0..block.len() {
            rows.push(LinearRow { terms: vec![(HullVar::x(r, a, a), 1.0), (HullVar::P(block[a]), -1.0)], rhs: 0.0 });
            for b in a + 1..block.len() {
                rows.push(LinearRow { terms: vec![(HullVar::x(r, a, b), 1.0)], rhs: 0.0 });
            }
        }
    }
    let nonneg = (0..dag.n_arcs()).map(HullVar::P).collect();
    let affine = super::p_only(&rows);
    Ok(ChullRep { partition, aux: Vec::new(), rows, nonneg, affine })
}

/// Splits a unit flow into source-sink paths, following the heaviest remaining arc.
pub fn decompose_flow(p: &[f64], dag: &Dag) -> Result<VertexDecomposition, ChullError> {
    let arcs = dag.arcs();
    if p.len() != arcs.len() {
        return Err(ChullError::NotAFlow(format!("expected {} arc values, got {}", arcs.len(), p.len())));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < -1e-9) {
        return Err(ChullError::NotAFlow(format!("arc value {v} is negative or non-finite")));
    }
    let sink = dag.m() - 1;
    for v in 0..dag.m() {
        let out: f64 = dag.outgoing(v).iter().map(|&a| p[a]).sum();
        let inn: f64 = dag.incoming(v).iter().map(|&a| p[a]).sum();
        let want = if v == 0 { 1.0 } else if v == sink { -1.0 } else { 0.0 };
        if (out - inn - want).abs() > 1e-7 {
            return Err(ChullError::NotAFlow(format!("node {v} has net outflow {}", out - inn)));
        }
    }
    let outgoing: Vec<Vec<usize>> = (0..dag.m()).map(|v| dag.outgoing(v)).collect();
    let mut rest: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
    let mut out = VertexDecomposition::default();
    let mut peeled = 0.0;
    'rounds: for _ in 0..=arcs.len() {
        let mut path = Vec::new();
        let mut u = 0;
        while u != sink {
            let best = outgoing[u]
                .iter()
                .copied()
                .filter(|&a| rest[a] > SUPPORT_EPS)
                .max_by(|&a, &b| rest[a].total_cmp(&rest[b]).then(b.cmp(&a)));
            match best {
                Some(a) => {
                    path.push(a);
                    u = arcs[a].1;
                }
                None if path.is_empty() || peeled >= 1.0 - 1e-6 => break 'rounds,
                None => return Err(ChullError::NotAFlow(format!("flow stops at node {u}"))),
            }
        }
        let lambda = path.iter().map(|&a| rest[a]).fold(f64::INFINITY, f64::min);
        let mut x = vec![0.0; arcs.len()];
        for &a in &path {
            rest[a] -= lambda;
            if rest[a] <= SUPPORT_EPS {
                rest[a] = 0.0;
            }
            x[a] = 1.0;
        }
        peeled += lambda;
        out.entries.push((lambda, x));
    }
    if (peeled - 1.0).abs() > 1e-6 {
        return Err(ChullError::NotAFlow(format!("paths carry total weight {peeled}")));
    }
    out.normalize();
    Ok(out)
}
