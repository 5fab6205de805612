//! Worst-case expected longest path in a project network with mean arc lengths and
//! second moments of the arcs entering each node.

use crate::chull::flow_rep;
use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::moments::MomentSpec;
use crate::reduced::{ReducedModel, ReducedSolution};
use blockdro_conic::Settings;

/// Longest source-sink path by dynamic programming over the topological order; returns the
/// length and the arcs of one longest path.
pub fn longest_path_det(dag: &Dag, c: &[f64]) -> Result<(f64, Vec<usize>)> {
    if c.len() != dag.n_arcs() {
        return Err(Error::DimensionMismatch(format!("{} lengths for {} arcs", c.len(), dag.n_arcs())));
    }
    let m = dag.m();
    let mut best = vec![f64::NEG_INFINITY; m];
    let mut via = vec![usize::MAX; m];
    best[0] = 0.0;
    for &u in dag.topological_order() {
        if best[u] == f64::NEG_INFINITY {
            continue;
        }
        for a in dag.outgoing(u) {
            let v = dag.arcs()[a].1;
            let cand = best[u] + c[a];
            if cand > best[v] {
                best[v] = cand;
                via[v] = a;
            }
        }
    }
    let mut path = Vec::new();
    let mut v = m - 1;
    while v != 0 {
        let a = via[v];
        path.push(a);
        v = dag.arcs()[a].0;
    }
    path.reverse();
    Ok((best[m - 1], path))
}

/// Moment spec over arcs must use [`Dag::incoming_partition`].
pub fn zpath_bound(dag: &Dag, spec: &MomentSpec, settings: &Settings) -> Result<ReducedSolution> {
    if spec.partition() != &dag.incoming_partition() {
        return Err(Error::PartitionMismatch("PERT moments must be grouped by the head node of each arc".into()));
    }
    let rep = flow_rep(dag)?;
    ReducedModel::new(spec, &rep, None)?.solve(settings).map(|r| r.1)
}
