//! Directed acyclic project networks with a single source `0` and sink `m - 1`.

use crate::moments::Partition;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DagError {
    #[error("graph has a cycle")]
    NotAcyclic,
    #[error("arc ({0}, {1}) lies on no path from the source to the sink")]
    DisconnectedArc(usize, usize),
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("graph has {count} source-sink paths, more than the limit {limit}")]
    TooManyPaths { count: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagJson {
    pub m: usize,
    pub arcs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    m: usize,
    arcs: Vec<(usize, usize)>,
    order: Vec<usize>,
}

impl Dag {
    pub fn new(m: usize, arcs: Vec<(usize, usize)>) -> Result<Self, DagError> {
        if m < 2 {
            return Err(DagError::Invalid(format!("need at least 2 nodes, got {m}")));
        }
        if arcs.is_empty() {
            return Err(DagError::Invalid("no arcs".into()));
        }
        for &(u, v) in &arcs {
            if u >= m || v >= m {
                return Err(DagError::Invalid(format!("arc ({u}, {v}) references a node outside 0..{m}")));
            }
            if u == v {
                return Err(DagError::NotAcyclic);
            }
        }
        let order = topological_order(m, &arcs).ok_or(DagError::NotAcyclic)?;
        let from_source = reach(m, &arcs, 0, false);
        let to_sink = reach(m, &arcs, m - 1, true);
        if let Some(&(u, v)) = arcs.iter().find(|&&(u, v)| !from_source[u] || !to_sink[v]) {
            return Err(DagError::DisconnectedArc(u, v));
        }
        Ok(Self { m, arcs, order })
    }

    /// Parses one `u v` arc per line; blank lines and `#` comments are skipped. Node count is
    /// one more than the largest index.
    pub fn from_edge_list(text: &str) -> Result<Self, DagError> {
        let mut arcs = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(DagError::Parse { line: ln + 1, msg: format!("expected two node indices, found {:?}", line) });
            }
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| DagError::Parse { line: ln + 1, msg: format!("{s:?}: {e}") })
            };
            arcs.push((parse(parts[0])?, parse(parts[1])?));
        }
        let m = arcs.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Self::new(m, arcs)
    }

    pub fn to_edge_list(&self) -> String {
        self.arcs.iter().map(|(u, v)| format!("{u} {v}\n")).collect()
    }

    pub fn from_json(j: &DagJson) -> Result<Self, DagError> {
        Self::new(j.m, j.arcs.clone())
    }

    pub fn to_json(&self) -> DagJson {
        DagJson { m: self.m, arcs: self.arcs.clone() }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn n_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Indices of arcs entering `node`, in arc order.
    pub fn incoming(&self, node: usize) -> Vec<usize> {
        (0..self.arcs.len()).filter(|&a| self.arcs[a].1 == node).collect()
    }

    pub fn outgoing(&self, node: usize) -> Vec<usize> {
        (0..self.arcs.len()).filter(|&a| self.arcs[a].0 == node).collect()
    }

    /// Nodes with at least one incoming arc, increasing; block `r` of
    /// [`incoming_partition`](Self::incoming_partition) belongs to `block_nodes()[r]`.
    pub fn block_nodes(&self) -> Vec<usize> {
        (0..self.m).filter(|&v| self.arcs.iter().any(|a| a.1 == v)).collect()
    }

    /// Arcs grouped by head node.
    pub fn incoming_partition(&self) -> Partition {
        let blocks = self.block_nodes().into_iter().map(|v| self.incoming(v)).collect();
        Partition::new(self.arcs.len(), blocks).expect("every arc has a head")
    }

    /// All source-sink paths as 0/1 arc indicators.
    pub fn paths(&self, limit: usize) -> Result<Vec<Vec<f64>>, DagError> {
        let mut count = vec![0usize; self.m];
        count[self.m - 1] = 1;
        for &u in self.order.iter().rev() {
            for a in self.outgoing(u) {
                count[u] = count[u].saturating_add(count[self.arcs[a].1]);
            }
        }
        if count[0] > limit {
            return Err(DagError::TooManyPaths { count: count[0], limit });
        }
        let mut out = Vec::with_capacity(count[0]);
        let mut stack = vec![(0usize, vec![0.0; self.arcs.len()])];
        while let Some((u, ind)) = stack.pop() {
            if u == self.m - 1 {
                out.push(ind);
                continue;
            }
            for a in self.outgoing(u).into_iter().rev() {
                let mut next = ind.clone();
                next[a] = 1.0;
                stack.push((self.arcs[a].1, next));
            }
        }
        Ok(out)
    }
}

fn topological_order(m: usize, arcs: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; m];
    for &(_, v) in arcs {
        indeg[v] += 1;
    }
    let mut ready: Vec<usize> = (0..m).rev().filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(m);
    while let Some(u) = ready.pop() {
        order.push(u);
        for &(a, b) in arcs {
            if a == u {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    ready.push(b);
                }
            }
        }
    }
    (order.len() == m).then_some(order)
}

fn reach(m: usize, arcs: &[(usize, usize)], start: usize, backward: bool) -> Vec<bool> {
    let mut seen = vec![false; m];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &(a, b) in arcs {
            let (from, to) = if backward { (b, a) } else { (a, b) };
            if from == u && !seen[to] {
                seen[to] = true;
                stack.push(to);
            }
        }
    }
    seen
}
