//! Worst-case expected welfare of an optimal assignment, with second moments known for the
//! preferences of each candidate (row) or, with `transpose`, of each job (column).
//!
//! Preferences are indexed row-major: coordinate `i * m + j` is `c_ij`.

use crate::chull::birkhoff_rep;
use crate::error::{Error, Result};
use crate::moments::{MomentSpec, Partition, RawMomentSpec};
use crate::reduced::{ReducedModel, ReducedSolution};
use blockdro_conic::Settings;
use nalgebra::DMatrix;

/// Max-weight perfect matching (Hungarian method); returns the value and `perm[i]`, the job
/// given to candidate `i`.
pub fn assignment_det(c: &DMatrix<f64>) -> Result<(f64, Vec<usize>)> {
    let m = c.nrows();
    if c.ncols() != m {
        return Err(Error::DimensionMismatch(format!("preference matrix is {}x{}", m, c.ncols())));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("empty preference matrix".into()));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite preference".into()));
    }
    // shortest augmenting paths on cost -c, 1-based with a virtual column 0
    let cost = |i: usize, j: usize| -c[(i - 1, j - 1)];
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; m];
    for j in 1..=m {
        perm[owner[j] - 1] = j - 1;
    }
    let value = perm.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum();
    Ok((value, perm))
}

pub fn row_partition(m: usize) -> Result<Partition> {
    Ok(Partition::new(m * m, (0..m).map(|r| (0..m).map(|j| r * m + j).collect()).collect())?)
}

pub fn column_partition(m: usize) -> Result<Partition> {
    Ok(Partition::new(m * m, (0..m).map(|c| (0..m).map(|i| i * m + c).collect()).collect())?)
}

fn side(n: usize) -> Result<usize> {
    let m = (n as f64).sqrt().round() as usize;
    if m * m != n || m == 0 {
        return Err(Error::DimensionMismatch(format!("{n} preferences do not form a square matrix")));
    }
    Ok(m)
}

/// Relabels `c_ij` as `c_ji`, turning column blocks into row blocks.
pub fn transpose_spec(spec: &MomentSpec) -> Result<MomentSpec> {
    let m = side(spec.n())?;
    let t = |k: usize| (k % m) * m + k / m;
    let mut mu = vec![0.0; m * m];
    for (k, &v) in spec.mu().iter().enumerate() {
        mu[t(k)] = v;
    }
    let blocks = spec.partition().blocks().iter().map(|b| b.iter().map(|&k| t(k)).collect()).collect();
    let raw = RawMomentSpec { partition: Partition::new(m * m, blocks)?, mu, pi: spec.pi().to_vec() };
    // same covariance blocks, already validated
    Ok(MomentSpec::validate(raw, f64::NEG_INFINITY)?)
}

/// Row blocks by default; with `transpose`, the spec's blocks must be the columns.
pub fn zlap_bound(spec: &MomentSpec, transpose: bool, settings: &Settings) -> Result<ReducedSolution> {
    let m = side(spec.n())?;
    let expected = if transpose { column_partition(m)? } else { row_partition(m)? };
    if spec.partition() != &expected {
        return Err(Error::PartitionMismatch(format!(
            "assignment moments must be grouped by {}",
            if transpose { "column" } else { "row" }
        )));
    }
    let rows = if transpose { transpose_spec(spec)? } else { spec.clone() };
    let mut sol = ReducedModel::new(&rows, &birkhoff_rep(m), None)?.solve(settings)?.1;
    if transpose {
        let t = |k: usize| (k % m) * m + k / m;
        let p = sol.p.clone();
        for k in 0..m * m {
            sol.p[k] = p[t(k)];
        }
    }
    Ok(sol)
}
