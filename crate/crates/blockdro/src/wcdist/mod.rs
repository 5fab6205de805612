//! A distribution attaining the reduced bound: a mixture over the vertices of a hull
//! decomposition, with independent Gaussian blocks given the vertex.
//!
//! Within block `r`, the factorization of `[[Pi, mu, Y'], [mu', 1, p'], [Y, p, X]]` through
//! `V_r = [sqrt(alpha) (1, x^r)]` gives the conditional means `d_r(x^r)` and a shared
//! residual covariance `Phi_r`.

mod chordal;

pub use chordal::{assemble_lp, chordal_complete, perfect_elimination_ordering, Chordality, PartialMatrix};

use crate::appsched::zapp_bound;
use crate::chull::{decompose_flow, decompose_interval_point, VertexDecomposition};
use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::moments::{MomentSpec, Partition};
use crate::pert::zpath_bound;
use crate::reduced::ReducedSolution;
use blockdro_conic::Settings;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Vertices below this weight are dropped before factoring.
pub const WEIGHT_FLOOR: f64 = 1e-10;
/// Eigenvalues of `Phi_r` at or above this are clipped to zero; below it is an error.
pub const PHI_CLIP: f64 = -1e-6;

/// Moore-Penrose pseudoinverse by SVD. Singular values at or below
/// `sigma_max * max(rows, cols) * eps` are treated as zero.
pub fn pseudoinverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &v| a.max(v));
    let cut = smax * r.max(c) as f64 * f64::EPSILON;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            out += vt.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureEntry {
    pub alpha: f64,
    pub x: Vec<f64>,
    /// Conditional mean of each block given this vertex.
    pub d: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseDistribution {
    pub partition: Partition,
    pub entries: Vec<MixtureEntry>,
    /// Row-major `Phi_r`.
    pub phi: Vec<Vec<Vec<f64>>>,
    /// Vertices dropped for weight below [`WEIGHT_FLOOR`].
    pub dropped: usize,
    /// Most negative eigenvalue of any `Phi_r` before clipping.
    pub min_phi_eigenvalue: f64,
}

impl WorstCaseDistribution {
    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn phi_matrix(&self, r: usize) -> DMatrix<f64> {
        let k = self.phi[r].len();
        DMatrix::from_fn(k, k, |i, j| self.phi[r][i][j])
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n()];
        for e in &self.entries {
            for (r, b) in self.partition.blocks().iter().enumerate() {
                for (a, &i) in b.iter().enumerate() {
                    m[i] += e.alpha * e.d[r][a];
                }
            }
        }
        m
    }

    /// `sum alpha (d_r d_r' + Phi_r)`.
    pub fn block_second_moment(&self, r: usize) -> DMatrix<f64> {
        let mut m = self.phi_matrix(r);
        for e in &self.entries {
            let d = DVector::from_column_slice(&e.d[r]);
            m += &d * d.transpose() * e.alpha;
        }
        m
    }

    /// `sum alpha sum_r d_r(x^r)' x^r`, the value of the bilinear objective on the mixture.
    pub fn objective(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let mut v = 0.0;
                for (r, b) in self.partition.blocks().iter().enumerate() {
                    for (a, &i) in b.iter().enumerate() {
                        v += e.d[r][a] * e.x[i];
                    }
                }
                e.alpha * v
            })
            .sum()
    }

    /// Largest deviation of the mixture moments from `spec`.
    pub fn moment_residual(&self, spec: &MomentSpec) -> f64 {
        let mut res = self.mean().iter().zip(spec.mu()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        for r in 0..self.partition.len() {
            res = res.max((self.block_second_moment(r) - &spec.pi()[r]).abs().max());
        }
        res
    }
}

fn projection_key(x: &[f64], block: &[usize]) -> Vec<i64> {
    block.iter().map(|&i| (x[i] * 1e9).round() as i64).collect()
}

/// Builds the mixture from a reduced solution and a vertex decomposition of its `(p, X^r)`.
/// Weights of vertices sharing a projection `x^r` are pooled when forming `V_r`.
pub fn factor_components(
    spec: &MomentSpec,
    sol: &ReducedSolution,
    dec: &VertexDecomposition,
) -> Result<WorstCaseDistribution> {
    let part = spec.partition().clone();
    let n = part.n();
    if sol.p.len() != n || sol.y_blocks.len() != part.len() {
        return Err(Error::DimensionMismatch(format!(
            "solution has n = {} and {} blocks, moments have n = {n} and {}",
            sol.p.len(),
            sol.y_blocks.len(),
            part.len()
        )));
    }
    if let Some(e) = dec.entries.iter().find(|e| e.1.len() != n) {
        return Err(Error::DimensionMismatch(format!("vertex of length {}, n = {n}", e.1.len())));
    }
    let total: f64 = dec.entries.iter().filter(|e| e.0 >= WEIGHT_FLOOR).map(|e| e.0).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("decomposition has no weight above the floor".into()));
    }
    let kept: Vec<(f64, Vec<f64>)> =
        dec.entries.iter().filter(|e| e.0 >= WEIGHT_FLOOR).map(|e| (e.0 / total, e.1.clone())).collect();
    let dropped = dec.entries.len() - kept.len();

    let mut entries: Vec<MixtureEntry> =
        kept.iter().map(|(a, x)| MixtureEntry { alpha: *a, x: x.clone(), d: Vec::with_capacity(part.len()) }).collect();
    let mut phi = Vec::with_capacity(part.len());
    let mut min_eig = f64::INFINITY;
    for (r, b) in part.blocks().iter().enumerate() {
        let nr = b.len();
        let mut pooled: BTreeMap<Vec<i64>, (usize, f64)> = BTreeMap::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut column_of = Vec::with_capacity(kept.len());
        for (a, x) in &kept {
            let key = projection_key(x, b);
            let next = columns.len();
            let slot = pooled.entry(key).or_insert((next, 0.0));
            if slot.0 == next {
                columns.push(b.iter().map(|&i| x[i]).collect());
                weights.push(0.0);
            }
            slot.1 += a;
            weights[slot.0] += a;
            column_of.push(slot.0);
        }
        let m = columns.len();
        let v = DMatrix::from_fn(nr + 1, m, |i, k| {
            let s = weights[k].sqrt();
            if i == 0 {
                s
            } else {
                s * columns[k][i - 1]
            }
        });
        // B' = [mu, Y'] with rows indexed by c
        let y = &sol.y_blocks[r];
        let mu = spec.mu_block(r);
        let bt = DMatrix::from_fn(nr, nr + 1, |i, j| if j == 0 { mu[i] } else { y[(j - 1, i)] });
        let gram = &v * v.transpose();
        let pi = &spec.pi()[r];
        let raw = pi - &bt * pseudoinverse(&gram) * bt.transpose();
        let raw = (&raw + raw.transpose()) * 0.5;
        let eig = SymmetricEigen::new(raw);
        let lo = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        min_eig = min_eig.min(lo);
        if lo < PHI_CLIP {
            return Err(Error::NegativePhi(lo));
        }
        let clipped = eig.eigenvalues.map(|v| v.max(0.0));
        let phi_r = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        phi.push((0..nr).map(|i| (0..nr).map(|j| phi_r[(i, j)]).collect()).collect());
        let means = &bt * pseudoinverse(&v).transpose();
        for (e, &k) in entries.iter_mut().zip(&column_of) {
            let s = weights[k].sqrt();
            e.d.push((0..nr).map(|i| means[(i, k)] / s).collect());
        }
    }
    Ok(WorstCaseDistribution { partition: part, entries, phi, dropped, min_phi_eigenvalue: min_eig })
}

/// Worst case for a fixed appointment schedule: solves the bound, peels interval partitions
/// off the solution and factors the blocks.
pub fn schedule_worst_case(
    spec: &MomentSpec,
    s: &[f64],
    settings: &Settings,
) -> Result<(ReducedSolution, VertexDecomposition, WorstCaseDistribution)> {
    let sol = zapp_bound(spec, s, settings)?;
    let dec = decompose_interval_point(&sol.aux, spec.n())?;
    let dist = factor_components(spec, &sol, &dec)?;
    Ok((sol, dec, dist))
}

/// Worst case for the longest path in `dag`, from the flow decomposition of the solution.
pub fn path_worst_case(
    dag: &Dag,
    spec: &MomentSpec,
    settings: &Settings,
) -> Result<(ReducedSolution, VertexDecomposition, WorstCaseDistribution)> {
    let sol = zpath_bound(dag, spec, settings)?;
    let dec = decompose_flow(&sol.p, dag)?;
    let dist = factor_components(spec, &sol, &dec)?;
    Ok((sol, dec, dist))
}

/// Per-block factors `F_r` with `F_r F_r' = Phi_r`.
fn phi_factors(dist: &WorstCaseDistribution) -> Vec<DMatrix<f64>> {
    (0..dist.partition.len())
        .map(|r| {
            let eig = SymmetricEigen::new(dist.phi_matrix(r));
            let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&root)
        })
        .collect()
}

/// Draws `count` samples of `c`, one per row.
pub fn sample_with<R: Rng>(dist: &WorstCaseDistribution, count: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let pick = WeightedIndex::new(dist.entries.iter().map(|e| e.alpha))
        .map_err(|e| Error::InvalidArgument(format!("mixture weights: {e}")))?;
    let factors = phi_factors(dist);
    let n = dist.n();
    let mut out = DMatrix::zeros(count, n);
    for s in 0..count {
        let e = &dist.entries[pick.sample(rng)];
        for (r, b) in dist.partition.blocks().iter().enumerate() {
            let z = DVector::from_fn(b.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let c = &factors[r] * z;
            for (a, &i) in b.iter().enumerate() {
                out[(s, i)] = e.d[r][a] + c[a];
            }
        }
    }
    Ok(out)
}

/// Deterministic sampling: ChaCha8 seeded with `seed`.
pub fn sample(dist: &WorstCaseDistribution, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    sample_stream(dist, count, seed, 0)
}

/// As [`sample`], on stream `stream` of the seed, so callers can split work reproducibly.
pub fn sample_stream(dist: &WorstCaseDistribution, count: usize, seed: u64, stream: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    sample_with(dist, count, &mut rng)
}

/// Writes samples as CSV with header `c1, ..., cn`.
pub fn write_samples_csv<W: std::io::Write>(samples: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=samples.ncols()).map(|i| format!("c{i}"))).map_err(csv_error)?;
    for row in samples.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
