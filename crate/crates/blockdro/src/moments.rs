//! Mean and block-diagonal second-moment information.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible eigenvalue of a centered covariance block.
pub const DEFAULT_PD_TOL: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("second-moment block {block} is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { block: usize, asymmetry: f64 },
    #[error("covariance of block {block} has smallest eigenvalue {min_eigenvalue:.3e}, needs > {pd_tol:.1e}")]
    NotStrictlyFeasible { block: usize, min_eigenvalue: f64, pd_tol: f64 },
    #[error("non-finite moment data")]
    NonFinite,
    #[error("moment JSON: {0}")]
    Json(String),
}

/// Ordered disjoint index blocks covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionJson", into = "PartitionJson")]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
    locate: Vec<(usize, usize)>,
}

/// Serialized partition; block indices are 1-based as in [`MomentJson`].
#[derive(Serialize, Deserialize)]
struct PartitionJson {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl TryFrom<PartitionJson> for Partition {
    type Error = MomentError;

    fn try_from(j: PartitionJson) -> Result<Self, MomentError> {
        Partition::new(j.n, one_based_to_zero(&j.blocks)?)
    }
}

impl From<Partition> for PartitionJson {
    fn from(p: Partition) -> Self {
        PartitionJson { n: p.n, blocks: p.blocks.iter().map(|b| b.iter().map(|i| i + 1).collect()).collect() }
    }
}

fn one_based_to_zero(blocks: &[Vec<usize>]) -> Result<Vec<Vec<usize>>, MomentError> {
    blocks
        .iter()
        .map(|b| {
            b.iter()
                .map(|&i| i.checked_sub(1).ok_or_else(|| MomentError::InvalidPartition("indices are 1-based".into())))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect()
}

impl Partition {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self, MomentError> {
        if n == 0 {
            return Err(MomentError::InvalidPartition("dimension must be positive".into()));
        }
        if blocks.is_empty() {
            return Err(MomentError::InvalidPartition("no blocks".into()));
        }
        let mut locate = vec![(usize::MAX, 0); n];
        for (r, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(MomentError::InvalidPartition(format!("block {} is empty", r + 1)));
            }
            for (a, &i) in b.iter().enumerate() {
                if i >= n {
                    return Err(MomentError::InvalidPartition(format!("index {} exceeds n = {n}", i + 1)));
                }
                if locate[i].0 != usize::MAX {
                    return Err(MomentError::InvalidPartition(format!("index {} appears twice", i + 1)));
                }
                locate[i] = (r, a);
            }
        }
        if let Some(i) = locate.iter().position(|l| l.0 == usize::MAX) {
            return Err(MomentError::InvalidPartition(format!("index {} is not covered", i + 1)));
        }
        Ok(Self { n, blocks, locate })
    }

    pub fn singletons(n: usize) -> Result<Self, MomentError> {
        Self::new(n, (0..n).map(|i| vec![i]).collect())
    }

    /// Consecutive pairs `{0,1}, {2,3}, ...`; `n` must be even.
    pub fn pairs(n: usize) -> Result<Self, MomentError> {
        if n % 2 != 0 {
            return Err(MomentError::InvalidPartition(format!("pair partition needs even n, got {n}")));
        }
        Self::new(n, (0..n / 2).map(|r| vec![2 * r, 2 * r + 1]).collect())
    }

    pub fn single_block(n: usize) -> Result<Self, MomentError> {
        Self::new(n, vec![(0..n).collect()])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of blocks `R`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, r: usize) -> &[usize] {
        &self.blocks[r]
    }

    /// `(block, position within block)` of index `i`.
    pub fn locate(&self, i: usize) -> (usize, usize) {
        self.locate[i]
    }
}

/// Unvalidated moment data.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMomentSpec {
    pub partition: Partition,
    pub mu: Vec<f64>,
    pub pi: Vec<DMatrix<f64>>,
}

/// Validated moment information: mean `mu` and per-block second moments `pi[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSpec {
    partition: Partition,
    mu: Vec<f64>,
    pi: Vec<DMatrix<f64>>,
}

impl MomentSpec {
    pub fn new(partition: Partition, mu: Vec<f64>, pi: Vec<DMatrix<f64>>) -> Result<Self, MomentError> {
        Self::validate(RawMomentSpec { partition, mu, pi }, DEFAULT_PD_TOL)
    }

    /// Symmetrizes each block and certifies `pi[r] - mu^r mu^r'` has smallest eigenvalue above `pd_tol`.
    pub fn validate(raw: RawMomentSpec, pd_tol: f64) -> Result<Self, MomentError> {
        let RawMomentSpec { partition, mu, pi } = raw;
        if mu.len() != partition.n() {
            return Err(MomentError::DimensionMismatch(format!("mu has length {}, partition has n = {}", mu.len(), partition.n())));
        }
        if pi.len() != partition.len() {
            return Err(MomentError::DimensionMismatch(format!("{} second-moment blocks for {} partition blocks", pi.len(), partition.len())));
        }
        if mu.iter().any(|v| !v.is_finite()) || pi.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(MomentError::NonFinite);
        }
        let mut sym = Vec::with_capacity(pi.len());
        for (r, m) in pi.into_iter().enumerate() {
            let nr = partition.block(r).len();
            if m.nrows() != nr || m.ncols() != nr {
                return Err(MomentError::DimensionMismatch(format!(
                    "block {} is {}x{}, expected {nr}x{nr}",
                    r + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            let scale = m.abs().max().max(1.0);
            let asym = (&m - m.transpose()).abs().max();
            if asym > SYMMETRY_TOL * scale {
                return Err(MomentError::NotSymmetric { block: r, asymmetry: asym });
            }
            let s = (&m + m.transpose()) * 0.5;
            let mr = DMatrix::from_fn(nr, 1, |a, _| mu[partition.block(r)[a]]);
            let cov = &s - &mr * mr.transpose();
            let min_eig = SymmetricEigen::new(cov).eigenvalues.min();
            if min_eig <= pd_tol {
                return Err(MomentError::NotStrictlyFeasible { block: r, min_eigenvalue: min_eig, pd_tol });
            }
            sym.push(s);
        }
        Ok(Self { partition, mu, pi: sym })
    }

    pub fn into_raw(self) -> RawMomentSpec {
        RawMomentSpec { partition: self.partition, mu: self.mu, pi: self.pi }
    }

    /// Independent coordinates with the given means and variances.
    pub fn mean_variance(mu: &[f64], var: &[f64]) -> Result<Self, MomentError> {
        if mu.len() != var.len() {
            return Err(MomentError::DimensionMismatch("mu and var lengths differ".into()));
        }
        let pi = mu.iter().zip(var).map(|(m, v)| DMatrix::from_element(1, 1, v + m * m)).collect();
        Self::new(Partition::singletons(mu.len())?, mu.to_vec(), pi)
    }

    /// Consecutive pairs with means, standard deviations and within-pair correlations `rho[r]`.
    pub fn paired(mu: &[f64], sd: &[f64], rho: &[f64], pd_tol: f64) -> Result<Self, MomentError> {
        let n = mu.len();
        if sd.len() != n || rho.len() != n / 2 {
            return Err(MomentError::DimensionMismatch(format!("need {n} sds and {} correlations", n / 2)));
        }
        let partition = Partition::pairs(n)?;
        Self::paired_on(partition, mu, sd, rho, pd_tol)
    }

    /// Like [`paired`](Self::paired), but an odd last coordinate becomes a singleton block.
    pub fn paired_with_tail(mu: &[f64], sd: &[f64], rho: &[f64], pd_tol: f64) -> Result<Self, MomentError> {
        let n = mu.len();
        if sd.len() != n || rho.len() != n / 2 {
            return Err(MomentError::DimensionMismatch(format!("need {n} sds and {} correlations", n / 2)));
        }
        let mut blocks: Vec<Vec<usize>> = (0..n / 2).map(|r| vec![2 * r, 2 * r + 1]).collect();
        if n % 2 == 1 {
            blocks.push(vec![n - 1]);
        }
        Self::paired_on(Partition::new(n, blocks)?, mu, sd, rho, pd_tol)
    }

    fn paired_on(partition: Partition, mu: &[f64], sd: &[f64], rho: &[f64], pd_tol: f64) -> Result<Self, MomentError> {
        let pi = partition
            .blocks()
            .iter()
            .enumerate()
            .map(|(r, b)| match b.as_slice() {
                &[i, j] => {
                    let c = rho[r] * sd[i] * sd[j] + mu[i] * mu[j];
                    DMatrix::from_row_slice(2, 2, &[sd[i] * sd[i] + mu[i] * mu[i], c, c, sd[j] * sd[j] + mu[j] * mu[j]])
                }
                _ => {
                    let i = b[0];
                    DMatrix::from_element(1, 1, sd[i] * sd[i] + mu[i] * mu[i])
                }
            })
            .collect();
        Self::validate(RawMomentSpec { partition, mu: mu.to_vec(), pi }, pd_tol)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn pi(&self) -> &[DMatrix<f64>] {
        &self.pi
    }

    pub fn mu_block(&self, r: usize) -> Vec<f64> {
        self.partition.block(r).iter().map(|&i| self.mu[i]).collect()
    }

    pub fn covariance(&self, r: usize) -> DMatrix<f64> {
        let mr = DMatrix::from_column_slice(self.partition.block(r).len(), 1, &self.mu_block(r));
        &self.pi[r] - &mr * mr.transpose()
    }

    /// Moments of `c - s`: mean `mu - s`, blocks `pi[r] - s mu' - mu s' + s s'`.
    pub fn shift_second_moment(&self, s: &[f64]) -> Result<MomentSpec, MomentError> {
        if s.len() != self.n() {
            return Err(MomentError::DimensionMismatch(format!("shift has length {}, n = {}", s.len(), self.n())));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(MomentError::NonFinite);
        }
        let mu: Vec<f64> = self.mu.iter().zip(s).map(|(m, v)| m - v).collect();
        let pi = (0..self.partition.len())
            .map(|r| {
                let b = self.partition.block(r);
                DMatrix::from_fn(b.len(), b.len(), |a, c| {
                    let (i, j) = (b[a], b[c]);
                    self.pi[r][(a, c)] - s[i] * self.mu[j] - self.mu[i] * s[j] + s[i] * s[j]
                })
            })
            .collect();
        // covariance is unchanged, so the validated invariants carry over
        Ok(MomentSpec { partition: self.partition.clone(), mu, pi })
    }

    pub fn to_json(&self) -> MomentJson {
        MomentJson {
            n: self.n(),
            blocks: self.partition.blocks().iter().map(|b| b.iter().map(|i| i + 1).collect()).collect(),
            mu: self.mu.clone(),
            pi: self.pi.iter().map(|m| (0..m.nrows()).map(|a| m.row(a).iter().copied().collect()).collect()).collect(),
        }
    }

    pub fn from_json(j: &MomentJson, pd_tol: f64) -> Result<Self, MomentError> {
        Self::validate(j.to_raw()?, pd_tol)
    }

    pub fn from_json_str(s: &str, pd_tol: f64) -> Result<Self, MomentError> {
        let j: MomentJson = serde_json::from_str(s).map_err(|e| MomentError::Json(e.to_string()))?;
        Self::from_json(&j, pd_tol)
    }
}

/// On-disk moment format; block indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentJson {
    pub n: usize,
    pub blocks: Vec<Vec<usize>>,
    pub mu: Vec<f64>,
    pub pi: Vec<Vec<Vec<f64>>>,
}

impl MomentJson {
    pub fn to_raw(&self) -> Result<RawMomentSpec, MomentError> {
        let partition = Partition::new(self.n, one_based_to_zero(&self.blocks)?)?;
        let pi = self
            .pi
            .iter()
            .enumerate()
            .map(|(r, rows)| {
                let k = rows.len();
                if rows.iter().any(|row| row.len() != k) {
                    return Err(MomentError::DimensionMismatch(format!("block {} is not square", r + 1)));
                }
                Ok(DMatrix::from_fn(k, k, |a, b| rows[a][b]))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RawMomentSpec { partition, mu: self.mu.clone(), pi })
    }
}
