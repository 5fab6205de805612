//! Comparison bounds over one `(2n + 1)` moment block `[[1, mu', p'], [mu, Delta, Y'], [p, Y, X]]`:
//! the exact Large-SDP over an enumerated vertex set, and the doubly nonnegative relaxation of
//! the completely positive appointment-scheduling program.
//!
//! Coordinates of the block are `0` (constant), `1..=n` (`c`) and `n+1..=2n` (`x`).

use crate::appsched::{add_epigraph, schedule_from_multipliers, Formulation, ScheduleResult};
use crate::chull::{explicit_enumeration_rep, HullVar};
use crate::error::{Error, Result};
use crate::facial::{affine_kernel, eliminate, kernel_vectors, CoordMap};
use crate::moments::{MomentSpec, Partition};
use crate::reduced::{corner_matrix, solve_checked, SolveStats, Terms};
use blockdro_conic::{ProblemBuilder, SdpSolution, Settings};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// How second moments outside the specified blocks are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceMode {
    /// Unspecified entries are decision variables.
    NonOverlapping,
    /// Unspecified entries are fixed to `mu_i mu_j` (zero correlation).
    FullCovariance,
}

#[derive(Debug, Clone)]
pub struct FullBlockSolution {
    pub value: f64,
    pub p: Vec<f64>,
    /// The full `(2n + 1)` block.
    pub block: DMatrix<f64>,
    pub stats: SolveStats,
}

impl FullBlockSolution {
    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn second_moment(&self) -> DMatrix<f64> {
        let n = self.n();
        self.block.view((1, 1), (n, n)).into_owned()
    }

    pub fn x(&self) -> DMatrix<f64> {
        let n = self.n();
        self.block.view((1 + n, 1 + n), (n, n)).into_owned()
    }

    /// `Y[i][j]` estimates `E[x_i c_j]`.
    pub fn y(&self) -> DMatrix<f64> {
        let n = self.n();
        self.block.view((1 + n, 1), (n, n)).into_owned()
    }
}

/// The single moment block with its corner constraints.
struct FullBlock {
    n: usize,
    blk: usize,
    map: CoordMap,
}

impl FullBlock {
    /// `affine` lists equalities `a' x = beta` that hold on every point of `X`.
    fn add(builder: &mut ProblemBuilder, spec: &MomentSpec, mode: CovarianceMode, affine: &[(Vec<f64>, f64)]) -> Self {
        let n = spec.n();
        let part = spec.partition();
        let dim = 1 + 2 * n;
        let mut kernel = Vec::new();
        for r in 0..part.len() {
            let coords: Vec<usize> = std::iter::once(0).chain(part.block(r).iter().map(|&i| 1 + i)).collect();
            kernel.extend(kernel_vectors(&corner_matrix(spec, r), &coords, dim));
        }
        kernel.extend(affine.iter().map(|(a, beta)| affine_kernel(a, *beta, 1 + n, dim)));
        let map = eliminate(kernel, dim, &(1..dim).collect::<Vec<_>>());
        let blk = builder.add_psd(map.reduced_order());
        let me = Self { n, blk, map };
        let kept = |i: usize| me.map.position(i).is_some();
        let fix = |b: &mut ProblemBuilder, i: usize, j: usize, v: f64| {
            let t = me.entry(b, i, j);
            b.add_row(t, v);
        };
        fix(builder, 0, 0, 1.0);
        for i in 0..n {
            if kept(1 + i) {
                fix(builder, 0, 1 + i, spec.mu()[i]);
            }
        }
        for i in 0..n {
            for j in i..n {
                if !(kept(1 + i) && kept(1 + j)) {
                    continue;
                }
                let (ri, ai) = part.locate(i);
                let (rj, aj) = part.locate(j);
                if ri == rj {
                    fix(builder, 1 + i, 1 + j, spec.pi()[ri][(ai, aj)]);
                } else if mode == CovarianceMode::FullCovariance {
                    fix(builder, 1 + i, 1 + j, spec.mu()[i] * spec.mu()[j]);
                }
            }
        }
        me
    }

    fn entry(&self, b: &ProblemBuilder, i: usize, j: usize) -> Terms {
        self.map.entry_terms(i, j).into_iter().map(|(k, l, c)| (b.entry(self.blk, k, l), c)).collect()
    }

    fn p(&self, b: &ProblemBuilder, i: usize) -> Terms {
        self.entry(b, 0, 1 + self.n + i)
    }

    fn add_objective(&self, b: &mut ProblemBuilder, offset: Option<&[f64]>) {
        let n = self.n;
        for i in 0..n {
            for (v, c) in self.entry(b, 1 + n + i, 1 + i) {
                b.add_objective(v, c);
            }
            if let Some(s) = offset {
                for (v, c) in self.p(b, i) {
                    b.add_objective(v, -s[i] * c);
                }
            }
        }
    }

    fn extract(&self, b: &ProblemBuilder, sol: &SdpSolution) -> Result<FullBlockSolution> {
        let small = sol.psd_block(&b.cone(), self.blk)?;
        let l = self.map.lift_matrix();
        let block = &l * small * l.transpose();
        let p = (0..self.n).map(|i| block[(0, 1 + self.n + i)]).collect();
        Ok(FullBlockSolution { value: sol.primal_objective, p, block, stats: SolveStats::of(sol) })
    }
}

fn check_offset(n: usize, offset: Option<&[f64]>) -> Result<()> {
    match offset {
        Some(s) if s.len() != n => Err(Error::DimensionMismatch(format!("offset has length {}, n = {n}", s.len()))),
        _ => Ok(()),
    }
}

/// Exact bound over `conv{(x, xx')}` of an explicit vertex list, with the second moments
/// outside the specified blocks left free.
pub fn large_sdp_bound(
    spec: &MomentSpec,
    vertices: &[Vec<f64>],
    offset: Option<&[f64]>,
    settings: &Settings,
) -> Result<FullBlockSolution> {
    let n = spec.n();
    check_offset(n, offset)?;
    let rep = explicit_enumeration_rep(vertices, &Partition::single_block(n)?)?;
    let mut b = ProblemBuilder::new();
    let fb = FullBlock::add(&mut b, spec, CovarianceMode::NonOverlapping, &rep.block_affine(0));
    fb.add_objective(&mut b, offset);
    let alpha: Vec<_> = (0..rep.aux.len()).map(|_| b.add_nonneg()).collect();
    for row in &rep.rows {
        let mut terms = Vec::new();
        for &(v, c) in &row.terms {
            match v {
                HullVar::P(i) => terms.extend(fb.p(&b, i).into_iter().map(|(w, d)| (w, c * d))),
                HullVar::X { a, b: j, .. } => {
                    terms.extend(fb.entry(&b, 1 + n + a, 1 + n + j).into_iter().map(|(w, d)| (w, c * d)))
                }
                HullVar::Aux(k) => terms.push((alpha[k], c)),
            }
        }
        b.add_row(terms, row.rhs);
    }
    let sol = solve_checked(&b.build()?, settings)?;
    fb.extract(&b, &sol)
}

/// Products of the nonnegative coordinates `(1, x, w)` with `w_j = 1 - x_j + x_{j+1}`
/// (`x_{n+1} = 0`), each as a combination of block coordinates.
fn nonneg_coordinates(n: usize) -> Vec<Vec<(usize, f64)>> {
    let mut u = vec![vec![(0, 1.0)]];
    u.extend((0..n).map(|i| vec![(1 + n + i, 1.0)]));
    for j in 0..n {
        let mut w = vec![(0, 1.0), (1 + n + j, -1.0)];
        if j + 1 < n {
            w.push((2 + n + j, 1.0));
        }
        u.push(w);
    }
    u
}

fn dnn_problem(spec: &MomentSpec, mode: CovarianceMode, offset: Option<&[f64]>) -> (ProblemBuilder, FullBlock) {
    let n = spec.n();
    let mut b = ProblemBuilder::new();
    let fb = FullBlock::add(&mut b, spec, mode, &[]);
    fb.add_objective(&mut b, offset);
    let u = nonneg_coordinates(n);
    for a in 0..u.len() {
        for c in a.max(1)..u.len() {
            let mut terms = Vec::new();
            for &(i, s) in &u[a] {
                for &(j, t) in &u[c] {
                    terms.extend(fb.entry(&b, i, j).into_iter().map(|(v, d)| (v, s * t * d)));
                }
            }
            let slack = b.add_nonneg();
            terms.push((slack, -1.0));
            b.add_row(terms, 0.0);
        }
    }
    (b, fb)
}

/// Doubly nonnegative relaxation of the completely positive program for a fixed schedule.
pub fn dnn_bound(spec: &MomentSpec, s: &[f64], mode: CovarianceMode, settings: &Settings) -> Result<FullBlockSolution> {
    check_offset(spec.n(), Some(s))?;
    let (b, fb) = dnn_problem(spec, mode, Some(s));
    let sol = solve_checked(&b.build()?, settings)?;
    fb.extract(&b, &sol)
}

/// Schedule minimizing the DNN relaxation; solved through the primal with the schedule read
/// off the multipliers, which is the dual program with the copositive cone replaced by PSD
/// plus nonnegative.
pub fn dnn_schedule(spec: &MomentSpec, horizon: f64, mode: CovarianceMode, settings: &Settings) -> Result<ScheduleResult> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let (mut b, fb) = dnn_problem(spec, mode, None);
    let p: Vec<Terms> = (0..spec.n()).map(|i| fb.p(&b, i)).collect();
    let rows = add_epigraph(&mut b, &p, horizon);
    let sol = solve_checked(&b.build()?, settings)?;
    let schedule = schedule_from_multipliers(&sol, &rows, horizon);
    Ok(ScheduleResult { schedule, value: sol.dual_objective, formulation: Formulation::Dnn, stats: SolveStats::of(&sol), certificate: None })
}
