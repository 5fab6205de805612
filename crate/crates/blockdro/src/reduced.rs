//! The reduced SDP: one PSD block `[[1, mu', p'], [mu, Pi, Y'], [p, Y, X]]` per moment block,
//! coupled through a convex-hull representation of `(p, X^1, ..., X^R)`.

use crate::chull::{ChullRep, HullVar};
use crate::error::{Error, Result};
use crate::facial::{affine_kernel, eliminate, kernel_vectors, CoordMap};
use crate::moments::MomentSpec;
use blockdro_conic::{solve, BlockSdpProblem, ProblemBuilder, SdpSolution, Settings, Status, Var};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub status: Status,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl SolveStats {
    pub fn of(sol: &SdpSolution) -> Self {
        Self {
            status: sol.status,
            iterations: sol.iterations,
            primal_objective: sol.primal_objective,
            dual_objective: sol.dual_objective,
            gap: sol.gap,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
        }
    }
}

/// Solves and accepts `Optimal`, or a stalled iterate within 100x the requested tolerances.
pub fn solve_checked(problem: &BlockSdpProblem, settings: &Settings) -> Result<SdpSolution> {
    let sol = solve(problem, settings)?;
    let close = sol.gap <= 100.0 * settings.gap_tol
        && sol.primal_residual <= 100.0 * settings.feas_tol
        && sol.dual_residual <= 100.0 * settings.feas_tol;
    match sol.status {
        Status::Optimal => Ok(sol),
        Status::MaxIterations | Status::NumericalFailure if close => Ok(sol),
        status => Err(Error::SolveFailed {
            status,
            gap: sol.gap,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
        }),
    }
}

#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub z_star: f64,
    pub p: Vec<f64>,
    pub x_blocks: Vec<DMatrix<f64>>,
    /// `Y^r[a][b]` estimates `E[x_a c_b]` within block `r`.
    pub y_blocks: Vec<DMatrix<f64>>,
    /// The full `(1 + 2 n_r)` blocks.
    pub blocks: Vec<DMatrix<f64>>,
    pub aux: Vec<f64>,
    pub stats: SolveStats,
}

/// Row indices of the fixed corner `[[1, mu'], [mu, Pi]]` of one block, in block coordinates
/// (`0` is the constant, `1 + a` is `c_a`). Coordinates removed by facial reduction have no rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CornerRows {
    pub one: usize,
    pub mu: Vec<usize>,
    /// `(a, b, row)` for `a <= b`.
    pub pi: Vec<(usize, usize, usize)>,
}

/// A linear expression over builder variables.
pub type Terms = Vec<(Var, f64)>;

/// The assembled problem with its variable and row maps; callers may append rows and
/// variables to `builder` before solving.
///
/// A block whose corner `[[1, mu'], [mu, Pi]]` is singular (perfectly correlated moments), or
/// whose `x^r` satisfies an equality on all of `X`, is stored in the coordinates left after
/// eliminating the pinned entries.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub builder: ProblemBuilder,
    pub rep: ChullRep,
    pub aux_vars: Vec<Var>,
    pub hull_rows: Vec<usize>,
    pub corner_rows: Vec<CornerRows>,
    blocks: Vec<usize>,
    maps: Vec<CoordMap>,
}

impl ReducedModel {
    pub fn new(spec: &MomentSpec, rep: &ChullRep, linear_offset: Option<&[f64]>) -> Result<Self> {
        if spec.partition() != &rep.partition {
            return Err(Error::PartitionMismatch(format!(
                "moments have {} blocks over n = {}, representation has {} over n = {}",
                spec.partition().len(),
                spec.n(),
                rep.partition.len(),
                rep.n()
            )));
        }
        if let Some(off) = linear_offset {
            if off.len() != spec.n() {
                return Err(Error::DimensionMismatch(format!("offset has length {}, n = {}", off.len(), spec.n())));
            }
        }
        let part = spec.partition();
        let mut builder = ProblemBuilder::new();
        let mut blocks = Vec::with_capacity(part.len());
        let mut maps = Vec::with_capacity(part.len());
        let mut corners = Vec::with_capacity(part.len());
        for (r, b) in part.blocks().iter().enumerate() {
            let nr = b.len();
            let corner = corner_matrix(spec, r);
            let dim = 1 + 2 * nr;
            let mut kernel = kernel_vectors(&corner, &(0..=nr).collect::<Vec<_>>(), dim);
            kernel.extend(rep.block_affine(r).into_iter().map(|(a, beta)| affine_kernel(&a, beta, 1 + nr, dim)));
            let map = eliminate(kernel, dim, &(1..dim).collect::<Vec<_>>());
            blocks.push(builder.add_psd(map.reduced_order()));
            maps.push(map);
            corners.push(corner);
        }
        let mut model = Self {
            builder,
            rep: rep.clone(),
            aux_vars: Vec::new(),
            hull_rows: Vec::new(),
            corner_rows: Vec::new(),
            blocks,
            maps,
        };
        for (r, b) in part.blocks().iter().enumerate() {
            let nr = b.len();
            let corner = &corners[r];
            let fix = |m: &mut Self, i: usize, j: usize| {
                let terms = m.block_entry(r, i, j);
                m.builder.add_row(terms, corner[(i, j)])
            };
            let one = fix(&mut model, 0, 0);
            let kept_c: Vec<usize> = (1..=nr).filter(|&i| model.maps[r].position(i).is_some()).collect();
            let mu = kept_c.iter().map(|&i| fix(&mut model, 0, i)).collect();
            let mut pi = Vec::new();
            for (x, &i) in kept_c.iter().enumerate() {
                for &j in &kept_c[x..] {
                    pi.push((i - 1, j - 1, fix(&mut model, i, j)));
                }
            }
            model.corner_rows.push(CornerRows { one, mu, pi });
            for a in 0..nr {
                for (v, c) in model.block_entry(r, 1 + nr + a, 1 + a) {
                    model.builder.add_objective(v, c);
                }
            }
        }
        model.aux_vars = (0..rep.aux.len()).map(|_| model.builder.add_nonneg()).collect();
        if let Some(off) = linear_offset {
            for (i, &o) in off.iter().enumerate() {
                if o != 0.0 {
                    for (v, c) in model.p_terms(i) {
                        model.builder.add_objective(v, -o * c);
                    }
                }
            }
        }
        for row in &rep.rows {
            let terms = row.terms.iter().flat_map(|&(v, c)| model.hull_terms(v).into_iter().map(move |(w, d)| (w, c * d))).collect();
            let idx = model.builder.add_row(terms, row.rhs);
            model.hull_rows.push(idx);
        }
        for &v in &rep.nonneg {
            let slack = model.builder.add_nonneg();
            let mut terms = model.hull_terms(v);
            terms.push((slack, -1.0));
            model.builder.add_row(terms, 0.0);
        }
        Ok(model)
    }

    /// Whether block `r` was facially reduced.
    pub fn is_reduced(&self, r: usize) -> bool {
        !self.maps[r].is_identity()
    }

    /// Entry `(i, j)` of block `r` in the original coordinates `[1, c^r, x^r]`.
    pub fn block_entry(&self, r: usize, i: usize, j: usize) -> Terms {
        self.maps[r]
            .entry_terms(i, j)
            .into_iter()
            .map(|(k, l, c)| (self.builder.entry(self.blocks[r], k, l), c))
            .collect()
    }

    pub fn hull_terms(&self, v: HullVar) -> Terms {
        match v {
            HullVar::P(i) => self.p_terms(i),
            HullVar::X { block, a, b } => {
                let nr = self.rep.partition.block(block).len();
                self.block_entry(block, 1 + nr + a, 1 + nr + b)
            }
            HullVar::Aux(k) => vec![(self.aux_vars[k], 1.0)],
        }
    }

    pub fn p_terms(&self, i: usize) -> Terms {
        let (r, a) = self.rep.partition.locate(i);
        let nr = self.rep.partition.block(r).len();
        self.block_entry(r, 0, 1 + nr + a)
    }

    pub fn build(&self) -> Result<BlockSdpProblem> {
        Ok(self.builder.build()?)
    }

    pub fn solve(&self, settings: &Settings) -> Result<(SdpSolution, ReducedSolution)> {
        let sol = solve_checked(&self.build()?, settings)?;
        let red = self.extract(&sol)?;
        Ok((sol, red))
    }

    pub fn extract(&self, sol: &SdpSolution) -> Result<ReducedSolution> {
        let cone = self.builder.cone();
        let part = &self.rep.partition;
        let mut p = vec![0.0; part.n()];
        let mut x_blocks = Vec::new();
        let mut y_blocks = Vec::new();
        let mut blocks = Vec::new();
        for (r, b) in part.blocks().iter().enumerate() {
            let nr = b.len();
            let small = sol.psd_block(&cone, self.blocks[r])?;
            let m = if self.maps[r].is_identity() {
                small
            } else {
                let l = self.maps[r].lift_matrix();
                &l * small * l.transpose()
            };
            for (a, &i) in b.iter().enumerate() {
                p[i] = m[(0, 1 + nr + a)];
            }
            x_blocks.push(m.view((1 + nr, 1 + nr), (nr, nr)).into_owned());
            y_blocks.push(m.view((1 + nr, 1), (nr, nr)).into_owned());
            blocks.push(m);
        }
        let aux = self.aux_vars.iter().map(|&v| self.builder.value(sol, v)).collect();
        Ok(ReducedSolution {
            z_star: sol.primal_objective,
            p,
            x_blocks,
            y_blocks,
            blocks,
            aux,
            stats: SolveStats::of(sol),
        })
    }
}

/// `[[1, mu^r'], [mu^r, Pi^r]]`.
pub fn corner_matrix(spec: &MomentSpec, r: usize) -> DMatrix<f64> {
    let mu = spec.mu_block(r);
    let nr = mu.len();
    DMatrix::from_fn(1 + nr, 1 + nr, |i, j| match (i, j) {
        (0, 0) => 1.0,
        (0, j) => mu[j - 1],
        (i, 0) => mu[i - 1],
        (i, j) => spec.pi()[r][(i - 1, j - 1)],
    })
}

pub fn build(spec: &MomentSpec, rep: &ChullRep, linear_offset: Option<&[f64]>) -> Result<BlockSdpProblem> {
    ReducedModel::new(spec, rep, linear_offset)?.build()
}

pub fn solve_bound(
    spec: &MomentSpec,
    rep: &ChullRep,
    linear_offset: Option<&[f64]>,
    settings: &Settings,
) -> Result<ReducedSolution> {
    Ok(ReducedModel::new(spec, rep, linear_offset)?.solve(settings)?.1)
}
