//! Infeasible primal-dual path-following method with the HKM search direction and
//! Mehrotra predictor-corrector steps. The Newton system is reduced to the dense Schur
//! complement `M = A H A'` over the equality rows; free variables border that system.

use crate::cone::{pack_into, packed_len, packed_position, unpack, ConeStructure};
use crate::linalg::{ldl_solve_quasidefinite, max_step_nonneg, max_step_psd};
use crate::problem::{BlockSdpProblem, SdpSolution, Settings, SolverError, Status};
use crate::sparse::SparseMatrix;
use nalgebra::{Cholesky, DMatrix, DVector};
use std::collections::HashMap;
use std::f64::consts::SQRT_2;

pub fn solve(problem: &BlockSdpProblem, settings: &Settings) -> Result<SdpSolution, SolverError> {
    problem.check()?;
    let pre = presolve(problem);
    let n = problem.cone.dim();
    if let Some(status) = pre.inconsistent {
        return Ok(SdpSolution {
            status,
            x: vec![0.0; n],
            y: vec![0.0; problem.b.len()],
            z: vec![0.0; n],
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            gap: f64::INFINITY,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            iterations: 0,
        });
    }
    let mut ws = Workspace::new(problem, &pre);
    let out = ws.run(settings, &pre.row_scale, norm(&problem.b), norm(&problem.objective));
    Ok(ws.finish(problem, &pre, out))
}

struct Presolved {
    kept: Vec<usize>,
    row_scale: Vec<f64>,
    inconsistent: Option<Status>,
}

/// Drops empty, duplicated and linearly dependent rows and normalizes the rest to unit length.
fn presolve(p: &BlockSdpProblem) -> Presolved {
    let mut kept = Vec::new();
    let mut row_scale = Vec::new();
    let mut seen: HashMap<Vec<(usize, u64)>, (usize, f64)> = HashMap::new();
    for r in 0..p.a.nrows() {
        let norm: f64 = p.a.row(r).map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            if p.b[r].abs() > 1e-12 {
                return Presolved { kept, row_scale, inconsistent: Some(Status::PrimalInfeasible) };
            }
            continue;
        }
        let sign = p.a.row(r).next().map(|(_, v)| v.signum()).unwrap_or(1.0);
        let s = sign / norm;
        let key: Vec<(usize, u64)> = p.a.row(r).map(|(c, v)| (c, (v * s).to_bits())).collect();
        let rhs = p.b[r] * s;
        if let Some(&(_, other)) = seen.get(&key) {
            if (other - rhs).abs() > 1e-12 * (1.0 + rhs.abs()) {
                return Presolved { kept, row_scale, inconsistent: Some(Status::PrimalInfeasible) };
            }
            continue;
        }
        seen.insert(key, (r, rhs));
        kept.push(r);
        row_scale.push(s);
    }
    let rows: Vec<Vec<(usize, f64)>> =
        kept.iter().zip(&row_scale).map(|(&r, &s)| p.a.row(r).map(|(c, v)| (c, v * s)).collect()).collect();
    let rhs: Vec<f64> = kept.iter().zip(&row_scale).map(|(&r, &s)| p.b[r] * s).collect();
    match independent_rows(&rows, &rhs, p.a.ncols()) {
        Some(keep) => Presolved {
            kept: keep.iter().map(|&i| kept[i]).collect(),
            row_scale: keep.iter().map(|&i| row_scale[i]).collect(),
            inconsistent: None,
        },
        None => Presolved { kept, row_scale, inconsistent: Some(Status::PrimalInfeasible) },
    }
}

/// Squared distance below which a unit row counts as a combination of earlier rows.
const DEPENDENT_TOL: f64 = 1e-12;

/// Indices of a maximal independent subset of unit-norm rows, by pivoted Cholesky of the Gram
/// matrix; `None` if a dropped row's right-hand side disagrees with the kept rows.
fn independent_rows(rows: &[Vec<(usize, f64)>], b: &[f64], ncols: usize) -> Option<Vec<usize>> {
    let m = rows.len();
    if m == 0 {
        return Some(Vec::new());
    }
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            cols[c].push((r, v));
        }
    }
    let mut g = DMatrix::<f64>::zeros(m, m);
    for col in &cols {
        for &(i, u) in col {
            for &(j, v) in col {
                g[(i, j)] += u * v;
            }
        }
    }
    // right-looking pivoted Cholesky on a copy, recording the pivot order
    let mut w = g.clone();
    let mut order: Vec<usize> = (0..m).collect();
    let mut rank = 0;
    while rank < m {
        let dmax = (rank..m).map(|k| w[(order[k], order[k])]).fold(f64::NEG_INFINITY, f64::max);
        if dmax <= DEPENDENT_TOL {
            break;
        }
        // earliest row with a reasonable pivot, so later copies are the ones dropped
        let best = (rank..m).find(|&k| w[(order[k], order[k])] >= 0.5 * dmax).unwrap_or(rank);
        order[rank..=best].rotate_right(1);
        let p = order[rank];
        let d = w[(p, p)].sqrt();
        for k in rank..m {
            let i = order[k];
            w[(i, p)] /= d;
        }
        for k in rank + 1..m {
            let i = order[k];
            let li = w[(i, p)];
            if li == 0.0 {
                continue;
            }
            for l in rank + 1..=k {
                let j = order[l];
                let v = li * w[(j, p)];
                w[(i, j)] -= v;
                if i != j {
                    w[(j, i)] -= v;
                }
            }
        }
        rank += 1;
    }
    if rank == m {
        return Some((0..m).collect());
    }
    let mut keep: Vec<usize> = order[..rank].to_vec();
    keep.sort_unstable();
    let gk = DMatrix::from_fn(rank, rank, |i, j| g[(keep[i], keep[j])]);
    let chol = Cholesky::new(gk)?;
    for &d in &order[rank..] {
        let rhs = DVector::from_fn(rank, |i, _| g[(keep[i], d)]);
        let lambda = chol.solve(&rhs);
        let pred: f64 = (0..rank).map(|i| lambda[i] * b[keep[i]]).sum();
        let scale: f64 = 1.0 + b[d].abs() + (0..rank).map(|i| (lambda[i] * b[keep[i]]).abs()).sum::<f64>();
        if (pred - b[d]).abs() > 1e-8 * scale {
            return None;
        }
    }
    Some(keep)
}

struct PsdBlock {
    k: usize,
    offset: usize,
    /// Rows touching the block with the symmetric matrix entries `(i, j, A_ij)`, both triangles listed.
    rows: Vec<(usize, Vec<(usize, usize, f64)>)>,
}

struct Workspace {
    m: usize,
    n: usize,
    cone: ConeStructure,
    a: SparseMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    bscale: f64,
    cscale: f64,
    nonneg_cols: Vec<Vec<(usize, f64)>>,
    free_cols: Vec<Vec<(usize, f64)>>,
    blocks: Vec<PsdBlock>,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

struct RunOutcome {
    status: Status,
    iterations: usize,
}

struct Metrics {
    pobj: f64,
    dobj: f64,
    gap: f64,
    pres: f64,
    dres: f64,
}

impl Workspace {
    fn new(p: &BlockSdpProblem, pre: &Presolved) -> Self {
        let n = p.cone.dim();
        let rows: Vec<Vec<(usize, f64)>> = pre
            .kept
            .iter()
            .zip(&pre.row_scale)
            .map(|(&r, &s)| p.a.row(r).map(|(c, v)| (c, v * s)).collect())
            .collect();
        let mut b: Vec<f64> = pre.kept.iter().zip(&pre.row_scale).map(|(&r, &s)| p.b[r] * s).collect();
        // internal form is a minimization of -objective
        let mut c: Vec<f64> = p.objective.iter().map(|v| -v).collect();
        let bscale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let cscale = c.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        b.iter_mut().for_each(|v| *v /= bscale);
        c.iter_mut().for_each(|v| *v /= cscale);
        let a = SparseMatrix::from_rows(n, rows);
        let m = a.nrows();
        let cone = p.cone.clone();

        let nonneg_start = cone.n_free;
        let psd_start = cone.n_free + cone.n_nonneg;
        let mut free_cols = vec![Vec::new(); cone.n_free];
        let mut nonneg_cols = vec![Vec::new(); cone.n_nonneg];
        let mut blocks: Vec<PsdBlock> = cone
            .psd_block_sizes
            .iter()
            .enumerate()
            .map(|(bi, &k)| PsdBlock { k, offset: cone.psd_offset(bi), rows: Vec::new() })
            .collect();
        let block_of_col: Vec<usize> = {
            let mut v = Vec::with_capacity(n - psd_start);
            for (bi, &k) in cone.psd_block_sizes.iter().enumerate() {
                v.extend(std::iter::repeat(bi).take(packed_len(k)));
            }
            v
        };
        for r in 0..m {
            let mut touched: Vec<(usize, Vec<(usize, usize, f64)>)> = Vec::new();
            for (col, v) in a.row(r) {
                if col < nonneg_start {
                    free_cols[col].push((r, v));
                } else if col < psd_start {
                    nonneg_cols[col - nonneg_start].push((r, v));
                } else {
                    let bi = block_of_col[col - psd_start];
                    let (i, j) = packed_position(col - blocks[bi].offset);
                    let entry = match touched.iter_mut().find(|t| t.0 == bi) {
                        Some(t) => t,
                        None => {
                            touched.push((bi, Vec::new()));
                            touched.last_mut().unwrap()
                        }
                    };
                    if i == j {
                        entry.1.push((i, i, v));
                    } else {
                        entry.1.push((i, j, v / SQRT_2));
                        entry.1.push((j, i, v / SQRT_2));
                    }
                }
            }
            for (bi, entries) in touched {
                blocks[bi].rows.push((r, entries));
            }
        }

        let mut ws = Self {
            m,
            n,
            cone,
            a,
            b,
            c,
            bscale,
            cscale,
            nonneg_cols,
            free_cols,
            blocks,
            x: vec![0.0; n],
            y: vec![0.0; m],
            z: vec![0.0; n],
        };
        ws.initial_point();
        ws
    }

    fn initial_point(&mut self) {
        let nl = self.cone.n_nonneg;
        let off = self.cone.n_free;
        if nl > 0 {
            let mut ratio: f64 = 0.0;
            let mut norm_a: f64 = 0.0;
            for r in 0..self.m {
                let an: f64 = self.a.row(r).filter(|(c, _)| *c >= off && *c < off + nl).map(|(_, v)| v * v).sum::<f64>().sqrt();
                ratio = ratio.max((1.0 + self.b[r].abs()) / (1.0 + an));
                norm_a = norm_a.max(an);
            }
            let cn = self.c[off..off + nl].iter().map(|v| v * v).sum::<f64>().sqrt();
            let s = (nl as f64).sqrt();
            let xi = 10f64.max(s).max(s * ratio);
            let eta = 10f64.max(s).max(norm_a).max(cn);
            for j in 0..nl {
                self.x[off + j] = xi;
                self.z[off + j] = eta;
            }
        }
        for blk in &self.blocks {
            let k = blk.k;
            let mut ratio: f64 = 0.0;
            let mut norm_a: f64 = 0.0;
            for (r, entries) in &blk.rows {
                let an = entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
                ratio = ratio.max((1.0 + self.b[*r].abs()) / (1.0 + an));
                norm_a = norm_a.max(an);
            }
            let cmat = unpack(k, &self.c[blk.offset..blk.offset + packed_len(k)]);
            let s = (k as f64).sqrt();
            let xi = 10f64.max(s).max(k as f64 * ratio);
            let eta = 10f64.max(s).max(norm_a).max(cmat.norm());
            for i in 0..k {
                let idx = blk.offset + crate::cone::packed_index(i, i);
                self.x[idx] = xi;
                self.z[idx] = eta;
            }
        }
    }

    fn metrics(&self, bnorm: f64, cnorm: f64, orig_rows: &[f64]) -> Metrics {
        let ax = self.a.mul_vec(&self.x);
        let pres: f64 =
            ax.iter().zip(&self.b).zip(orig_rows).map(|((ax, b), s)| ((b - ax) * self.bscale / s).powi(2)).sum::<f64>().sqrt();
        let aty = self.a.tr_mul_vec(&self.y);
        let dres: f64 =
            (0..self.n).map(|j| ((self.c[j] - aty[j] - self.z[j]) * self.cscale).powi(2)).sum::<f64>().sqrt();
        let scale = self.bscale * self.cscale;
        let pobj = -scale * dot(&self.c, &self.x);
        let dobj = -scale * dot(&self.b, &self.y);
        Metrics {
            pobj,
            dobj,
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
            pres: pres / (1.0 + bnorm),
            dres: dres / (1.0 + cnorm),
        }
    }

    fn run(&mut self, st: &Settings, row_scale: &[f64], bnorm: f64, cnorm: f64) -> RunOutcome {
        let nu = self.cone.degree().max(1) as f64;
        let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
        let mut step_fraction = 0.9;
        let mut slow = 0usize;
        let mut anchor = f64::INFINITY;
        for iter in 0..=st.max_iterations {
            let met = self.metrics(bnorm, cnorm, row_scale);
            let merit = met.gap.max(met.pres).max(met.dres);
            if st.verbose {
                eprintln!(
                    "{iter:4} pobj {:+.9e} dobj {:+.9e} gap {:.2e} pres {:.2e} dres {:.2e}",
                    met.pobj, met.dobj, met.gap, met.pres, met.dres
                );
            }
            if !merit.is_finite() {
                return self.fallback(best, Status::NumericalFailure, iter);
            }
            if best.as_ref().map_or(true, |b| merit < b.0) {
                best = Some((merit, self.x.clone(), self.y.clone(), self.z.clone()));
            }
            if met.gap <= st.gap_tol && met.pres <= st.feas_tol && met.dres <= st.feas_tol {
                return RunOutcome { status: Status::Optimal, iterations: iter };
            }
            if let Some(status) = self.certificate() {
                return RunOutcome { status, iterations: iter };
            }
            if iter == st.max_iterations {
                return self.fallback(best, Status::MaxIterations, iter);
            }
            // stalled when the merit has not halved within 30 iterations
            if merit > 0.5 * anchor {
                slow += 1;
            } else {
                slow = 0;
                anchor = merit;
            }
            if slow > 30 {
                return self.fallback(best, Status::NumericalFailure, iter);
            }

            let Some(newton) = NewtonSystem::factor(self, st.regularization) else {
                return self.fallback(best, Status::NumericalFailure, iter);
            };
            let mu = self.complementarity() / nu;
            let rp: Vec<f64> = self.a.mul_vec(&self.x).iter().zip(&self.b).map(|(ax, b)| b - ax).collect();
            let aty = self.a.tr_mul_vec(&self.y);
            let mut rd: Vec<f64> = (0..self.n).map(|j| self.c[j] - aty[j] - self.z[j]).collect();
            rd[..self.cone.n_free].iter_mut().zip(&aty).zip(&self.c).for_each(|((r, a), c)| *r = c - a);

            // predictor
            let r_aff: Vec<f64> = self.x.iter().map(|v| -v).collect();
            let (dx_a, dy_a, dz_a) = newton.direction(self, &rp, &rd, &r_aff);
            let ap = (self.max_primal_step(&newton, &dx_a)).min(1.0);
            let ad = (self.max_dual_step(&newton, &dz_a)).min(1.0);
            let _ = dy_a;
            let mu_aff = {
                let xs: Vec<f64> = self.x.iter().zip(&dx_a).map(|(x, d)| x + ap * d).collect();
                let zs: Vec<f64> = self.z.iter().zip(&dz_a).map(|(z, d)| z + ad * d).collect();
                cone_dot(&self.cone, &xs, &zs) / nu
            };
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let r_cor = newton.corrector_rhs(self, sigma * mu, &dx_a, &dz_a);
            let (dx, dy, dz) = newton.direction(self, &rp, &rd, &r_cor);
            let ap = (step_fraction * self.max_primal_step(&newton, &dx)).min(1.0);
            let ad = (step_fraction * self.max_dual_step(&newton, &dz)).min(1.0);
            if ap < 1e-12 && ad < 1e-12 {
                return self.fallback(best, Status::NumericalFailure, iter);
            }
            for j in 0..self.n {
                self.x[j] += ap * dx[j];
                self.z[j] += ad * dz[j];
            }
            for i in 0..self.m {
                self.y[i] += ad * dy[i];
            }
            self.z[..self.cone.n_free].iter_mut().for_each(|v| *v = 0.0);
            step_fraction = (0.9 + 0.09 * ap.min(ad)).clamp(0.9, 0.99);
        }
        unreachable!()
    }

    fn fallback(&mut self, best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)>, status: Status, iterations: usize) -> RunOutcome {
        if let Some((_, x, y, z)) = best {
            self.x = x;
            self.y = y;
            self.z = z;
        }
        RunOutcome { status, iterations }
    }

    fn complementarity(&self) -> f64 {
        cone_dot(&self.cone, &self.x, &self.z)
    }

    /// Detects diverging iterates that approximate a Farkas certificate.
    fn certificate(&self) -> Option<Status> {
        let by = dot(&self.b, &self.y);
        let ynorm = self.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if by > 0.0 && ynorm > 1e9 {
            let aty = self.a.tr_mul_vec(&self.y);
            let res: f64 = (0..self.n)
                .map(|j| if j < self.cone.n_free { aty[j] } else { aty[j] + self.z[j] })
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if res <= 1e-6 * by {
                return Some(Status::PrimalInfeasible);
            }
        }
        let cx = dot(&self.c, &self.x);
        let xnorm = self.x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if cx < 0.0 && xnorm > 1e9 {
            let ax = self.a.mul_vec(&self.x);
            let res = ax.iter().map(|v| v * v).sum::<f64>().sqrt();
            if res <= -1e-6 * cx {
                return Some(Status::DualInfeasible);
            }
        }
        None
    }

    fn max_primal_step(&self, nt: &NewtonSystem, dx: &[f64]) -> f64 {
        let off = self.cone.n_free;
        let nl = self.cone.n_nonneg;
        let mut a = max_step_nonneg(&self.x[off..off + nl], &dx[off..off + nl]);
        for (bi, blk) in self.blocks.iter().enumerate() {
            let d = unpack(blk.k, &dx[blk.offset..blk.offset + packed_len(blk.k)]);
            a = a.min(max_step_psd(&nt.x_chol[bi], &d));
        }
        a
    }

    fn max_dual_step(&self, nt: &NewtonSystem, dz: &[f64]) -> f64 {
        let off = self.cone.n_free;
        let nl = self.cone.n_nonneg;
        let mut a = max_step_nonneg(&self.z[off..off + nl], &dz[off..off + nl]);
        for (bi, blk) in self.blocks.iter().enumerate() {
            let d = unpack(blk.k, &dz[blk.offset..blk.offset + packed_len(blk.k)]);
            a = a.min(max_step_psd(&nt.z_chol[bi], &d));
        }
        a
    }

    fn finish(self, p: &BlockSdpProblem, pre: &Presolved, out: RunOutcome) -> SdpSolution {
        let n = p.cone.dim();
        let x: Vec<f64> = self.x.iter().map(|v| v * self.bscale).collect();
        let mut y = vec![0.0; p.b.len()];
        for (i, (&r, &s)) in pre.kept.iter().zip(&pre.row_scale).enumerate() {
            y[r] = -self.y[i] * s * self.cscale;
        }
        let z: Vec<f64> = self.z.iter().map(|v| v * self.cscale).collect();
        let ax = p.a.mul_vec(&x);
        let aty = p.a.tr_mul_vec(&y);
        let bnorm = norm(&p.b);
        let cnorm = norm(&p.objective);
        let pres = ax.iter().zip(&p.b).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt() / (1.0 + bnorm);
        let dres = (0..n).map(|j| (aty[j] - p.objective[j] - z[j]).powi(2)).sum::<f64>().sqrt() / (1.0 + cnorm);
        let pobj = dot(&p.objective, &x);
        let dobj = dot(&p.b, &y);
        SdpSolution {
            status: out.status,
            x,
            y,
            z,
            primal_objective: pobj,
            dual_objective: dobj,
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
            primal_residual: pres,
            dual_residual: dres,
            iterations: out.iterations,
        }
    }
}

/// Per-iteration factorizations: block Cholesky factors of `X`, `Z`, the inverse `Z^{-1}`,
/// and the factored Schur complement.
struct NewtonSystem {
    x_mat: Vec<DMatrix<f64>>,
    z_inv: Vec<DMatrix<f64>>,
    x_chol: Vec<DMatrix<f64>>,
    z_chol: Vec<DMatrix<f64>>,
    schur: SchurFactor,
}

enum SchurFactor {
    Cholesky { m: DMatrix<f64>, chol: Cholesky<f64, nalgebra::Dyn> },
    Lu { m: DMatrix<f64>, lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn> },
    Bordered { k: DMatrix<f64>, reg: f64 },
}

impl NewtonSystem {
    fn factor(ws: &Workspace, reg: f64) -> Option<Self> {
        let mut x_mat = Vec::with_capacity(ws.blocks.len());
        let mut z_inv = Vec::with_capacity(ws.blocks.len());
        let mut x_chol = Vec::with_capacity(ws.blocks.len());
        let mut z_chol = Vec::with_capacity(ws.blocks.len());
        for blk in &ws.blocks {
            let len = packed_len(blk.k);
            let xm = unpack(blk.k, &ws.x[blk.offset..blk.offset + len]);
            let zm = unpack(blk.k, &ws.z[blk.offset..blk.offset + len]);
            let xc = xm.clone().cholesky()?;
            let zc = zm.clone().cholesky()?;
            let zi = zc.inverse();
            x_chol.push(xc.l());
            z_chol.push(zc.l());
            x_mat.push(xm);
            z_inv.push(zi);
        }

        let m = ws.m;
        let mut schur = DMatrix::<f64>::zeros(m, m);
        let off = ws.cone.n_free;
        for (j, col) in ws.nonneg_cols.iter().enumerate() {
            let h = ws.x[off + j] / ws.z[off + j];
            for (a, &(ra, va)) in col.iter().enumerate() {
                let hv = h * va;
                for &(rb, vb) in &col[a..] {
                    schur[(ra, rb)] += hv * vb;
                }
            }
        }
        for (bi, blk) in ws.blocks.iter().enumerate() {
            let xm = &x_mat[bi];
            let zi = &z_inv[bi];
            let k = blk.k;
            let mut g = DMatrix::<f64>::zeros(k, k);
            for (a, (ra, ea)) in blk.rows.iter().enumerate() {
                g.fill(0.0);
                for &(p, q, v) in ea {
                    for col in 0..k {
                        let zq = v * zi[(q, col)];
                        if zq == 0.0 {
                            continue;
                        }
                        for row in 0..k {
                            g[(row, col)] += xm[(row, p)] * zq;
                        }
                    }
                }
                for (rb, eb) in &blk.rows[a..] {
                    let val: f64 = eb.iter().map(|&(p, q, w)| w * g[(p, q)]).sum();
                    schur[(*ra, *rb)] += val;
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                schur[(i, j)] = schur[(j, i)];
            }
        }
        let maxdiag = (0..m).map(|i| schur[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
        // near the optimum M can lose definiteness to rounding; pivoted LU of the unshifted M
        // comes first, since a diagonal shift stalls refinement when M is badly conditioned
        let factor = if ws.cone.n_free == 0 {
            if let Some(chol) = schur.clone().cholesky() {
                SchurFactor::Cholesky { m: schur, chol }
            } else if let Some(lu) = Some(schur.clone().lu()).filter(|lu| lu.is_invertible()) {
                SchurFactor::Lu { m: schur, lu }
            } else {
                let mut delta = reg * maxdiag;
                loop {
                    let mut mr = schur.clone();
                    for i in 0..m {
                        mr[(i, i)] += delta;
                    }
                    if let Some(chol) = mr.cholesky() {
                        break SchurFactor::Cholesky { m: schur, chol };
                    }
                    delta *= 100.0;
                    if delta > 1e-2 * maxdiag {
                        return None;
                    }
                }
            }
        } else {
            let nf = ws.cone.n_free;
            let mut k = DMatrix::<f64>::zeros(m + nf, m + nf);
            k.view_mut((0, 0), (m, m)).copy_from(&schur);
            for (j, col) in ws.free_cols.iter().enumerate() {
                for &(r, v) in col {
                    k[(r, m + j)] = v;
                    k[(m + j, r)] = v;
                }
            }
            SchurFactor::Bordered { k, reg: (reg * maxdiag).max(1e-14) }
        };
        Some(Self { x_mat, z_inv, x_chol, z_chol, schur: factor })
    }

    /// `H(v)`: the linearized map `dx = R - H(dz)`, applied to the cone part of `v`.
    fn apply_h(&self, ws: &Workspace, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; ws.n];
        let off = ws.cone.n_free;
        for j in 0..ws.cone.n_nonneg {
            out[off + j] = ws.x[off + j] / ws.z[off + j] * v[off + j];
        }
        for (bi, blk) in ws.blocks.iter().enumerate() {
            let len = packed_len(blk.k);
            let vm = unpack(blk.k, &v[blk.offset..blk.offset + len]);
            let t = &self.x_mat[bi] * vm * &self.z_inv[bi];
            let s = (&t + t.transpose()) * 0.5;
            pack_into(&s, &mut out[blk.offset..blk.offset + len]);
        }
        out
    }

    fn corrector_rhs(&self, ws: &Workspace, target: f64, dx_a: &[f64], dz_a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; ws.n];
        let off = ws.cone.n_free;
        for j in off..off + ws.cone.n_nonneg {
            out[j] = (target - dx_a[j] * dz_a[j]) / ws.z[j] - ws.x[j];
        }
        for (bi, blk) in ws.blocks.iter().enumerate() {
            let len = packed_len(blk.k);
            let dxm = unpack(blk.k, &dx_a[blk.offset..blk.offset + len]);
            let dzm = unpack(blk.k, &dz_a[blk.offset..blk.offset + len]);
            let t = dxm * dzm * &self.z_inv[bi];
            let r = &self.z_inv[bi] * target - &self.x_mat[bi] - (&t + t.transpose()) * 0.5;
            pack_into(&r, &mut out[blk.offset..blk.offset + len]);
        }
        out
    }

    fn direction(&self, ws: &Workspace, rp: &[f64], rd: &[f64], r: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let nf = ws.cone.n_free;
        let mut cone_r = r.to_vec();
        cone_r[..nf].iter_mut().for_each(|v| *v = 0.0);
        let h_rd = self.apply_h(ws, rd);
        let ar = ws.a.mul_vec(&cone_r);
        let ahrd = ws.a.mul_vec(&h_rd);
        let rhs: Vec<f64> = (0..ws.m).map(|i| rp[i] - ar[i] + ahrd[i]).collect();
        let (dy, dxf) = self.solve_schur(ws, &rhs, &rd[..nf]);
        let atdy = ws.a.tr_mul_vec(&dy);
        let mut dz: Vec<f64> = (0..ws.n).map(|j| rd[j] - atdy[j]).collect();
        dz[..nf].iter_mut().for_each(|v| *v = 0.0);
        let hdz = self.apply_h(ws, &dz);
        let mut dx: Vec<f64> = (0..ws.n).map(|j| cone_r[j] - hdz[j]).collect();
        dx[..nf].copy_from_slice(&dxf);
        (dx, dy, dz)
    }

    fn solve_schur(&self, ws: &Workspace, rhs: &[f64], rhs_free: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match &self.schur {
            SchurFactor::Cholesky { m, chol } => {
                let b = DVector::from_column_slice(rhs);
                let mut sol = chol.solve(&b);
                let bn = b.norm();
                let mut last = f64::INFINITY;
                for _ in 0..20 {
                    let res = &b - m * &sol;
                    let rn = res.norm();
                    if rn <= 1e-15 * bn || rn >= 0.5 * last {
                        break;
                    }
                    last = rn;
                    sol += chol.solve(&res);
                }
                (sol.iter().copied().collect(), Vec::new())
            }
            SchurFactor::Lu { m, lu } => {
                let b = DVector::from_column_slice(rhs);
                let Some(mut sol) = lu.solve(&b) else { return (vec![f64::NAN; ws.m], Vec::new()) };
                let bn = b.norm();
                let mut last = f64::INFINITY;
                for _ in 0..20 {
                    let res = &b - m * &sol;
                    let rn = res.norm();
                    if rn <= 1e-15 * bn || rn >= 0.5 * last {
                        break;
                    }
                    last = rn;
                    if let Some(d) = lu.solve(&res) {
                        sol += d;
                    }
                }
                (sol.iter().copied().collect(), Vec::new())
            }
            SchurFactor::Bordered { k, reg } => {
                let mut b = rhs.to_vec();
                b.extend_from_slice(rhs_free);
                let sol = ldl_solve_quasidefinite(k, ws.m, *reg, &b);
                (sol[..ws.m].to_vec(), sol[ws.m..].to_vec())
            }
        }
    }
}

fn cone_dot(cone: &ConeStructure, a: &[f64], b: &[f64]) -> f64 {
    dot(&a[cone.n_free..], &b[cone.n_free..])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
