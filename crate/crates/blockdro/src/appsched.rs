//! Distributionally robust appointment scheduling.
//!
//! For a schedule `s`, the total waiting time plus overtime is `max_{x in X_app} (u - s)'x`;
//! the bounds below are reduced SDPs over the interval-partition lifting of `X_app`.

use crate::chull::interval_partition_rep_for;
use crate::error::{Error, Result};
use crate::moments::{MomentSpec, Partition};
use crate::reduced::{solve_checked, ReducedModel, ReducedSolution, SolveStats, Terms};
use blockdro_conic::{Affine, LmiBuilder, ProblemBuilder, SdpSolution, Settings};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub s: Vec<f64>,
    pub horizon: f64,
}

impl Schedule {
    pub fn new(s: Vec<f64>, horizon: f64) -> Result<Self> {
        if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("schedule entries must be finite and nonnegative".into()));
        }
        let total: f64 = s.iter().sum();
        if total > horizon + 1e-9 {
            return Err(Error::InvalidArgument(format!("schedule uses {total}, horizon is {horizon}")));
        }
        Ok(Self { s, horizon })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Partial,
    Mv,
    Socp,
    Dnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleJson {
    pub s: Vec<f64>,
    pub value: f64,
    pub formulation: Formulation,
}

#[derive(Debug, Clone)]
pub struct ScheduleResult {
    pub schedule: Schedule,
    pub value: f64,
    pub formulation: Formulation,
    pub stats: SolveStats,
    /// Dual variables of the schedule SDP; absent for other formulations and for facially
    /// reduced blocks.
    pub certificate: Option<ScheduleCertificate>,
}

impl ScheduleResult {
    pub fn to_json(&self) -> ScheduleJson {
        ScheduleJson { s: self.schedule.s.clone(), value: self.value, formulation: self.formulation }
    }
}

/// Total waiting time plus overtime from the Lindley recursion.
pub fn lindley_waiting(u: &[f64], s: &[f64]) -> Result<f64> {
    if u.len() != s.len() {
        return Err(Error::DimensionMismatch(format!("{} durations, {} slots", u.len(), s.len())));
    }
    let mut w = 0.0;
    let mut total = 0.0;
    for (ui, si) in u.iter().zip(s) {
        let next = (w + ui - si).max(0.0);
        total += next;
        w = next;
    }
    Ok(total)
}

/// Pairs `{1,2}, {3,4}, ...`; for odd `n` with `allow_odd`, a trailing singleton.
pub fn paired_partition(n: usize, allow_odd: bool) -> Result<Partition> {
    if n % 2 == 1 && !allow_odd {
        return Err(Error::OddDimension(n));
    }
    let mut blocks: Vec<Vec<usize>> = (0..n / 2).map(|r| vec![2 * r, 2 * r + 1]).collect();
    if n % 2 == 1 {
        blocks.push(vec![n - 1]);
    }
    Ok(Partition::new(n, blocks)?)
}

/// Worst-case expected waiting time for a fixed schedule. The moment blocks must be
/// adjacent pairs or singletons.
pub fn zapp_bound(spec: &MomentSpec, s: &[f64], settings: &Settings) -> Result<ReducedSolution> {
    let rep = interval_partition_rep_for(spec.partition())?;
    ReducedModel::new(spec, &rep, Some(s))?.solve(settings).map(|r| r.1)
}

/// Mean-variance bound: singleton blocks.
pub fn mv_bound(mu: &[f64], var: &[f64], s: &[f64], settings: &Settings) -> Result<ReducedSolution> {
    zapp_bound(&MomentSpec::mean_variance(mu, var)?, s, settings)
}

/// Appends `p_i <= w` (as `p_i + sigma_i - w = 0`) with `w >= 0` and objective `-T w`; the
/// multipliers of the returned rows form a minimizing schedule.
pub(crate) fn add_epigraph(builder: &mut ProblemBuilder, p: &[Terms], horizon: f64) -> Vec<usize> {
    let w = builder.add_nonneg();
    builder.add_objective(w, -horizon);
    p.iter()
        .map(|pt| {
            let sigma = builder.add_nonneg();
            let mut terms = pt.clone();
            terms.push((sigma, 1.0));
            terms.push((w, -1.0));
            builder.add_row(terms, 0.0)
        })
        .collect()
}

pub(crate) fn schedule_from_multipliers(sol: &SdpSolution, rows: &[usize], horizon: f64) -> Schedule {
    let mut s: Vec<f64> = rows.iter().map(|&r| sol.y[r].max(0.0)).collect();
    let total: f64 = s.iter().sum();
    if total > horizon {
        s.iter_mut().for_each(|v| *v *= horizon / total);
    }
    Schedule { s, horizon }
}

/// Minimizes the worst-case expected waiting time over `{s >= 0, sum s <= T}` by solving the
/// schedule SDP through its dual; the schedule is read off the multipliers.
pub fn optimal_schedule(spec: &MomentSpec, horizon: f64, settings: &Settings) -> Result<ScheduleResult> {
    schedule_for(spec, horizon, settings, Formulation::Partial)
}

/// Mean-variance schedule: singleton blocks.
pub fn mv_schedule(mu: &[f64], var: &[f64], horizon: f64, settings: &Settings) -> Result<ScheduleResult> {
    schedule_for(&MomentSpec::mean_variance(mu, var)?, horizon, settings, Formulation::Mv)
}

fn schedule_for(spec: &MomentSpec, horizon: f64, settings: &Settings, formulation: Formulation) -> Result<ScheduleResult> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let n = spec.n();
    let rep = interval_partition_rep_for(spec.partition())?;
    let mut model = ReducedModel::new(spec, &rep, None)?;
    let p: Vec<Terms> = (0..n).map(|i| model.p_terms(i)).collect();
    let rows = add_epigraph(&mut model.builder, &p, horizon);
    let sol = solve_checked(&model.build()?, settings)?;
    let schedule = schedule_from_multipliers(&sol, &rows, horizon);
    let reduced = (0..spec.partition().len()).any(|r| model.is_reduced(r));
    let certificate = (!reduced).then(|| ScheduleCertificate::from_solution(spec, &model, &sol, &schedule.s));
    Ok(ScheduleResult { schedule, value: sol.dual_objective, formulation, stats: SolveStats::of(&sol), certificate })
}

/// Variables of the schedule SDP in its minimization form, indexed by patient except
/// `eta` (per block), `gamma_pair` and `tau` (per pair block) and `rho` (`n + 1` entries).
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleCertificate {
    pub partition: Partition,
    pub s: Vec<f64>,
    pub eta: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma_diag: Vec<f64>,
    pub gamma_pair: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub tau: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateCheck {
    pub objective: f64,
    /// Smallest eigenvalue over the dual PSD blocks.
    pub min_eigenvalue: f64,
    /// Smallest slack of the interval inequalities.
    pub min_interval_slack: f64,
    pub min_s: f64,
    pub budget_slack: f64,
}

impl ScheduleCertificate {
    fn from_solution(spec: &MomentSpec, model: &ReducedModel, sol: &SdpSolution, s: &[f64]) -> Self {
        let n = spec.n();
        let part = spec.partition();
        let y = |row: usize| sol.y[row];
        let mut beta = vec![0.0; n];
        let mut gamma_diag = vec![0.0; n];
        let mut gamma_pair = Vec::new();
        let mut eta = Vec::new();
        for (r, corner) in model.corner_rows.iter().enumerate() {
            eta.push(y(corner.one));
            let b = part.block(r);
            for (a, &row) in corner.mu.iter().enumerate() {
                beta[b[a]] = y(row);
            }
            for &(a, c, row) in &corner.pi {
                if a == c {
                    gamma_diag[b[a]] = y(row);
                } else {
                    gamma_pair.push(y(row));
                }
            }
        }
        // row order of the interval representation: n + 1 coverage rows, then (p_i, X_ii)
        // pairs, then one cross row per pair block
        let h = &model.hull_rows;
        let rho = (0..=n).map(|i| y(h[i])).collect();
        let delta = (0..n).map(|i| y(h[n + 1 + 2 * i])).collect();
        let gamma = (0..n).map(|i| y(h[n + 2 + 2 * i])).collect();
        let tau = (3 * n + 1..h.len()).map(|q| y(h[q])).collect();
        Self { partition: part.clone(), s: s.to_vec(), eta, beta, gamma_diag, gamma_pair, delta, gamma, tau, rho }
    }

    /// The dual PSD block of moment block `r`.
    pub fn block_matrix(&self, r: usize) -> DMatrix<f64> {
        let b = self.partition.block(r);
        let nr = b.len();
        let pair_index = self.pair_index(r);
        let mut m = DMatrix::zeros(1 + 2 * nr, 1 + 2 * nr);
        m[(0, 0)] = 2.0 * self.eta[r];
        for (a, &i) in b.iter().enumerate() {
            m[(0, 1 + a)] = self.beta[i];
            m[(0, 1 + nr + a)] = self.delta[i] + self.s[i];
            m[(1 + a, 1 + a)] = 2.0 * self.gamma_diag[i];
            m[(1 + a, 1 + nr + a)] = -1.0;
            m[(1 + nr + a, 1 + nr + a)] = 2.0 * self.gamma[i];
        }
        if let Some(q) = pair_index {
            m[(1, 2)] = self.gamma_pair[q];
            m[(1 + nr, 2 + nr)] = self.tau[q];
        }
        m.fill_lower_triangle_with_upper_triangle();
        m
    }

    fn pair_index(&self, r: usize) -> Option<usize> {
        if self.partition.block(r).len() != 2 {
            return None;
        }
        Some((0..r).filter(|&q| self.partition.block(q).len() == 2).count())
    }

    pub fn check(&self, spec: &MomentSpec, horizon: f64) -> CertificateCheck {
        let n = spec.n();
        let part = &self.partition;
        let mut objective: f64 = self.eta.iter().sum::<f64>() + self.rho.iter().sum::<f64>();
        let mut min_eigenvalue = f64::INFINITY;
        for r in 0..part.len() {
            let b = part.block(r);
            for (a, &i) in b.iter().enumerate() {
                objective += self.beta[i] * spec.mu()[i] + self.gamma_diag[i] * spec.pi()[r][(a, a)];
            }
            if let Some(q) = self.pair_index(r) {
                objective += self.gamma_pair[q] * spec.pi()[r][(0, 1)];
            }
            min_eigenvalue = min_eigenvalue.min(SymmetricEigen::new(self.block_matrix(r)).eigenvalues.min());
        }
        // tau of the pair starting at patient i (0-based), if any
        let mut tau_at = vec![None; n];
        for r in 0..part.len() {
            if let Some(q) = self.pair_index(r) {
                tau_at[part.block(r)[0]] = Some(self.tau[q]);
            }
        }
        let mut min_interval_slack = f64::INFINITY;
        for k in 1..=n + 1 {
            for j in k..=n + 1 {
                let mut slack: f64 = (k..=j).map(|i| self.rho[i - 1]).sum();
                for i in k..=j.min(n) {
                    let d = (j - i) as f64;
                    slack -= self.delta[i - 1] * d + self.gamma[i - 1] * d * d;
                    if let Some(t) = tau_at[i - 1] {
                        slack -= t * d * (d - 1.0).max(0.0);
                    }
                }
                min_interval_slack = min_interval_slack.min(slack);
            }
        }
        CertificateCheck {
            objective,
            min_eigenvalue,
            min_interval_slack,
            min_s: self.s.iter().copied().fold(f64::INFINITY, f64::min),
            budget_slack: horizon - self.s.iter().sum::<f64>(),
        }
    }
}

/// Mean-variance schedule through the second-order cone program with `pi_ij = j - i`; each
/// quadratic-over-linear term is written as a 2x2 PSD constraint.
pub fn socp_mv_schedule(mu: &[f64], var: &[f64], horizon: f64, settings: &Settings) -> Result<ScheduleResult> {
    let n = mu.len();
    if var.len() != n || n == 0 {
        return Err(Error::DimensionMismatch(format!("{} means, {} variances", n, var.len())));
    }
    if var.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("variances must be positive".into()));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be nonnegative, got {horizon}")));
    }
    let mut b = LmiBuilder::new();
    let lambda = b.add_vars(n);
    let alpha = b.add_vars(n);
    let beta = b.add_vars(n);
    let s = b.add_vars(n);
    for i in 0..n {
        b.add_objective(lambda[i], 1.0);
        b.add_objective(alpha[i], mu[i]);
        b.add_objective(beta[i], mu[i] * mu[i] + var[i]);
    }
    // q[i][j - i] bounds (pi_ij - alpha_i)^2 / (4 beta_i), 1-based i <= j <= n + 1
    let mut q = Vec::with_capacity(n);
    for i in 1..=n {
        let row: Vec<usize> = (i..=n + 1).map(|_| b.add_var()).collect();
        for (d, &qv) in row.iter().enumerate() {
            b.add_psd(
                2,
                vec![
                    (0, 0, Affine::new(vec![(beta[i - 1], 2.0)], 0.0)),
                    (0, 1, Affine::new(vec![(alpha[i - 1], -1.0)], d as f64)),
                    (1, 1, Affine::new(vec![(qv, 2.0)], 0.0)),
                ],
            );
        }
        q.push(row);
    }
    for k in 1..=n {
        for j in k..=n + 1 {
            let mut terms = Vec::new();
            for i in k..=n.min(j) {
                terms.push((lambda[i - 1], 1.0));
                terms.push((q[i - 1][j - i], -1.0));
                terms.push((s[i - 1], (j - i) as f64));
            }
            b.add_nonneg(Affine::new(terms, 0.0));
        }
    }
    for &v in &s {
        b.add_nonneg(Affine::var(v));
    }
    b.add_nonneg(Affine::new(s.iter().map(|&v| (v, -1.0)).collect(), horizon));
    let sol = solve_checked(&b.build()?, settings)?;
    let raw: Vec<f64> = s.iter().map(|&v| sol.y[v].max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    let scale = if total > horizon && total > 0.0 { horizon / total } else { 1.0 };
    let schedule = Schedule { s: raw.iter().map(|v| v * scale).collect(), horizon };
    Ok(ScheduleResult { schedule, value: sol.dual_objective, formulation: Formulation::Socp, stats: SolveStats::of(&sol), certificate: None })
}
