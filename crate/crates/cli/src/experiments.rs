//! Desk-scale versions of the bound-ratio, schedule-comparison and timing studies.

use crate::config::{paired_instance, uniform_instance, ExperimentConfig};
use blockdro::appsched::{mv_bound, mv_schedule, optimal_schedule, socp_mv_schedule, zapp_bound, ScheduleResult};
use blockdro::baselines::{dnn_bound, dnn_schedule, large_sdp_bound, CovarianceMode};
use blockdro::chull::{enumerate_interval_partitions, ChullError, DEFAULT_VERTEX_LIMIT};
use blockdro::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Means and variances of run `run`, drawn from stream `run` of the seed.
pub fn random_moments(cfg: &ExperimentConfig, run: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(run as u64);
    let mu = (0..cfg.n).map(|_| rng.random_range(cfg.mean_range[0]..=cfg.mean_range[1])).collect();
    let var = (0..cfg.n).map(|_| rng.random_range(cfg.var_range[0]..=cfg.var_range[1])).collect();
    (mu, var)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub rho: f64,
    pub run: usize,
    pub mv_ratio: f64,
    pub ours_ratio: f64,
    pub dnn_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(v: impl Iterator<Item = f64> + Clone) -> Self {
        let count = v.clone().count().max(1) as f64;
        Self {
            mean: v.clone().sum::<f64>() / count,
            min: v.clone().fold(f64::INFINITY, f64::min),
            max: v.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub rho: f64,
    pub mv: Spread,
    pub ours: Spread,
    pub dnn: Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub rows: Vec<RatioRow>,
    pub summary: Vec<RatioSummary>,
}

fn ratio_run(cfg: &ExperimentConfig, vertices: &[Vec<f64>], rho: f64, run: usize) -> Result<RatioRow> {
    let settings = cfg.settings();
    let (mu, var) = random_moments(cfg, run);
    let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    let spec = paired_instance(&mu, &sd, rho)?;
    let zero = vec![0.0; cfg.n];
    let large = large_sdp_bound(&spec, vertices, None, &settings)?.value;
    let ours = zapp_bound(&spec, &zero, &settings)?.z_star;
    let mv = mv_bound(&mu, &var, &zero, &settings)?.z_star;
    let dnn = dnn_bound(&spec, &zero, CovarianceMode::NonOverlapping, &settings)?.value;
    Ok(RatioRow { rho, run, mv_ratio: mv / large, ours_ratio: ours / large, dnn_ratio: dnn / large })
}

/// Ratios of the mean-variance, reduced and DNN bounds over the Large-SDP bound at `s = 0`.
/// Runs share their moments across the `rho` grid.
pub fn run_bound_ratio(cfg: &ExperimentConfig) -> Result<RatioTable> {
    cfg.validate().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let vertices = enumerate_interval_partitions(cfg.n)?;
    let jobs: Vec<(f64, usize)> = cfg.rho.iter().flat_map(|&r| (0..cfg.runs).map(move |k| (r, k))).collect();
    let rows = jobs.par_iter().map(|&(rho, run)| ratio_run(cfg, &vertices, rho, run)).collect::<Result<Vec<_>>>()?;
    let summary = cfg
        .rho
        .iter()
        .map(|&rho| {
            let sel = rows.iter().filter(move |r| r.rho == rho);
            RatioSummary {
                rho,
                mv: Spread::of(sel.clone().map(|r| r.mv_ratio)),
                ours: Spread::of(sel.clone().map(|r| r.ours_ratio)),
                dnn: Spread::of(sel.map(|r| r.dnn_ratio)),
            }
        })
        .collect();
    Ok(RatioTable { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub rho: f64,
    pub pc_value: f64,
    pub mv_value: f64,
    pub dnn_value: f64,
    pub dnn_full_value: f64,
    /// Percentage increase of the partial-correlation bound under the mean-variance schedule.
    pub mv_schedule_pc_increase: f64,
    /// Percentage increase of the mean-variance bound under the partial-correlation schedule.
    pub pc_schedule_mv_increase: f64,
    pub dnn_schedule_pc_increase: f64,
    pub dnn_full_schedule_pc_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSet {
    pub rho: f64,
    pub pc: Vec<f64>,
    pub mv: Vec<f64>,
    pub dnn: Vec<f64>,
    pub dnn_full: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleComparison {
    pub rows: Vec<ScheduleRow>,
    pub schedules: Vec<ScheduleSet>,
}

fn pct(value: f64, optimum: f64) -> f64 {
    100.0 * (value - optimum) / optimum
}

fn compare_at(cfg: &ExperimentConfig, rho: f64) -> Result<(ScheduleRow, ScheduleSet)> {
    let settings = cfg.settings();
    let n = cfg.n;
    let spec = uniform_instance(n, cfg.service_mean, cfg.service_sd, rho)?;
    let mu = vec![cfg.service_mean; n];
    let var = vec![cfg.service_sd * cfg.service_sd; n];
    let pc = optimal_schedule(&spec, cfg.horizon, &settings)?;
    let mv = mv_schedule(&mu, &var, cfg.horizon, &settings)?;
    let dnn = dnn_schedule(&spec, cfg.horizon, CovarianceMode::NonOverlapping, &settings)?;
    let full = dnn_schedule(&spec, cfg.horizon, CovarianceMode::FullCovariance, &settings)?;
    let pc_at = |r: &ScheduleResult| zapp_bound(&spec, &r.schedule.s, &settings).map(|z| z.z_star);
    let row = ScheduleRow {
        rho,
        pc_value: pc.value,
        mv_value: mv.value,
        dnn_value: dnn.value,
        dnn_full_value: full.value,
        mv_schedule_pc_increase: pct(pc_at(&mv)?, pc.value),
        pc_schedule_mv_increase: pct(mv_bound(&mu, &var, &pc.schedule.s, &settings)?.z_star, mv.value),
        dnn_schedule_pc_increase: pct(pc_at(&dnn)?, pc.value),
        dnn_full_schedule_pc_increase: pct(pc_at(&full)?, pc.value),
    };
    let set = ScheduleSet {
        rho,
        pc: pc.schedule.s,
        mv: mv.schedule.s,
        dnn: dnn.schedule.s,
        dnn_full: full.schedule.s,
    };
    Ok((row, set))
}

/// Optimal schedules under each formulation for `n` identical patients, with the swap
/// matrix of percentage increases when one formulation's schedule is scored by another.
pub fn run_schedule_comparison(cfg: &ExperimentConfig) -> Result<ScheduleComparison> {
    cfg.validate().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let out = cfg.rho.par_iter().map(|&rho| compare_at(cfg, rho)).collect::<Result<Vec<_>>>()?;
    let (rows, schedules) = out.into_iter().unzip();
    Ok(ScheduleComparison { rows, schedules })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub formulation: String,
    /// `ok`, `refused` (size guard) or `failed`.
    pub status: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

fn time_runs(runs: usize, mut f: impl FnMut() -> Result<()>) -> (String, Spread) {
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        match f() {
            Ok(()) => times.push(start.elapsed().as_secs_f64()),
            Err(Error::Chull(_)) => return ("refused".into(), Spread { mean: f64::NAN, min: f64::NAN, max: f64::NAN }),
            Err(_) => return ("failed".into(), Spread { mean: f64::NAN, min: f64::NAN, max: f64::NAN }),
        }
    }
    ("ok".into(), Spread::of(times.iter().copied()))
}

/// Wall-clock seconds per formulation over the `n` grid, timed sequentially so runs do not
/// compete for cores. The horizon scales as `T n / cfg.n`. The Large-SDP is attempted only
/// where its vertex list fits.
pub fn run_timing(cfg: &ExperimentConfig) -> Result<Vec<TimingRow>> {
    cfg.validate().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let settings = cfg.settings();
    let rho = cfg.rho[0];
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let spec = uniform_instance(n, cfg.service_mean, cfg.service_sd, rho)?;
        let mu = vec![cfg.service_mean; n];
        let var = vec![cfg.service_sd * cfg.service_sd; n];
        let t = cfg.horizon * n as f64 / cfg.n as f64;
        let mut push = |name: &str, (status, s): (String, Spread)| {
            rows.push(TimingRow { n, formulation: name.into(), status, mean: s.mean, min: s.min, max: s.max });
        };
        push("partial", time_runs(cfg.runs, || optimal_schedule(&spec, t, &settings).map(drop)));
        push("socp", time_runs(cfg.runs, || socp_mv_schedule(&mu, &var, t, &settings).map(drop)));
        if n <= cfg.dnn_max_n {
            push("dnn", time_runs(cfg.runs, || dnn_schedule(&spec, t, CovarianceMode::NonOverlapping, &settings).map(drop)));
        }
        let zero = vec![0.0; n];
        push(
            "large-sdp",
            time_runs(cfg.runs, || {
                let count = 1usize.checked_shl(n as u32).filter(|_| n < usize::BITS as usize).unwrap_or(usize::MAX);
                if count > DEFAULT_VERTEX_LIMIT {
                    return Err(ChullError::TooManyVertices { count, limit: DEFAULT_VERTEX_LIMIT }.into());
                }
                let v = enumerate_interval_partitions(n)?;
                large_sdp_bound(&spec, &v, Some(&zero), &settings).map(drop)
            }),
        );
    }
    Ok(rows)
}

/// Spearman rank correlation, average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let m = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / m, ry.iter().sum::<f64>() / m);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    cov / (sx * sy)
}

/// CSV with columns `rho, run, mv_ratio, ours_ratio, dnn_ratio`.
pub fn write_ratio_csv<W: std::io::Write>(rows: &[RatioRow], out: W) -> std::io::Result<()> {
    write_csv(rows, out)
}

pub fn write_csv<T: Serialize, W: std::io::Write>(rows: &[T], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(std::io::Error::other)?;
    }
    w.flush()
}
