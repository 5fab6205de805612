//! Single-instance subcommands. Each reads an optional JSON config, applies flag overrides
//! and returns a JSON report.

use crate::config::{uniform_instance, ConfigError};
use blockdro::appsched::{mv_schedule, optimal_schedule, socp_mv_schedule, zapp_bound, Formulation, ScheduleJson};
use blockdro::assign::zlap_bound;
use blockdro::baselines::{dnn_schedule, CovarianceMode};
use blockdro::dag::{Dag, DagJson};
use blockdro::moments::{MomentJson, MomentSpec, DEFAULT_PD_TOL};
use blockdro::pert::zpath_bound;
use blockdro::reduced::ReducedSolution;
use blockdro::wcdist::{sample, schedule_worst_case, WorstCaseDistribution};
use blockdro_conic::Settings;
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Mean and standard deviation of the built-in instance used when no moments are given.
pub const STANDARD_MEAN: f64 = 2.0;
pub const STANDARD_SD: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lib(#[from] blockdro::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => crate::EXIT_CONFIG,
            CliError::Lib(e) => crate::exit_code(e),
        }
    }
}

impl From<blockdro::moments::MomentError> for CliError {
    fn from(e: blockdro::moments::MomentError) -> Self {
        CliError::Lib(e.into())
    }
}

impl From<blockdro::dag::DagError> for CliError {
    fn from(e: blockdro::dag::DagError) -> Self {
        CliError::Lib(e.into())
    }
}

/// Flags shared by every subcommand; `None` leaves the config value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub rho: Option<Vec<f64>>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    pub out: Option<PathBuf>,
    pub gap_tol: Option<f64>,
    pub feas_tol: Option<f64>,
}

impl Overrides {
    pub fn settings(&self) -> Settings {
        let d = Settings::default();
        Settings { gap_tol: self.gap_tol.unwrap_or(d.gap_tol), feas_tol: self.feas_tol.unwrap_or(d.feas_tol), ..d }
    }

    /// A single correlation; a grid is a config error here.
    fn single_rho(&self) -> Result<f64, CliError> {
        match self.rho.as_deref() {
            None => Ok(0.0),
            Some([r]) => Ok(*r),
            Some(v) => Err(ConfigError::ConfigInvalid(format!("expected one rho value, got {}", v.len())).into()),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
}

/// Either inline moments or the standard paired instance.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceConfig {
    pub moments: Option<MomentJson>,
    /// Slack for the covariance check; negative admits singular blocks.
    pub pd_tol: Option<f64>,
    pub s: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub formulation: Option<Formulation>,
    pub dag: Option<DagInput>,
    pub transpose: bool,
}

/// A DAG as JSON, or the path of an edge-list file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DagInput {
    Json(DagJson),
    EdgeList(PathBuf),
}

impl InstanceConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), read_json)
    }

    /// The configured moments, or `n` patients in pairs with correlation `rho`.
    pub fn spec(&self, ov: &Overrides) -> Result<MomentSpec, CliError> {
        match &self.moments {
            Some(j) => Ok(MomentSpec::from_json(j, self.pd_tol.unwrap_or(DEFAULT_PD_TOL))?),
            None => {
                let n = ov.n.unwrap_or(6);
                if n == 0 {
                    return Err(ConfigError::ConfigInvalid("n must be positive".into()).into());
                }
                let rho = ov.single_rho()?;
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(ConfigError::ConfigInvalid(format!("rho {rho} is outside [-1, 1]")).into());
                }
                Ok(uniform_instance(n, STANDARD_MEAN, STANDARD_SD, rho)?)
            }
        }
    }

    fn offset(&self, n: usize) -> Result<Vec<f64>, CliError> {
        let s = self.s.clone().unwrap_or_else(|| vec![0.0; n]);
        if s.len() != n {
            return Err(ConfigError::ConfigInvalid(format!("s has length {}, expected {n}", s.len())).into());
        }
        Ok(s)
    }

    fn dag(&self) -> Result<Dag, CliError> {
        match &self.dag {
            None => Err(ConfigError::ConfigInvalid("pert needs a \"dag\" entry".into()).into()),
            Some(DagInput::Json(j)) => Ok(Dag::from_json(j)?),
            Some(DagInput::EdgeList(p)) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.clone(), source })?;
                Ok(Dag::from_edge_list(&text)?)
            }
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub z_star: f64,
    pub p: Vec<f64>,
    pub x_blocks: Vec<Vec<Vec<f64>>>,
    pub status: String,
    pub iterations: usize,
    pub gap: f64,
}

impl From<&ReducedSolution> for BoundReport {
    fn from(sol: &ReducedSolution) -> Self {
        Self {
            z_star: sol.z_star,
            p: sol.p.clone(),
            x_blocks: sol.x_blocks.iter().map(rows).collect(),
            status: format!("{:?}", sol.stats.status),
            iterations: sol.stats.iterations,
            gap: sol.stats.gap,
        }
    }
}

/// The appointment bound at a fixed schedule `s` (zero by default).
pub fn bound(cfg: &InstanceConfig, ov: &Overrides) -> Result<BoundReport, CliError> {
    let spec = cfg.spec(ov)?;
    let s = cfg.offset(spec.n())?;
    Ok((&zapp_bound(&spec, &s, &ov.settings())?).into())
}

fn variances(spec: &MomentSpec) -> Vec<f64> {
    (0..spec.n())
        .map(|i| {
            let (r, a) = spec.partition().locate(i);
            spec.covariance(r)[(a, a)]
        })
        .collect()
}

/// A robust schedule under the chosen formulation; `--T` overrides the config horizon.
pub fn schedule(cfg: &InstanceConfig, ov: &Overrides) -> Result<ScheduleJson, CliError> {
    let spec = cfg.spec(ov)?;
    let horizon = ov.horizon.or(cfg.horizon).ok_or_else(|| ConfigError::ConfigInvalid("schedule needs T".into()))?;
    let settings = ov.settings();
    let var = variances(&spec);
    let res = match cfg.formulation.unwrap_or(Formulation::Partial) {
        Formulation::Partial => optimal_schedule(&spec, horizon, &settings)?,
        Formulation::Mv => mv_schedule(spec.mu(), &var, horizon, &settings)?,
        Formulation::Socp => socp_mv_schedule(spec.mu(), &var, horizon, &settings)?,
        Formulation::Dnn => dnn_schedule(&spec, horizon, CovarianceMode::NonOverlapping, &settings)?,
    };
    Ok(res.to_json())
}

/// The longest-path bound; moments are indexed by arc.
pub fn pert(cfg: &InstanceConfig, ov: &Overrides) -> Result<BoundReport, CliError> {
    let dag = cfg.dag()?;
    let Some(j) = &cfg.moments else {
        return Err(ConfigError::ConfigInvalid("pert needs \"moments\" over the arcs".into()).into());
    };
    let spec = MomentSpec::from_json(j, cfg.pd_tol.unwrap_or(DEFAULT_PD_TOL))?;
    Ok((&zpath_bound(&dag, &spec, &ov.settings())?).into())
}

/// The assignment bound; moments are indexed row-major over the `m x m` costs.
pub fn assign(cfg: &InstanceConfig, ov: &Overrides) -> Result<BoundReport, CliError> {
    let Some(j) = &cfg.moments else {
        return Err(ConfigError::ConfigInvalid("assign needs \"moments\" over the costs".into()).into());
    };
    let spec = MomentSpec::from_json(j, cfg.pd_tol.unwrap_or(DEFAULT_PD_TOL))?;
    Ok((&zlap_bound(&spec, cfg.transpose, &ov.settings())?).into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCaseReport {
    pub z_star: f64,
    /// `E[c'x(c)] - s'E[x]` under the mixture; equals `z_star` up to solver accuracy.
    pub mixture_value: f64,
    pub moment_residual: f64,
    pub distribution: WorstCaseDistribution,
}

/// The worst-case mixture at schedule `s`, and `count` samples from it.
pub fn wcdist_sample(
    cfg: &InstanceConfig,
    ov: &Overrides,
    count: usize,
) -> Result<(WorstCaseReport, DMatrix<f64>), CliError> {
    let spec = cfg.spec(ov)?;
    let s = cfg.offset(spec.n())?;
    let (sol, _, dist) = schedule_worst_case(&spec, &s, &ov.settings())?;
    let draws = sample(&dist, count, ov.seed.unwrap_or(0))?;
    let report = WorstCaseReport {
        z_star: sol.z_star,
        mixture_value: dist.objective() - dist.entries.iter().map(|e| e.alpha * dot(&s, &e.x)).sum::<f64>(),
        moment_residual: dist.moment_residual(&spec),
        distribution: dist,
    };
    Ok((report, draws))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
