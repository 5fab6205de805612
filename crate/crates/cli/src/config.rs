//! Experiment and instance configuration.

use blockdro::moments::MomentSpec;
use blockdro_conic::Settings;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BoundRatio,
    ScheduleComparison,
    Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub rho: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    /// Range of the random means.
    pub mean_range: [f64; 2],
    /// Range of the random variances; the lower end must be positive.
    pub var_range: [f64; 2],
    /// Common mean and standard deviation of the schedule-comparison instance.
    pub service_mean: f64,
    pub service_sd: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Patient counts for the timing experiment; the horizon there is `T n / self.n`.
    pub n_grid: Vec<usize>,
    /// Largest `n` at which the timing experiment runs the DNN relaxation.
    pub dnn_max_n: usize,
    pub out: Option<PathBuf>,
    pub gap_tol: f64,
    pub feas_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = Settings::default();
        Self {
            experiment: ExperimentKind::BoundRatio,
            n: 6,
            rho: vec![-1.0, -0.7, -0.3, 0.0, 0.3, 0.7, 1.0],
            runs: 50,
            seed: 20_240_601,
            mean_range: [-2.0, 2.0],
            var_range: [1e-6, 5.0],
            service_mean: 2.0,
            service_sd: 0.5,
            horizon: 45.0,
            n_grid: vec![30, 40, 50, 60, 70, 80, 90, 100],
            dnn_max_n: 20,
            out: None,
            gap_tol: s.gap_tol,
            feas_tol: s.feas_tol,
        }
    }
}

impl ExperimentConfig {
    /// Defaults for one experiment: the bound-ratio table at `n = 6`, the schedule
    /// comparison at `n = 20`, and one timing run per grid point.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let base = Self { experiment: kind, ..Self::default() };
        match kind {
            ExperimentKind::BoundRatio => base,
            ExperimentKind::ScheduleComparison => Self { n: 20, rho: vec![-1.0, 0.0, 1.0], runs: 1, ..base },
            ExperimentKind::Timing => Self { n: 20, rho: vec![0.0], runs: 1, ..base },
        }
    }

    pub fn settings(&self) -> Settings {
        Settings { gap_tol: self.gap_tol, feas_tol: self.feas_tol, ..Settings::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::ConfigInvalid(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.rho.is_empty() {
            return bad("rho grid is empty".into());
        }
        if let Some(r) = self.rho.iter().find(|r| !(-1.0..=1.0).contains(*r)) {
            return bad(format!("rho {r} is outside [-1, 1]"));
        }
        if !(self.var_range[0] > 0.0 && self.var_range[0] <= self.var_range[1]) {
            return bad(format!("var_range {:?} must satisfy 0 < lo <= hi", self.var_range));
        }
        if !(self.mean_range[0] <= self.mean_range[1]) || self.mean_range.iter().any(|v| !v.is_finite()) {
            return bad(format!("mean_range {:?} must satisfy lo <= hi", self.mean_range));
        }
        if !(self.gap_tol > 0.0 && self.feas_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        match self.experiment {
            ExperimentKind::BoundRatio => {
                if self.n < 2 || self.n % 2 == 1 {
                    return bad(format!("bound-ratio needs an even n >= 2, got {}", self.n));
                }
                if self.n > 9 {
                    return bad(format!("the Large-SDP denominator needs n <= 9, got {}", self.n));
                }
            }
            ExperimentKind::ScheduleComparison => {
                if self.n < 2 {
                    return bad(format!("n must be at least 2, got {}", self.n));
                }
                if !(self.horizon > 0.0 && self.horizon.is_finite()) {
                    return bad(format!("T must be positive, got {}", self.horizon));
                }
                if !(self.service_sd > 0.0) {
                    return bad("service_sd must be positive".into());
                }
            }
            ExperimentKind::Timing => {
                if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n < 2) {
                    return bad("n_grid must be nonempty with n >= 2".into());
                }
                if !(self.horizon > 0.0 && self.horizon.is_finite()) {
                    return bad(format!("T must be positive, got {}", self.horizon));
                }
            }
        }
        Ok(())
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }
}

/// Validation slack for perfectly correlated pairs, whose covariance is singular.
pub fn pd_tol_for(rho: f64) -> f64 {
    if rho.abs() >= 1.0 - 1e-12 {
        -1e-9
    } else {
        1e-9
    }
}

/// Adjacent pairs with correlation `rho`; an odd last patient is a singleton block.
pub fn paired_instance(mu: &[f64], sd: &[f64], rho: f64) -> Result<MomentSpec, blockdro::moments::MomentError> {
    MomentSpec::paired_with_tail(mu, sd, &vec![rho; mu.len() / 2], pd_tol_for(rho))
}

/// `n` patients sharing one mean and standard deviation.
pub fn uniform_instance(n: usize, mean: f64, sd: f64, rho: f64) -> Result<MomentSpec, blockdro::moments::MomentError> {
    paired_instance(&vec![mean; n], &vec![sd; n], rho)
}
