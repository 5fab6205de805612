use blockdro_cli::commands::{self, CliError, InstanceConfig, Overrides};
use blockdro_cli::config::{ConfigError, ExperimentConfig, ExperimentKind};
use blockdro_cli::experiments::{run_bound_ratio, run_schedule_comparison, run_timing, write_csv};
use blockdro_cli::EXIT_OK;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "blockdro", version, about = "Robust bounds for max-type objectives under block moment information")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Correlation, or a comma-separated grid for experiments.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    rho: Option<Vec<f64>>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scheduling horizon.
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    /// Output file; JSON summaries go next to it with a `.json` extension.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long = "tol-gap", global = true)]
    gap_tol: Option<f64>,
    #[arg(long = "tol-feas", global = true)]
    feas_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Appointment bound at a fixed schedule.
    Bound,
    /// Robust appointment schedule.
    Schedule,
    /// Longest-path bound for a project network.
    Pert,
    /// Linear assignment bound.
    Assign,
    /// Worst-case distributions.
    Wcdist {
        #[command(subcommand)]
        action: WcdistAction,
    },
    /// Experiment harness.
    Experiment {
        #[command(subcommand)]
        which: Which,
    },
}

#[derive(Subcommand)]
enum WcdistAction {
    /// Draw samples from the worst case at a fixed schedule.
    Sample {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

#[derive(Subcommand, Clone, Copy)]
enum Which {
    Ratio,
    Schedule,
    Timing,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            n: self.n,
            rho: self.rho.clone(),
            runs: self.runs,
            seed: self.seed,
            horizon: self.horizon,
            out: self.out.clone(),
            gap_tol: self.gap_tol,
            feas_tol: self.feas_tol,
        }
    }

    fn experiment(&self, kind: ExperimentKind) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::for_kind(kind),
        };
        cfg.experiment = kind;
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(r) = &self.rho {
            cfg.rho = r.clone();
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.horizon {
            cfg.horizon = t;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(g) = self.gap_tol {
            cfg.gap_tol = g;
        }
        if let Some(f) = self.feas_tol {
            cfg.feas_tol = f;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn io_error(e: std::io::Error) -> CliError {
    CliError::Lib(e.into())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Lib(e.into()))
}

/// JSON to `out` when given, otherwise to stdout.
fn emit_json<T: Serialize>(v: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = to_json(v)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(io_error),
        None => writeln!(std::io::stdout(), "{text}").map_err(io_error),
    }
}

/// CSV rows to `out` and the summary to `out` with a `.json` extension; without `out`,
/// only the summary is printed.
fn emit_table<R: Serialize, S: Serialize>(rows: &[R], summary: &S, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(io_error)?;
            write_csv(rows, std::io::BufWriter::new(f)).map_err(io_error)?;
            emit_json(summary, Some(&p.with_extension("json")))
        }
        None => emit_json(summary, None),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let c = &cli.common;
    let ov = c.overrides();
    let out = c.out.as_deref();
    match &cli.command {
        Command::Bound => emit_json(&commands::bound(&InstanceConfig::load(c.config.as_deref())?, &ov)?, out),
        Command::Schedule => emit_json(&commands::schedule(&InstanceConfig::load(c.config.as_deref())?, &ov)?, out),
        Command::Pert => emit_json(&commands::pert(&InstanceConfig::load(c.config.as_deref())?, &ov)?, out),
        Command::Assign => emit_json(&commands::assign(&InstanceConfig::load(c.config.as_deref())?, &ov)?, out),
        Command::Wcdist { action: WcdistAction::Sample { samples } } => {
            let cfg = InstanceConfig::load(c.config.as_deref())?;
            let (report, draws) = commands::wcdist_sample(&cfg, &ov, *samples)?;
            match out {
                Some(p) => {
                    let f = std::fs::File::create(p).map_err(io_error)?;
                    blockdro::wcdist::write_samples_csv(&draws, std::io::BufWriter::new(f))?;
                    emit_json(&report, Some(&p.with_extension("json")))
                }
                None => {
                    blockdro::wcdist::write_samples_csv(&draws, std::io::stdout().lock())?;
                    Ok(())
                }
            }
        }
        Command::Experiment { which } => {
            let kind = match which {
                Which::Ratio => ExperimentKind::BoundRatio,
                Which::Schedule => ExperimentKind::ScheduleComparison,
                Which::Timing => ExperimentKind::Timing,
            };
            let cfg = c.experiment(kind)?;
            let out = cfg.out.as_deref();
            match which {
                Which::Ratio => {
                    let t = run_bound_ratio(&cfg)?;
                    emit_table(&t.rows, &t.summary, out)
                }
                Which::Schedule => {
                    let t = run_schedule_comparison(&cfg)?;
                    emit_table(&t.rows, &t, out)
                }
                Which::Timing => {
                    let t = run_timing(&cfg)?;
                    emit_table(&t, &t, out)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(CliError::Lib(blockdro::Error::Io(e))) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
