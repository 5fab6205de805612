use blockdro_cli::config::{ConfigError, ExperimentConfig, ExperimentKind};
use blockdro_cli::experiments::{run_bound_ratio, run_timing, spearman, write_csv, write_ratio_csv};
use std::path::PathBuf;
use std::process::{Command, Output};

fn blockdro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockdro")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("blockdro-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn default_configs_validate() {
    for kind in [ExperimentKind::BoundRatio, ExperimentKind::ScheduleComparison, ExperimentKind::Timing] {
        ExperimentConfig::for_kind(kind).validate().unwrap();
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let base = ExperimentConfig::for_kind(ExperimentKind::BoundRatio);
    let cases = [
        ExperimentConfig { n: 5, ..base.clone() },
        ExperimentConfig { n: 10, ..base.clone() },
        ExperimentConfig { runs: 0, ..base.clone() },
        ExperimentConfig { rho: vec![], ..base.clone() },
        ExperimentConfig { rho: vec![0.0, 1.5], ..base.clone() },
        ExperimentConfig { var_range: [0.0, 1.0], ..base.clone() },
        ExperimentConfig { mean_range: [1.0, -1.0], ..base.clone() },
        ExperimentConfig { gap_tol: 0.0, ..base.clone() },
        ExperimentConfig { experiment: ExperimentKind::ScheduleComparison, horizon: -1.0, ..base.clone() },
        ExperimentConfig { experiment: ExperimentKind::Timing, n_grid: vec![], ..base.clone() },
    ];
    for c in cases {
        assert!(matches!(c.validate(), Err(ConfigError::ConfigInvalid(_))), "{c:?}");
    }
}

#[test]
fn config_files_parse_strictly() {
    let good = scratch("good.json");
    std::fs::write(&good, r#"{"experiment": "timing", "n_grid": [4, 6], "T": 12.0}"#).unwrap();
    let cfg = ExperimentConfig::from_file(&good).unwrap();
    assert_eq!(cfg.experiment, ExperimentKind::Timing);
    assert_eq!(cfg.n_grid, vec![4, 6]);
    assert_eq!(cfg.horizon, 12.0);
    let bad = scratch("bad.json");
    std::fs::write(&bad, r#"{"experiment": "timing", "horizon": 3}"#).unwrap();
    assert!(matches!(ExperimentConfig::from_file(&bad), Err(ConfigError::Parse { .. })));
    assert!(matches!(ExperimentConfig::from_file(&scratch("missing.json")), Err(ConfigError::Read { .. })));
}

#[test]
fn spearman_examples() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert!((spearman(&x, &[2.0, 4.0, 9.0, 16.0, 30.0]) - 1.0).abs() < 1e-12);
    assert!((spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    // ranks of y with a tie: [0, 1.5, 1.5, 3, 4]; Pearson of ranks by hand
    let r = spearman(&x, &[1.0, 2.0, 2.0, 3.0, 4.0]);
    let (rx, ry) = ([0.0, 1.0, 2.0, 3.0, 4.0], [0.0, 1.5, 1.5, 3.0, 4.0]);
    let dot: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - 2.0) * (b - 2.0)).sum();
    let nx: f64 = rx.iter().map(|a| (a - 2.0f64).powi(2)).sum();
    let ny: f64 = ry.iter().map(|b| (b - 2.0f64).powi(2)).sum();
    assert!((r - dot / (nx * ny).sqrt()).abs() < 1e-12);
}

fn small_ratio() -> ExperimentConfig {
    ExperimentConfig { n: 4, runs: 3, rho: vec![-1.0, 0.0, 1.0], seed: 7, ..ExperimentConfig::for_kind(ExperimentKind::BoundRatio) }
}

#[test]
fn ratio_experiment_is_reproducible() {
    let cfg = small_ratio();
    let csv = |c: &ExperimentConfig| {
        let mut buf = Vec::new();
        write_ratio_csv(&run_bound_ratio(c).unwrap().rows, &mut buf).unwrap();
        buf
    };
    let a = csv(&cfg);
    assert_eq!(a, csv(&cfg));
    assert_ne!(a, csv(&ExperimentConfig { seed: 8, ..cfg.clone() }));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some("rho,run,mv_ratio,ours_ratio,dnn_ratio"));
    assert_eq!(text.lines().count(), 1 + 9);
}

#[test]
fn ratios_are_at_least_one() {
    let t = run_bound_ratio(&small_ratio()).unwrap();
    for r in &t.rows {
        assert!(r.mv_ratio >= 1.0 - 1e-6 && r.dnn_ratio >= 1.0 - 1e-6, "{r:?}");
        assert!((r.ours_ratio - 1.0).abs() <= 1e-4, "{r:?}");
    }
    assert_eq!(t.summary.len(), 3);
    for s in &t.summary {
        assert!(s.mv.min <= s.mv.mean && s.mv.mean <= s.mv.max);
    }
}

#[test]
fn large_sdp_is_refused_past_the_vertex_limit() {
    let cfg = ExperimentConfig {
        n_grid: vec![12, 14],
        dnn_max_n: 0,
        ..ExperimentConfig::for_kind(ExperimentKind::Timing)
    };
    let rows = run_timing(&cfg).unwrap();
    let status = |n: usize, f: &str| rows.iter().find(|r| r.n == n && r.formulation == f).unwrap().status.clone();
    assert_eq!(status(12, "large-sdp"), "ok");
    assert_eq!(status(14, "large-sdp"), "refused");
    assert_eq!(status(14, "partial"), "ok");
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("n,formulation,status,mean,min,max"));
}

#[test]
fn bound_command_prints_json() {
    let out = blockdro(&["bound", "--n", "4", "--rho", "-0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["z_star"].as_f64().unwrap() > 0.0);
    assert_eq!(v["p"].as_array().unwrap().len(), 4);
}

#[test]
fn schedule_and_wcdist_commands() {
    let out = blockdro(&["schedule", "--n", "4", "--T", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let s: f64 = v["s"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!(s <= 10.0 + 1e-7);

    let out = blockdro(&["wcdist", "sample", "--n", "2", "--samples", "20", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("c1,c2"));
    assert_eq!(text.lines().count(), 21);
    assert_eq!(out.stdout, blockdro(&["wcdist", "sample", "--n", "2", "--samples", "20", "--seed", "4"]).stdout);

    let csv = scratch("draws.csv");
    let out = blockdro(&["wcdist", "sample", "--n", "2", "--samples", "5", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap();
    let (z, m) = (report["z_star"].as_f64().unwrap(), report["mixture_value"].as_f64().unwrap());
    assert!((z - m).abs() < 1e-5 * z.max(1.0), "{z} vs {m}");
}

#[test]
fn pert_and_assign_from_config() {
    let cfg = scratch("pert.json");
    std::fs::write(
        &cfg,
        r#"{"dag": {"m": 3, "arcs": [[0, 1], [1, 2], [0, 2]]},
            "moments": {"n": 3, "blocks": [[1], [2, 3]], "mu": [1.0, 1.0, 1.5],
                        "pi": [[[2.0]], [[2.0, 1.5], [1.5, 3.25]]]}}"#,
    )
    .unwrap();
    let out = blockdro(&["pert", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["z_star"].as_f64().unwrap() >= 2.0 - 1e-6);

    let out = blockdro(&["assign"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(blockdro(&["experiment", "ratio", "--n", "5"]).status.code(), Some(2));
    assert_eq!(blockdro(&["bound", "--rho", "2"]).status.code(), Some(2));
    assert_eq!(blockdro(&["bound", "--rho", "0.1,0.2"]).status.code(), Some(2));
    assert_eq!(blockdro(&["schedule", "--n", "4"]).status.code(), Some(2));
    assert_eq!(blockdro(&["bound", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(blockdro(&["bound", "--config", "/nonexistent/cfg.json"]).status.code(), Some(2));
    let out = blockdro(&["bound", "--n", "4", "--tol-gap", "1e-300", "--tol-feas", "1e-300"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
