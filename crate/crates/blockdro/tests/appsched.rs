mod common;

use blockdro::appsched::*;
use blockdro::chull::enumerate_interval_partitions;
use blockdro::moments::MomentSpec;
use blockdro::Error;
use blockdro_conic::Settings;
use common::{dot, random_paired, rel, rng};
use proptest::prelude::*;
use rand::Rng;

fn st() -> Settings {
    Settings::default()
}

fn standard(n: usize, rho: f64) -> MomentSpec {
    let tol = if rho.abs() == 1.0 { -1e-9 } else { 1e-9 };
    MomentSpec::paired(&vec![2.0; n], &vec![0.5; n], &vec![rho; n / 2], tol).unwrap()
}

#[test]
fn lindley_examples() {
    assert_eq!(lindley_waiting(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    assert_eq!(lindley_waiting(&[2.0, 2.0], &[1.0, 1.0]).unwrap(), 3.0);
    assert!(lindley_waiting(&[1.0], &[1.0, 2.0]).is_err());
}

proptest! {
    #[test]
    fn lindley_is_the_vertex_maximum(n in 1usize..9, seed in any::<u64>()) {
        let mut r = rng(seed);
        let u: Vec<f64> = (0..n).map(|_| r.random_range(0.0..4.0)).collect();
        let s: Vec<f64> = (0..n).map(|_| r.random_range(0.0..4.0)).collect();
        let d: Vec<f64> = u.iter().zip(&s).map(|(a, b)| a - b).collect();
        let best = enumerate_interval_partitions(n).unwrap().iter().map(|x| dot(&d, x)).fold(f64::NEG_INFINITY, f64::max);
        let f = lindley_waiting(&u, &s).unwrap();
        prop_assert!((f - best).abs() < 1e-9, "lindley {} vs enumeration {}", f, best);
    }
}

#[test]
fn odd_sizes() {
    assert!(matches!(paired_partition(5, false), Err(Error::OddDimension(5))));
    assert_eq!(paired_partition(5, true).unwrap().blocks().last().unwrap(), &vec![4]);
    let spec = MomentSpec::paired_with_tail(&[1.0; 3], &[0.5; 3], &[0.2], 1e-9).unwrap();
    let z = zapp_bound(&spec, &[0.5; 3], &st()).unwrap().z_star;
    assert!(z > 0.0 && z.is_finite());
}

#[test]
fn single_patient_closed_form() {
    for (mu, sd, s) in [(2.0, 0.5, 1.5), (0.0, 1.0, 0.0), (1.0, 2.0, 3.0)] {
        let z = mv_bound(&[mu], &[sd * sd], &[s], &st()).unwrap().z_star;
        let want = (mu - s + ((mu - s) * (mu - s) + sd * sd).sqrt()) / 2.0;
        assert!((z - want).abs() < 1e-6, "mu {mu} sd {sd} s {s}: {z} vs {want}");
    }
    let socp = socp_mv_schedule(&[0.0], &[1.0], 1e-9, &st()).unwrap();
    assert!((socp.value - 0.5).abs() < 1e-6, "{}", socp.value);
}

#[test]
fn schedule_regressions() {
    // reference values for 20 identical patients, mean 2, sd 0.5, horizon 45
    for (rho, want) in [(0.0, 19.7474), (-0.5, 14.6842)] {
        let r = optimal_schedule(&standard(20, rho), 45.0, &st()).unwrap();
        assert!((r.value - want).abs() <= 0.01, "rho {rho}: {}", r.value);
        let s: f64 = r.schedule.s.iter().sum();
        assert!(s <= 45.0 + 1e-9);
    }
}

#[test]
fn schedule_value_matches_bound_at_schedule() {
    let spec = random_paired(6, 0.4, &mut rng(3));
    let horizon: f64 = spec.mu().iter().map(|m| m.abs()).sum::<f64>() + 6.0;
    let r = optimal_schedule(&spec, horizon, &st()).unwrap();
    let z = zapp_bound(&spec, &r.schedule.s, &st()).unwrap().z_star;
    assert!(rel(z, r.value) <= 1e-4, "bound {z} vs schedule value {}", r.value);
    let check = r.certificate.expect("no facial reduction").check(&spec, horizon);
    assert!(check.min_eigenvalue >= -1e-6 && check.min_interval_slack >= -1e-6 && check.min_s >= -1e-9);
    assert!(rel(check.objective, r.value) <= 1e-5);
}

#[test]
fn longer_horizon_never_hurts() {
    let spec = standard(6, 0.3);
    let big = 12.0 + 10.0 * 3.0;
    let mut last = f64::INFINITY;
    for t in [6.0, 12.0, 20.0, big] {
        let v = optimal_schedule(&spec, t, &st()).unwrap().value;
        assert!(v <= last + 1e-6, "T = {t}: {v} after {last}");
        last = v;
    }
    let mut last = f64::INFINITY;
    for t in [0.5, 3.0, 8.0] {
        let v = socp_mv_schedule(&[1.0, 2.0, 0.5], &[0.3, 1.0, 0.2], t, &st()).unwrap().value;
        assert!(v <= last + 1e-6);
        last = v;
    }
}

#[test]
fn mean_variance_formulations_agree() {
    let mut r = rng(11);
    for _ in 0..5 {
        let n = r.random_range(2..7);
        let mu: Vec<f64> = (0..n).map(|_| r.random_range(0.5..3.0)).collect();
        let var: Vec<f64> = (0..n).map(|_| r.random_range(0.05..2.0)).collect();
        let t = mu.iter().sum::<f64>() * r.random_range(0.8..1.5);
        let a = mv_schedule(&mu, &var, t, &st()).unwrap().value;
        let b = socp_mv_schedule(&mu, &var, t, &st()).unwrap().value;
        assert!(rel(a, b) <= 1e-5, "sdp {a} socp {b}");
    }
}

#[test]
fn nearly_deterministic_durations() {
    let mu = [1.0, 2.0, 1.5, 0.5];
    let r = mv_schedule(&mu, &[1e-6; 4], 6.0, &st()).unwrap();
    assert!(r.value < 1e-3, "{}", r.value);
    for (s, m) in r.schedule.s.iter().zip(&mu) {
        assert!(*s >= m - 1e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn partial_correlation_is_below_mean_variance(rho in -1.0f64..=1.0, seed in any::<u64>()) {
        let spec = random_paired(4, rho, &mut rng(seed));
        let var: Vec<f64> = (0..4).map(|i| { let (b, a) = spec.partition().locate(i); spec.covariance(b)[(a, a)] }).collect();
        let s = [0.5, 1.0, 0.0, 2.0];
        let z = zapp_bound(&spec, &s, &st()).unwrap().z_star;
        let mv = mv_bound(spec.mu(), &var, &s, &st()).unwrap().z_star;
        prop_assert!(z <= mv + 1e-6);
    }
}

/// Mean of `mv / zapp` at `s = 0` over seeded paired instances.
fn mean_ratio(rho: f64, seeds: u64) -> f64 {
    let zero = [0.0; 6];
    let tol = if rho.abs() == 1.0 { -1e-9 } else { 1e-9 };
    let total: f64 = (0..seeds)
        .map(|seed| {
            let mut r = rng(seed);
            let mu: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
            let var: Vec<f64> = (0..6).map(|_| r.random_range(1e-6..5.0)).collect();
            let sd: Vec<f64> = var.iter().map(|v: &f64| v.sqrt()).collect();
            let spec = MomentSpec::paired(&mu, &sd, &[rho; 3], tol).unwrap();
            mv_bound(&mu, &var, &zero, &st()).unwrap().z_star / zapp_bound(&spec, &zero, &st()).unwrap().z_star
        })
        .sum();
    total / seeds as f64
}

#[test]
fn ratio_shape_over_correlation() {
    let ratios: Vec<f64> = [-1.0, -0.5, 0.0, 0.5, 1.0].iter().map(|&rho| mean_ratio(rho, 50)).collect();
    for w in ratios.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "mean ratios {ratios:?}");
    }
    assert!(ratios[4] >= 1.0 - 1e-6);
}
