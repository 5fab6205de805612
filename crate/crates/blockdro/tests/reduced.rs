mod common;

use blockdro::appsched::{mv_bound, zapp_bound};
use blockdro::baselines::large_sdp_bound;
use blockdro::chull::{enumerate_interval_partitions, explicit_enumeration_rep, interval_partition_rep};
use blockdro::moments::{MomentSpec, Partition, RawMomentSpec};
use blockdro::reduced::{build, solve_bound};
use blockdro_conic::Settings;
use common::{random_paired, random_spec, rel, rng};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn settings() -> Settings {
    Settings::default()
}

#[test]
fn block_structure() {
    let mut r = rng(1);
    let v = enumerate_interval_partitions(4).unwrap();
    let single = random_spec(Partition::singletons(4).unwrap(), &mut r);
    let p = build(&single, &explicit_enumeration_rep(&v, &Partition::singletons(4).unwrap()).unwrap(), None).unwrap();
    assert_eq!(p.cone.psd_block_sizes, vec![3; 4]);
    let full = random_spec(Partition::single_block(4).unwrap(), &mut r);
    let p = build(&full, &explicit_enumeration_rep(&v, &Partition::single_block(4).unwrap()).unwrap(), None).unwrap();
    assert_eq!(p.cone.psd_block_sizes, vec![9]);
    let pair = random_paired(2, 0.3, &mut r);
    let p = build(&pair, &interval_partition_rep(2).unwrap(), None).unwrap();
    assert_eq!(p.cone.psd_block_sizes, vec![5]);
}

/// `sup E[c+]` over two-point laws with mean 0 and variance 1, by grid over the left mass.
fn two_point_oracle() -> f64 {
    (1..10_000)
        .map(|k| {
            let q = k as f64 / 10_000.0;
            // c = sqrt((1-q)/q) with probability q, -sqrt(q/(1-q)) otherwise
            q * ((1.0 - q) / q).sqrt()
        })
        .fold(0.0, f64::max)
}

#[test]
fn binary_positive_part() {
    let part = Partition::singletons(1).unwrap();
    let spec = MomentSpec::new(part.clone(), vec![0.0], vec![DMatrix::from_element(1, 1, 1.0)]).unwrap();
    let rep = explicit_enumeration_rep(&[vec![0.0], vec![1.0]], &part).unwrap();
    let z = solve_bound(&spec, &rep, None, &settings()).unwrap().z_star;
    assert!((z - two_point_oracle()).abs() < 1e-6, "z = {z}");
    assert!((z - 0.5).abs() < 1e-7);
}

#[test]
fn zero_variance_limit() {
    let mu = [1.0, -0.5, 2.0, 0.3];
    let part = Partition::pairs(4).unwrap();
    let pi = part
        .blocks()
        .iter()
        .map(|b| {
            let m = DMatrix::from_fn(2, 1, |i, _| mu[b[i]]);
            &m * m.transpose() + DMatrix::identity(2, 2) * 1e-6
        })
        .collect();
    let spec = MomentSpec::validate(RawMomentSpec { partition: part, mu: mu.to_vec(), pi }, 1e-9).unwrap();
    let z = zapp_bound(&spec, &[0.0; 4], &settings()).unwrap().z_star;
    let det = enumerate_interval_partitions(4)
        .unwrap()
        .iter()
        .map(|x| common::dot(x, &mu))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((z - det).abs() < 1e-2, "z = {z}, deterministic {det}");
}

#[test]
fn matches_large_sdp_at_six() {
    let v = enumerate_interval_partitions(6).unwrap();
    for (k, rho) in [-1.0, -0.4, 0.0, 0.6, 1.0].into_iter().enumerate() {
        let spec = random_paired(6, rho, &mut rng(100 + k as u64));
        let z = zapp_bound(&spec, &[0.0; 6], &settings()).unwrap().z_star;
        let l = large_sdp_bound(&spec, &v, None, &settings()).unwrap().value;
        assert!(rel(z, l) <= 1e-4, "rho {rho}: reduced {z}, large {l}");
    }
}

#[test]
fn solution_blocks_are_feasible() {
    let spec = random_paired(6, 0.5, &mut rng(7));
    let sol = zapp_bound(&spec, &[0.5; 6], &settings()).unwrap();
    for (r, blk) in sol.blocks.iter().enumerate() {
        let lo = SymmetricEigen::new(blk.clone()).eigenvalues.min();
        assert!(lo >= -10.0 * settings().feas_tol, "block {r} min eigenvalue {lo:e}");
        let b = spec.partition().block(r);
        assert!((blk[(0, 0)] - 1.0).abs() < 1e-7);
        for a in 0..b.len() {
            assert!((blk[(0, 1 + a)] - spec.mu()[b[a]]).abs() < 1e-7);
            assert!((blk[(0, 1 + b.len() + a)] - sol.p[b[a]]).abs() < 1e-7);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn correlation_never_exceeds_mean_variance(rho in -1.0f64..=1.0, seed in any::<u64>()) {
        let spec = random_paired(4, rho, &mut rng(seed));
        let var: Vec<f64> = (0..4).map(|i| { let (r, a) = spec.partition().locate(i); spec.covariance(r)[(a, a)] }).collect();
        let s = vec![0.3; 4];
        let z = zapp_bound(&spec, &s, &settings()).unwrap().z_star;
        let mv = mv_bound(spec.mu(), &var, &s, &settings()).unwrap().z_star;
        prop_assert!(z <= mv + 1e-6, "z {} > mv {}", z, mv);
    }
}
