mod common;

use blockdro::assign::*;
use blockdro::baselines::large_sdp_bound;
use blockdro::chull::permutation_vertices;
use blockdro::moments::{MomentSpec, RawMomentSpec};
use blockdro_conic::Settings;
use common::{random_spec, rel, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn st() -> Settings {
    Settings::default()
}

#[test]
fn deterministic_examples() {
    assert_eq!(assignment_det(&DMatrix::identity(4, 4)).unwrap().0, 4.0);
    let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert_eq!(assignment_det(&c).unwrap(), (4.0, vec![1, 0]));
}

proptest! {
    #[test]
    fn hungarian_matches_brute_force(m in 1usize..6, vals in prop::collection::vec(-5.0f64..5.0, 25)) {
        let c = DMatrix::from_fn(m, m, |i, j| vals[i * 5 + j]);
        let brute = permutation_vertices(m).unwrap().iter()
            .map(|p| p.iter().zip(c.transpose().iter()).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        let (v, perm) = assignment_det(&c).unwrap();
        prop_assert!((v - brute).abs() < 1e-9);
        let mut seen = perm.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..m).collect::<Vec<_>>());
    }
}

fn low_variance(m: usize, mu: &[f64], eps: f64) -> MomentSpec {
    let part = row_partition(m).unwrap();
    let pi = part
        .blocks()
        .iter()
        .map(|b| {
            let v = DMatrix::from_fn(m, 1, |i, _| mu[b[i]]);
            &v * v.transpose() + DMatrix::identity(m, m) * eps
        })
        .collect();
    MomentSpec::validate(RawMomentSpec { partition: part, mu: mu.to_vec(), pi }, 1e-9).unwrap()
}

#[test]
fn single_candidate() {
    let spec = low_variance(1, &[1.7], 0.4);
    let z = zlap_bound(&spec, false, &st()).unwrap().z_star;
    assert!((z - 1.7).abs() < 1e-7);
}

#[test]
fn zero_variance_limit() {
    let mu = [3.0, 1.0, 2.0, 0.5, 2.5, 1.0, 1.0, 2.0, 3.5];
    let z = zlap_bound(&low_variance(3, &mu, 1e-6), false, &st()).unwrap().z_star;
    let det = assignment_det(&DMatrix::from_row_slice(3, 3, &mu)).unwrap().0;
    assert!((z - det).abs() < 1e-2, "{z} vs {det}");
}

#[test]
fn matches_large_sdp() {
    for m in [2usize, 3] {
        for seed in 0..3 {
            let spec = random_spec(row_partition(m).unwrap(), &mut rng(70 + seed));
            let z = zlap_bound(&spec, false, &st()).unwrap().z_star;
            let l = large_sdp_bound(&spec, &permutation_vertices(m).unwrap(), None, &st()).unwrap().value;
            assert!(rel(z, l) <= 1e-4, "m = {m}: {z} vs {l}");
        }
    }
}

/// With means and variances symmetric under `c_ij <-> c_ji` and no within-block correlation,
/// row and column information describe the same instance up to transposition.
#[test]
fn column_blocks_agree_for_symmetric_information() {
    let m = 3;
    let mu = [2.0, 0.5, 1.0, 0.5, 1.5, -0.3, 1.0, -0.3, 0.8];
    let var = [0.4, 0.9, 0.2, 0.9, 1.1, 0.6, 0.2, 0.6, 0.3];
    let diag = |part: blockdro::moments::Partition| {
        let pi = part
            .blocks()
            .iter()
            .map(|b| DMatrix::from_fn(m, m, |i, j| mu[b[i]] * mu[b[j]] + if i == j { var[b[i]] } else { 0.0 }))
            .collect();
        MomentSpec::validate(RawMomentSpec { partition: part, mu: mu.to_vec(), pi }, 1e-9).unwrap()
    };
    let rows = zlap_bound(&diag(row_partition(m).unwrap()), false, &st()).unwrap();
    let cols = zlap_bound(&diag(column_partition(m).unwrap()), true, &st()).unwrap();
    assert!(rel(rows.z_star, cols.z_star) <= 1e-6, "{} vs {}", rows.z_star, cols.z_star);
    assert!(zlap_bound(&diag(column_partition(m).unwrap()), false, &st()).is_err());
    let t = transpose_spec(&diag(column_partition(m).unwrap())).unwrap();
    assert_eq!(t.partition(), &row_partition(m).unwrap());
}
