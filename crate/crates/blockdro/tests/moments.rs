use blockdro::moments::{MomentError, MomentJson, MomentSpec, Partition, RawMomentSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn raw(n: usize, blocks: Vec<Vec<usize>>, mu: Vec<f64>, pi: Vec<DMatrix<f64>>) -> RawMomentSpec {
    RawMomentSpec { partition: Partition::new(n, blocks).unwrap(), mu, pi }
}

#[test]
fn identity_block_is_valid() {
    let r = raw(2, vec![vec![0, 1]], vec![0.0, 0.0], vec![DMatrix::identity(2, 2)]);
    assert!(MomentSpec::validate(r, 1e-9).is_ok());
}

#[test]
fn point_mass_is_rejected() {
    let r = raw(1, vec![vec![0]], vec![1.0], vec![DMatrix::from_element(1, 1, 1.0)]);
    assert!(matches!(MomentSpec::validate(r, 1e-9), Err(MomentError::NotStrictlyFeasible { block: 0, .. })));
}

#[test]
fn service_time_singletons() {
    let one = DMatrix::from_element(1, 1, 4.25);
    let r = raw(2, vec![vec![0], vec![1]], vec![2.0, 2.0], vec![one.clone(), one]);
    let spec = MomentSpec::validate(r, 1e-9).unwrap();
    assert!((spec.covariance(1)[(0, 0)] - 0.25).abs() < 1e-12);
}

#[test]
fn partition_errors() {
    assert!(Partition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
    assert!(Partition::new(3, vec![vec![0, 1]]).is_err());
    assert!(Partition::new(2, vec![vec![0], vec![]]).is_err());
    assert!(Partition::new(2, vec![vec![0, 2]]).is_err());
    assert!(Partition::pairs(3).is_err());
    let p = Partition::new(4, vec![vec![3, 0], vec![1, 2]]).unwrap();
    assert_eq!(p.locate(0), (0, 1));
    assert_eq!(p.locate(2), (1, 1));
}

#[test]
fn asymmetric_and_nonfinite_are_rejected() {
    let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.0, 2.0]);
    let r = raw(2, vec![vec![0, 1]], vec![0.0, 0.0], vec![m]);
    assert!(matches!(MomentSpec::validate(r, 1e-9), Err(MomentError::NotSymmetric { .. })));
    let r = raw(1, vec![vec![0]], vec![f64::NAN], vec![DMatrix::from_element(1, 1, 1.0)]);
    assert_eq!(MomentSpec::validate(r, 1e-9).unwrap_err(), MomentError::NonFinite);
}

#[test]
fn zero_shift_is_identity() {
    let spec = MomentSpec::paired(&[1.0, 2.0], &[0.5, 1.0], &[0.3], 1e-9).unwrap();
    assert_eq!(spec.shift_second_moment(&[0.0, 0.0]).unwrap(), spec);
}

#[test]
fn scalar_shift() {
    let spec = MomentSpec::mean_variance(&[2.0], &[0.25]).unwrap();
    let s = spec.shift_second_moment(&[2.0]).unwrap();
    assert!(s.mu()[0].abs() < 1e-15);
    assert!((s.pi()[0][(0, 0)] - 0.25).abs() < 1e-12);
}

#[test]
fn json_uses_one_based_blocks() {
    let text = r#"{"n":3,"blocks":[[1,3],[2]],"mu":[0,1,0],"pi":[[[1,0.5],[0.5,1]],[[2]]]}"#;
    let spec = MomentSpec::from_json_str(text, 1e-9).unwrap();
    assert_eq!(spec.partition().blocks(), &[vec![0, 2], vec![1]]);
    let back: MomentJson = serde_json::from_str(&serde_json::to_string(&spec.to_json()).unwrap()).unwrap();
    assert_eq!(MomentSpec::from_json(&back, 1e-9).unwrap(), spec);
    assert!(MomentSpec::from_json_str(r#"{"n":1,"blocks":[[0]],"mu":[0],"pi":[[[1]]]}"#, 1e-9).is_err());
}

#[test]
fn partition_serde_round_trip() {
    let p = Partition::new(3, vec![vec![2], vec![0, 1]]).unwrap();
    let text = serde_json::to_string(&p).unwrap();
    assert_eq!(text, r#"{"n":3,"blocks":[[3],[1,2]]}"#);
    assert_eq!(serde_json::from_str::<Partition>(&text).unwrap(), p);
}

fn arb_spec() -> impl Strategy<Value = (MomentSpec, Vec<f64>)> {
    (1usize..4).prop_flat_map(|pairs| {
        let n = 2 * pairs;
        (
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(0.1f64..2.0, n),
            prop::collection::vec(-0.95f64..0.95, pairs),
            prop::collection::vec(-5.0f64..5.0, n),
        )
            .prop_map(|(mu, sd, rho, s)| (MomentSpec::paired(&mu, &sd, &rho, 1e-9).unwrap(), s))
    })
}

proptest! {
    #[test]
    fn shift_preserves_covariance((spec, s) in arb_spec()) {
        let shifted = spec.shift_second_moment(&s).unwrap();
        for r in 0..spec.partition().len() {
            let d = (shifted.covariance(r) - spec.covariance(r)).abs().max();
            prop_assert!(d <= 1e-12 * (1.0 + spec.pi()[r].abs().max() + 25.0), "block {} drift {:e}", r, d);
        }
    }

    #[test]
    fn validate_is_idempotent((spec, _) in arb_spec()) {
        let again = MomentSpec::validate(spec.clone().into_raw(), 1e-9).unwrap();
        prop_assert_eq!(again, spec);
    }
}
