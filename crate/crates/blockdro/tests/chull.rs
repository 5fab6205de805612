mod common;

use blockdro::chull::*;
use blockdro::dag::Dag;
use blockdro::moments::Partition;
use blockdro::reduced::solve_checked;
use blockdro_conic::{ProblemBuilder, Settings};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::Rng;

fn t_of(n: usize, mix: &[(f64, IntervalPartition)]) -> Vec<f64> {
    let mut t = vec![0.0; intervals(n).len()];
    for (a, part) in mix {
        for &(k, j) in &part.intervals {
            t[interval_index(n, k, j)] += a;
        }
    }
    t
}

fn values_at(rep: &ChullRep, flat: &[f64]) -> (Vec<f64>, Vec<nalgebra::DMatrix<f64>>) {
    let p = flat[..rep.n()].to_vec();
    let xs = rep
        .partition
        .blocks()
        .iter()
        .enumerate()
        .map(|(r, b)| nalgebra::DMatrix::from_fn(b.len(), b.len(), |a, c| flat[rep.var_index(HullVar::x(r, a, c))]))
        .collect();
    (p, xs)
}

/// Auxiliaries of an interval-rep point built from a mixture, for checking the equalities.
fn interval_flat(rep: &ChullRep, mix: &[(f64, IntervalPartition)]) -> Vec<f64> {
    let n = rep.n();
    let mut flat = vec![0.0; rep.n_vars()];
    for (a, part) in mix {
        let lifted = rep.lift(&part.vertex(n));
        for (f, l) in flat.iter_mut().zip(&lifted) {
            *f += a * l;
        }
    }
    let t = t_of(n, mix);
    for (k, kind) in rep.aux.iter().enumerate() {
        if let AuxKind::Interval { k: a, j } = *kind {
            flat[rep.var_index(HullVar::Aux(k))] = t[interval_index(n, a, j)];
        }
    }
    flat
}

fn max_equality_violation(rep: &ChullRep, flat: &[f64]) -> f64 {
    rep.rows
        .iter()
        .map(|r| (r.terms.iter().map(|&(v, c)| c * flat[rep.var_index(v)]).sum::<f64>() - r.rhs).abs())
        .fold(0.0, f64::max)
}

#[test]
fn interval_vertices_for_two() {
    let rep = interval_partition_rep(2).unwrap();
    let a = IntervalPartition { intervals: vec![(1, 2), (3, 3)] };
    assert_eq!(a.vertex(2), vec![1.0, 0.0]);
    let flat = interval_flat(&rep, &[(1.0, a)]);
    assert!(max_equality_violation(&rep, &flat) < 1e-12);
    let (p, xs) = values_at(&rep, &flat);
    assert_eq!(p, vec![1.0, 0.0]);
    assert_eq!(xs[0].as_slice(), &[1.0, 0.0, 0.0, 0.0]);

    let b = IntervalPartition { intervals: vec![(1, 3)] };
    assert_eq!(b.vertex(2), vec![2.0, 1.0]);
    let flat = interval_flat(&rep, &[(1.0, b)]);
    assert!(max_equality_violation(&rep, &flat) < 1e-12);
    assert_eq!(values_at(&rep, &flat).1[0][(0, 1)], 2.0);
}

#[test]
fn three_patient_vertices() {
    let v = enumerate_interval_partitions(3).unwrap();
    assert_eq!(v.len(), 8);
    for x in [[0.0, 0.0, 0.0], [3.0, 2.0, 1.0], [1.0, 0.0, 1.0]] {
        assert!(v.contains(&x.to_vec()), "{x:?} missing");
    }
    for x in &v {
        for (i, xi) in x.iter().enumerate() {
            assert!(*xi >= 0.0 && *xi <= (3 - i) as f64);
        }
    }
    let p = IntervalPartition::from_vertex(&[1.0, 0.0, 1.0]).unwrap();
    assert_eq!(p.intervals, vec![(1, 2), (3, 4)]);
}

#[test]
fn cross_terms_match_products() {
    for n in [2usize, 4, 6] {
        let rep = interval_partition_rep(n).unwrap();
        for part in interval_partitions(n).unwrap() {
            let x = part.vertex(n);
            let flat = interval_flat(&rep, &[(1.0, part)]);
            assert!(max_equality_violation(&rep, &flat) == 0.0, "n = {n}, x = {x:?}");
            let (_, xs) = values_at(&rep, &flat);
            for (r, b) in rep.partition.blocks().iter().enumerate() {
                assert_eq!(xs[r][(0, 1)], x[b[0]] * x[b[1]]);
            }
        }
    }
}

#[test]
fn odd_interval_rep_is_rejected() {
    assert_eq!(interval_partition_rep(3).unwrap_err(), ChullError::OddDimension(3));
    assert!(matches!(interval_partitions(MAX_ENUMERATION_N + 1), Err(ChullError::TooLarge { .. })));
}

#[test]
fn interval_decompositions() {
    let parts = interval_partitions(3).unwrap();
    let one = decompose_interval_point(&t_of(3, &[(1.0, parts[5].clone())]), 3).unwrap();
    assert_eq!(one.entries.len(), 1);
    assert!((one.entries[0].0 - 1.0).abs() < 1e-12);
    assert_eq!(one.entries[0].1, parts[5].vertex(3));

    let half = decompose_interval_point(&t_of(3, &[(0.5, parts[1].clone()), (0.5, parts[6].clone())]), 3).unwrap();
    let mut got: Vec<_> = half.entries.iter().map(|e| (e.1.clone(), e.0)).collect();
    got.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut want = vec![(parts[1].vertex(3), 0.5), (parts[6].vertex(3), 0.5)];
    want.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    assert_eq!(got.len(), 2);
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g.0, w.0);
        assert!((g.1 - w.1).abs() < 1e-12);
    }

    let uniform: Vec<_> = parts.iter().map(|p| (1.0 / 8.0, p.clone())).collect();
    let dec = decompose_interval_point(&t_of(3, &uniform), 3).unwrap();
    let mean: Vec<f64> = (0..3).map(|i| parts.iter().map(|p| p.vertex(3)[i] / 8.0).sum()).collect();
    let got = dec.mean();
    assert!(got.iter().zip(&mean).all(|(a, b)| (a - b).abs() < 1e-9));
    assert!((dec.weight_sum() - 1.0).abs() < 1e-9);
}

#[test]
fn flow_examples() {
    let parallel = Dag::new(2, vec![(0, 1), (0, 1)]).unwrap();
    let rep = flow_rep(&parallel).unwrap();
    for x in [vec![1.0, 0.0], vec![0.0, 1.0]] {
        let flat = rep.lift(&x);
        assert!(max_equality_violation(&rep, &flat) < 1e-12);
    }
    let half = decompose_flow(&[0.5, 0.5], &parallel).unwrap();
    assert_eq!(half.entries.len(), 2);
    assert!(half.entries.iter().all(|e| (e.0 - 0.5).abs() < 1e-12));

    let chain = Dag::new(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
    assert_eq!(chain.paths(10).unwrap(), vec![vec![1.0; 3]]);
    let dec = decompose_flow(&[1.0, 1.0, 1.0], &chain).unwrap();
    assert_eq!(dec.entries, vec![(1.0, vec![1.0; 3])]);

    let diamond = Dag::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
    let paths = diamond.paths(10).unwrap();
    assert_eq!(paths.len(), 2);
    for p in &paths {
        assert_eq!(p[0] + p[1], 1.0);
    }
    let dec = decompose_flow(&[0.5, 0.5, 0.5, 0.5], &diamond).unwrap();
    assert_eq!(dec.entries.len(), 2);
    assert!(dec.entries.iter().all(|e| (e.0 - 0.5).abs() < 1e-12));
    assert!(decompose_flow(&[0.7, 0.5, 0.5, 0.5], &diamond).is_err());
}

#[test]
fn birkhoff_examples() {
    assert_eq!(permutation_vertices(1).unwrap(), vec![vec![1.0]]);
    assert_eq!(permutation_vertices(2).unwrap().len(), 2);
    assert_eq!(permutation_vertices(3).unwrap().len(), 6);
    let rep = birkhoff_rep(1);
    assert!(max_equality_violation(&rep, &rep.lift(&[1.0])) < 1e-12);

    let id = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let dec = decompose_doubly_stochastic(&id, 3).unwrap();
    assert_eq!(dec.entries, vec![(1.0, id)]);
    let dec = decompose_doubly_stochastic(&[0.5; 4], 2).unwrap();
    assert_eq!(dec.entries.len(), 2);
    assert!(dec.entries.iter().all(|e| (e.0 - 0.5).abs() < 1e-12));
    assert!(decompose_doubly_stochastic(&[0.6, 0.5, 0.4, 0.5], 2).is_err());
}

#[test]
fn explicit_examples() {
    let single = explicit_enumeration_rep(&[vec![1.0, 2.0]], &Partition::single_block(2).unwrap()).unwrap();
    let w = [1.0, -1.0, 0.5, 0.0, 2.0];
    let v = lp_max(&single, &w);
    assert!((v - vertex_max(&single, &[vec![1.0, 2.0]], &w)).abs() < 1e-6);

    let bits = vec![vec![0.0], vec![1.0]];
    let rep = explicit_enumeration_rep(&bits, &Partition::singletons(1).unwrap()).unwrap();
    assert_eq!(rep.block_affine(0).len(), 0);
    // X_11 = p on {0, 1}: maximizing X - p gives 0, maximizing p gives 1
    assert!(lp_max(&rep, &[-1.0, 1.0]).abs() < 1e-6);
    assert!((lp_max(&rep, &[1.0, 0.0]) - 1.0).abs() < 1e-6);
    assert!(matches!(explicit_enumeration_rep(&[], &Partition::singletons(1).unwrap()), Err(ChullError::EmptyVertexSet)));
    assert!(matches!(
        explicit_enumeration_rep_with_limit(&bits, &Partition::singletons(1).unwrap(), 1),
        Err(ChullError::TooManyVertices { .. })
    ));
}

/// `max w'(p, X)` over the representation by LP.
fn lp_max(rep: &ChullRep, w: &[f64]) -> f64 {
    let nonneg = rep.nonneg_indices();
    let mut b = ProblemBuilder::new();
    let vars: Vec<_> = (0..rep.n_vars()).map(|k| if nonneg.contains(&k) { b.add_nonneg() } else { b.add_free() }).collect();
    let (a, rhs) = rep.constraint_matrix();
    for (i, &r) in rhs.iter().enumerate() {
        b.add_row(a.row(i).map(|(k, c)| (vars[k], c)).collect(), r);
    }
    for (k, &c) in w.iter().enumerate() {
        b.add_objective(vars[k], c);
    }
    let sol = solve_checked(&b.build().unwrap(), &Settings::default()).unwrap();
    sol.primal_objective
}

fn vertex_max(rep: &ChullRep, vertices: &[Vec<f64>], w: &[f64]) -> f64 {
    vertices
        .iter()
        .map(|x| rep.lift(x).iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn check_hull(rep: &ChullRep, vertices: &[Vec<f64>], seed: u64) {
    let mut rng = common::rng(seed);
    let len = rep.n_vars() - rep.aux.len();
    for _ in 0..5 {
        let w: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (lp_max(rep, &w), vertex_max(rep, vertices, &w));
        assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "lp {a} vs vertices {b}");
    }
}

#[test]
fn hulls_match_enumeration() {
    for n in [2usize, 4] {
        check_hull(&interval_partition_rep(n).unwrap(), &enumerate_interval_partitions(n).unwrap(), n as u64);
    }
    for m in 1..=4 {
        check_hull(&birkhoff_rep(m), &permutation_vertices(m).unwrap(), 10 + m as u64);
    }
    let dag = Dag::new(5, vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4)]).unwrap();
    check_hull(&flow_rep(&dag).unwrap(), &dag.paths(100).unwrap(), 20);
    let v = enumerate_interval_partitions(4).unwrap();
    check_hull(&explicit_enumeration_rep(&v, &Partition::pairs(4).unwrap()).unwrap(), &v, 21);
}

fn birkhoff_point(m: usize, weights: &[f64], picks: &[usize]) -> (Vec<f64>, Vec<(f64, Vec<f64>)>) {
    let perms = permutation_vertices(m).unwrap();
    let total: f64 = weights.iter().sum();
    let mix: Vec<(f64, Vec<f64>)> = weights.iter().zip(picks).map(|(w, &k)| (w / total, perms[k % perms.len()].clone())).collect();
    let mut p = vec![0.0; m * m];
    for (a, x) in &mix {
        for (pi, xi) in p.iter_mut().zip(x) {
            *pi += a * xi;
        }
    }
    (p, mix)
}

fn assert_decomposition(dec: &VertexDecomposition, mix: &[(f64, Vec<f64>)], partition: &Partition) {
    let target = VertexDecomposition { entries: mix.to_vec() };
    assert!(dec.entries.iter().all(|e| e.0 >= -1e-12));
    assert!((dec.weight_sum() - 1.0).abs() <= 1e-9);
    let r = dec.residual(&target.mean(), &target.block_second_moments(partition), partition);
    assert!(r <= 1e-6, "residual {r:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interval_points_decompose(n in (1usize..4).prop_map(|h| 2 * h), weights in prop::collection::vec(0.01f64..1.0, 1..6), seed in any::<u64>()) {
        let parts = interval_partitions(n).unwrap();
        let mut rng = common::rng(seed);
        let idx = sample(&mut rng, parts.len(), weights.len().min(parts.len()));
        let total: f64 = weights.iter().take(idx.len()).sum();
        let mix: Vec<_> = idx.iter().zip(&weights).map(|(k, w)| (w / total, parts[k].clone())).collect();
        let dec = decompose_interval_point(&t_of(n, &mix), n).unwrap();
        let vmix: Vec<_> = mix.iter().map(|(a, p)| (*a, p.vertex(n))).collect();
        assert_decomposition(&dec, &vmix, &Partition::pairs(n).unwrap());
    }

    #[test]
    fn doubly_stochastic_points_decompose(m in 1usize..5, weights in prop::collection::vec(0.01f64..1.0, 1..6), picks in prop::collection::vec(0usize..24, 6)) {
        let (p, mix) = birkhoff_point(m, &weights, &picks);
        let dec = decompose_doubly_stochastic(&p, m).unwrap();
        assert_decomposition(&dec, &mix, &birkhoff_rep(m).partition);
    }

    #[test]
    fn flows_decompose(weights in prop::collection::vec(0.01f64..1.0, 1..6), picks in prop::collection::vec(0usize..8, 6)) {
        let dag = Dag::new(5, vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (0, 4)]).unwrap();
        let paths = dag.paths(100).unwrap();
        let total: f64 = weights.iter().sum();
        let mix: Vec<_> = weights.iter().zip(&picks).map(|(w, &k)| (w / total, paths[k % paths.len()].clone())).collect();
        let mut p = vec![0.0; dag.n_arcs()];
        for (a, x) in &mix {
            for (pi, xi) in p.iter_mut().zip(x) {
                *pi += a * xi;
            }
        }
        let dec = decompose_flow(&p, &dag).unwrap();
        assert_decomposition(&dec, &mix, &dag.incoming_partition());
    }
}
