//! Library results checked against independent brute-force computations.

mod common;

use common::*;
use pica_core::groups::{coset_residual, random_block_orthogonal, random_orthogonal, BlockStructure};
use pica_core::patterns::{
    diagonal_pattern, mean_independence_pattern, pattern_from_graph, pattern_from_partition, reflectional_pattern,
    IndependenceGraph, PartitionSpec,
};
use pica_core::recovery::{off_pattern_energy, verify_identifiability};
use pica_core::tensor::{
    marginalize, multilinear_transform_direct, multilinear_transform_modewise, num_unique_entries,
};
use pica_core::{
    enumerate_partitions, hessian_eval, multilinear_transform, polynomial_eval, sample_cumulant, seed, SampleMatrix,
    SquareMatrix,
};
use rand::Rng;

#[test]
fn transform_matches_full_sum() {
    let mut rng = seed::rng(100);
    for r in 1..=5 {
        for d in 1..=4 {
            let t = random_tensor(r, d, &mut rng);
            let a = gaussian_matrix(d, &mut rng);
            let want = naive_transform(&a, &t);
            let got = multilinear_transform(&a, &t).unwrap();
            assert!(got.max_abs_diff(&want).unwrap() < 1e-11, "r={r} d={d}");
            let modewise = multilinear_transform_modewise(&a, &t).unwrap();
            assert!(modewise.max_abs_diff(&want).unwrap() < 1e-11);
            if r <= 4 {
                let direct = multilinear_transform_direct(&a, &t).unwrap();
                assert!(direct.max_abs_diff(&want).unwrap() < 1e-11);
            }
        }
    }
}

#[test]
fn marginal_matches_full_sum() {
    let mut rng = seed::rng(101);
    let t = random_tensor(4, 3, &mut rng);
    for pos in 0..4 {
        let m = marginalize(&t, pos).unwrap();
        for idx in tuples(3, 3) {
            let want: f64 = (0..3)
                .map(|j| {
                    let mut full = idx.clone();
                    full.insert(pos, j);
                    t.get(&full)
                })
                .sum();
            assert!((m.get(&idx) - want).abs() < 1e-13);
        }
    }
}

#[test]
fn polynomial_and_hessian_match_direct_evaluation() {
    let mut rng = seed::rng(102);
    for r in 2..=5 {
        let d = 3;
        let t = random_tensor(r, d, &mut rng);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let want: f64 = tuples(d, r)
            .iter()
            .map(|idx| t.get(idx) * idx.iter().map(|&i| x[i]).product::<f64>())
            .sum();
        assert!((polynomial_eval(&t, &x).unwrap() - want).abs() < 1e-12);

        let h = hessian_eval(&t, &x).unwrap();
        let step = 1e-4;
        let f = |y: &[f64]| polynomial_eval(&t, y).unwrap();
        for i in 0..d {
            for j in 0..d {
                let shifted = |si: f64, sj: f64| {
                    let mut y = x.clone();
                    y[i] += si;
                    y[j] += sj;
                    f(&y)
                };
                let fd = (shifted(step, step) - shifted(step, -step) - shifted(-step, step) + shifted(-step, -step))
                    / (4.0 * step * step);
                assert!((h[(i, j)] - fd).abs() < 1e-5, "r={r} ({i},{j}): {} vs {fd}", h[(i, j)]);
            }
        }
    }
}

#[test]
fn sample_cumulants_match_textbook_formulas() {
    let mut rng = seed::rng(103);
    let x = SampleMatrix::new(
        500,
        3,
        (0..1500).map(|_| rng.random_range(0.0..1.0f64).powi(2) - 0.2).collect(),
    )
    .unwrap();
    for r in 2..=4 {
        let got = sample_cumulant(&x, r).unwrap();
        let want = textbook_cumulant(&x, r);
        assert!(got.max_abs_diff(&want).unwrap() < 1e-13, "order {r}");
    }
}

#[test]
fn partition_counts_are_bell_numbers() {
    for r in 1..=8 {
        assert_eq!(enumerate_partitions(r).unwrap().len(), bell(r), "r={r}");
    }
    assert_eq!(bell(8), 4140);
}

#[test]
fn unique_entry_count_matches_sorted_tuples() {
    for d in 1..=5 {
        for r in 1..=5 {
            let sorted = tuples(d, r).iter().filter(|t| t.windows(2).all(|w| w[0] <= w[1])).count();
            assert_eq!(num_unique_entries(d, r), sorted);
        }
    }
}

fn connected_by_search(g: &IndependenceGraph, idx: &[usize]) -> bool {
    let mut vertices: Vec<usize> = idx.to_vec();
    vertices.dedup();
    let mut seen = vec![vertices[0]];
    let mut frontier = vec![vertices[0]];
    while let Some(v) = frontier.pop() {
        for &u in &vertices {
            if !seen.contains(&u) && g.adjacent(u, v) {
                seen.push(u);
                frontier.push(u);
            }
        }
    }
    seen.len() == vertices.len()
}

#[test]
fn graph_pattern_matches_search_connectivity() {
    let mut rng = seed::rng(104);
    for _ in 0..30 {
        let d = rng.random_range(2..=6);
        let edges: Vec<(usize, usize)> = (0..d)
            .flat_map(|u| (u + 1..d).map(move |v| (u, v)))
            .filter(|_| rng.random_bool(0.4))
            .collect();
        let g = IndependenceGraph::from_edges(d, &edges).unwrap();
        for r in 2..=4 {
            let p = pattern_from_graph(&g, r).unwrap();
            for idx in p.zero_indices().iter().chain(&p.free_indices()) {
                assert_eq!(p.is_zero(idx.as_slice()), !connected_by_search(&g, idx.as_slice()), "{idx}");
            }
        }
    }
}

#[test]
fn structural_patterns_match_definitions() {
    let multiplicities = |idx: &[usize]| -> Vec<usize> {
        let mut counts = vec![0; 6];
        idx.iter().for_each(|&i| counts[i] += 1);
        counts.into_iter().filter(|&c| c > 0).collect()
    };
    let spec = PartitionSpec::new(5, vec![vec![0, 3], vec![1], vec![2, 4]]).unwrap();
    for r in [2, 4] {
        let part = pattern_from_partition(&spec, r).unwrap();
        let diag = diagonal_pattern(5, r).unwrap();
        let refl = reflectional_pattern(5, r).unwrap();
        let mean = mean_independence_pattern(5, r).unwrap();
        for idx in tuples(5, r) {
            let blocks: std::collections::BTreeSet<_> = idx.iter().map(|&i| spec.block_of(i)).collect();
            assert_eq!(part.is_zero(&idx), blocks.len() > 1);
            assert_eq!(diag.is_zero(&idx), idx.iter().any(|&i| i != idx[0]));
            let m = multiplicities(&idx);
            assert_eq!(refl.is_zero(&idx), m.iter().any(|c| c % 2 == 1));
            assert_eq!(mean.is_zero(&idx), m.contains(&1));
        }
    }
}

#[test]
fn energy_is_masked_full_norm() {
    let mut rng = seed::rng(105);
    let spec = PartitionSpec::from_sizes(&[2, 1, 1]).unwrap();
    for r in 3..=4 {
        let p = pattern_from_partition(&spec, r).unwrap();
        let t = random_tensor(r, 4, &mut rng);
        let all = tuples(4, r);
        let total: f64 = all.iter().map(|i| t.get(i).powi(2)).sum();
        let free: f64 = all.iter().filter(|i| !p.is_zero(i)).map(|i| t.get(i).powi(2)).sum();
        let energy = off_pattern_energy(&t, &p).unwrap();
        assert!((energy - (total - free)).abs() < 1e-12);
    }
}

#[test]
fn block_products_have_zero_residual() {
    let b = BlockStructure::new(vec![2, 1, 2]).unwrap();
    let a_true = random_orthogonal(5, 106);
    let a_inv = a_true.inverse().unwrap();
    let mut seen_swap = false;
    for s in 0..20 {
        let p = random_block_orthogonal(&b, s);
        let w = &p * &a_inv;
        let rep = verify_identifiability(&w, &a_true, &b, 0.1).unwrap();
        assert!(rep.residual < 1e-12);
        let expected: Vec<usize> = (0..3)
            .map(|i| {
                (0..3)
                    .find(|&j| b.range(i).any(|x| b.range(j).any(|y| p[(x, y)] != 0.0)))
                    .unwrap()
            })
            .collect();
        assert_eq!(rep.assignment, expected);
        seen_swap |= expected != [0, 1, 2];
    }
    assert!(seen_swap);
}

#[test]
fn arbitrary_rotations_are_far_from_the_coset() {
    let b = BlockStructure::new(vec![2, 2]).unwrap();
    for s in 0..50 {
        let g = random_orthogonal(4, 1000 + s);
        assert!(coset_residual(&g, &b).unwrap().residual > 0.1);
    }
    let id = SquareMatrix::identity(4);
    assert!(coset_residual(&id, &b).unwrap().residual < 1e-15);
}
