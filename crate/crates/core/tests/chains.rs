mod common;

use betasplit::chain_sim::{exact_law, exact_occupancy_law, leaf_stat_from_chain, to_f64};
use betasplit::rng::{replicate, try_replicate};
use betasplit::stat_tests::{mean, variance};
use betasplit::tree_sim::{sample_uniform_leaf_stat, split_pmf, Mode};
use common::hold_moments_oracle;

#[test]
fn exact_hold_moments_match_float_recursion() {
    let oracle = hold_moments_oracle(14);
    for n in 1..=14 {
        let law = exact_law(n, 2).unwrap();
        let (m1, m2) = oracle[n];
        assert!((to_f64(&law.mean_hold) - m1).abs() < 1e-12, "n = {n}");
        assert!((to_f64(&law.second_moment_hold) - m2).abs() < 1e-11, "n = {n}");
    }
}

#[test]
fn exact_small_laws() {
    let two = exact_law(2, 3).unwrap();
    assert_eq!(two.steps_marginal().len(), 1);
    assert_eq!(to_f64(&two.mean_hold), 1.0);
    let three = exact_law(3, 3).unwrap();
    let marg = three.steps_marginal();
    assert_eq!(marg[&1].to_string(), "1/3");
    assert_eq!(marg[&2].to_string(), "2/3");
    assert_eq!(three.mean_steps().to_string(), "5/3");
    assert_eq!(three.mean_hold.to_string(), "4/3");
    let occ = exact_occupancy_law(2, 3).unwrap();
    let k = occ.steps_marginal();
    assert_eq!(k[&1].to_string(), "1/3");
    assert_eq!(k[&2].to_string(), "2/3");
}

#[test]
fn critical_split_examples() {
    let three = split_pmf(-1.0, 3).unwrap();
    assert!((three.prob(1) - 0.5).abs() < 1e-15 && (three.prob(2) - 0.5).abs() < 1e-15);
    let four = split_pmf(-1.0, 4).unwrap();
    for (i, p) in [(1, 4.0 / 11.0), (2, 3.0 / 11.0), (3, 4.0 / 11.0)] {
        assert!((four.prob(i) - p).abs() < 1e-15);
    }
    let uniform = split_pmf(0.0, 6).unwrap();
    for i in 1..6 {
        assert!((uniform.prob(i) - 0.2).abs() < 1e-14);
    }
}

#[test]
fn tree_time_height_at_three() {
    let reps = 100_000;
    let d: Vec<f64> = try_replicate(77, reps, |rng| sample_uniform_leaf_stat(-1.0, 3, Mode::Continuous, 2, rng))
        .unwrap()
        .iter()
        .map(|s| s.time_height)
        .collect();
    let se = (variance(&d) / reps as f64).sqrt();
    assert!((mean(&d) - 4.0 / 3.0).abs() < 3.0 * se);
}

#[test]
fn two_leaves_hold_is_unit_exponential() {
    let reps = 50_000;
    let stats = try_replicate(5, reps, |rng| sample_uniform_leaf_stat(-1.0, 2, Mode::Continuous, 1, rng)).unwrap();
    assert!(stats.iter().all(|s| s.edge_height == 1));
    let d: Vec<f64> = stats.iter().map(|s| s.time_height).collect();
    assert!((mean(&d) - 1.0).abs() < 3.0 / (reps as f64).sqrt());
    assert!((variance(&d) - 1.0).abs() < 0.05);
}

#[test]
fn tree_and_chain_agree_on_mean_edge_height() {
    let n = 12;
    let reps = 40_000;
    let law = exact_law(n, 1).unwrap();
    let target = to_f64(&law.mean_steps());
    let tree: Vec<f64> = try_replicate(9, reps, |rng| sample_uniform_leaf_stat(-1.0, n, Mode::Discrete, 1, rng))
        .unwrap()
        .iter()
        .map(|s| s.edge_height as f64)
        .collect();
    let chain: Vec<f64> = replicate(10, reps, |rng| leaf_stat_from_chain(n, 1, rng).unwrap().edge_height as f64);
    for sample in [tree, chain] {
        let se = (variance(&sample) / reps as f64).sqrt();
        assert!((mean(&sample) - target).abs() < 4.0 * se);
    }
}
