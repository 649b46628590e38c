mod common;

use common::oracles::metrics_oracle;
use mdmt::evaluation::compute_metrics;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_brute_force_oracle_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let c = rng.gen_range(2..=5);
        let n = rng.gen_range(1..=60);
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        // Mix accurate and random predictors so every regime shows up.
        let skill: f64 = rng.gen();
        let pred: Vec<usize> = truth
            .iter()
            .map(|&t| if rng.gen_bool(skill) { t } else { rng.gen_range(0..c) })
            .collect();
        let m = compute_metrics(&pred, &truth, c).unwrap();
        let (acc, f1, gm) = metrics_oracle(&pred, &truth, c);
        assert_eq!((m.acc, m.f1, m.gm), (acc, f1, gm), "case {case}: pred {pred:?} truth {truth:?}");
    }
}

#[test]
#[allow(clippy::approx_constant)]
fn worked_binary_example() {
    let m = compute_metrics(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
    assert!((m.acc - 0.75).abs() < 1e-6);
    assert!((m.gm - 0.707107).abs() < 1e-6);
    assert!((m.f1 - 0.733333).abs() < 1e-6);
}

#[test]
fn recalls_point_eight_and_half() {
    let truth = [0, 0, 0, 0, 0, 1, 1];
    let pred = [0, 0, 0, 0, 1, 1, 0];
    let m = compute_metrics(&pred, &truth, 2).unwrap();
    assert!((m.gm - 0.40f64.sqrt()).abs() < 1e-12);
}
