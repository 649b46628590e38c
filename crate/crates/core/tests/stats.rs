use mdmt::data::TaskId;
use mdmt::evaluation::{ExperimentKind, FoldResult, Metrics};
use mdmt::stats::{
    compare_experiments, paired_t_one_tailed, significance_stars, student_t_cdf, Direction, Metric, Pairing,
    Statistic,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn reference_upper_tail(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).unwrap().sf(t)
}

#[test]
fn worked_example_matches_reference() {
    let d = [1.0, 2.0, 3.0, 4.0, 5.0];
    let test = paired_t_one_tailed(&d, &[0.0; 5], Direction::AGreater).unwrap();
    assert!((test.t - 4.242641).abs() < 1e-6);
    assert_eq!(test.df, 4);
    assert!((test.p - 0.00662).abs() < 1e-4);
    assert!((test.p - reference_upper_tail(test.t, 4.0)).abs() < 1e-4);
}

#[test]
fn t_cdf_reference_point() {
    assert!((student_t_cdf(2.776, 4.0) - 0.975).abs() < 1e-4);
}

#[test]
fn t_cdf_agrees_with_reference_over_a_grid() {
    for df in [1.0, 2.0, 3.0, 4.5, 9.0, 17.0, 30.0, 120.0] {
        for i in -40..=40 {
            let t = i as f64 * 0.25;
            let reference = StudentsT::new(0.0, 1.0, df).unwrap().cdf(t);
            assert!((student_t_cdf(t, df) - reference).abs() < 1e-10, "t {t} df {df}");
        }
    }
}

#[test]
fn eighteen_pair_fixture_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..200 {
        let a: Vec<f64> = (0..18).map(|_| rng.gen_range(0.5..0.9)).collect();
        let b: Vec<f64> = (0..18).map(|_| rng.gen_range(0.5..0.9)).collect();
        let test = paired_t_one_tailed(&a, &b, Direction::AGreater).unwrap();
        assert!((test.p - reference_upper_tail(test.t, 17.0)).abs() < 1e-4);
        let less = paired_t_one_tailed(&a, &b, Direction::ALess).unwrap();
        assert!((less.p - (1.0 - reference_upper_tail(test.t, 17.0))).abs() < 1e-4);
    }
}

#[test]
fn star_thresholds_are_strict() {
    assert_eq!(significance_stars(0.05), "");
    assert_eq!(significance_stars(0.0499999), "*");
    assert_eq!(significance_stars(0.01), "*");
    assert_eq!(significance_stars(0.0099999), "**");
    assert_eq!(significance_stars(0.001), "**");
    assert_eq!(significance_stars(0.0009999), "***");
    assert_eq!(significance_stars(0.5), "");
}

#[test]
fn zero_spread_conventions() {
    let tie = paired_t_one_tailed(&[0.7; 4], &[0.7; 4], Direction::AGreater).unwrap();
    assert!(tie.degenerate && tie.t == 0.0 && tie.p == 0.5);
    let ahead = paired_t_one_tailed(&[0.8; 4], &[0.7; 4], Direction::AGreater).unwrap();
    assert!(ahead.degenerate && ahead.t == f64::INFINITY && ahead.p == 0.0);
    let behind = paired_t_one_tailed(&[0.8; 4], &[0.7; 4], Direction::ALess).unwrap();
    assert_eq!(behind.p, 1.0);
}

proptest! {
    #[test]
    fn directions_are_complementary(
        pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30)
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let up = paired_t_one_tailed(&a, &b, Direction::AGreater).unwrap();
        let down = paired_t_one_tailed(&a, &b, Direction::ALess).unwrap();
        let swapped = paired_t_one_tailed(&b, &a, Direction::ALess).unwrap();
        if !up.degenerate {
            prop_assert!((up.p + down.p - 1.0).abs() < 1e-12);
        }
        prop_assert!((up.p - swapped.p).abs() < 1e-12);
        prop_assert!((up.t + swapped.t).abs() < 1e-9 || up.t.is_infinite());
    }

    #[test]
    fn p_falls_as_a_improves(
        pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..20),
        shift in 0.001f64..0.5,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let better: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let p0 = paired_t_one_tailed(&a, &b, Direction::AGreater).unwrap().p;
        let p1 = paired_t_one_tailed(&better, &b, Direction::AGreater).unwrap().p;
        prop_assert!(p1 <= p0 + 1e-12);
    }
}

fn row(kind: ExperimentKind, seed: u64, fold: usize, acc: f64) -> FoldResult {
    FoldResult {
        experiment: kind,
        backbone: "cnn".into(),
        fold,
        task: TaskId::TAU1,
        metrics: Metrics { acc, f1: acc, gm: acc },
        epochs_run: 10,
        best_epoch: 5,
        seed,
    }
}

#[test]
fn backbone_pairing_tests_fold_means_and_spreads() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for seed in 0..6 {
        for fold in 0..5 {
            let base: f64 = rng.gen_range(0.6..0.8);
            a.push(row(ExperimentKind::Mdmt, seed, fold, base + rng.gen_range(0.0..0.05)));
            b.push(row(ExperimentKind::StlTau1, seed, fold, base));
        }
    }
    let reports = compare_experiments(&a, &b, TaskId::TAU1, Pairing::Backbone).unwrap();
    assert_eq!(reports.len(), 6);
    let mu_acc = reports
        .iter()
        .find(|r| r.metric == Metric::Acc && r.statistic == Statistic::Mu)
        .unwrap();
    assert_eq!((mu_acc.n, mu_acc.df), (6, 5));

    let fold_mean = |rows: &[FoldResult], seed| {
        let v: Vec<f64> = rows.iter().filter(|r| r.seed == seed).map(|r| r.metrics.acc).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let ma: Vec<f64> = (0..6).map(|s| fold_mean(&a, s)).collect();
    let mb: Vec<f64> = (0..6).map(|s| fold_mean(&b, s)).collect();
    let direct = paired_t_one_tailed(&ma, &mb, Direction::AGreater).unwrap();
    assert!((mu_acc.p - direct.p).abs() < 1e-12);
    assert_eq!(mu_acc.stars, significance_stars(mu_acc.p));

    let fold = compare_experiments(&a, &b, TaskId::TAU1, Pairing::Fold).unwrap();
    assert_eq!(fold.len(), 3);
    assert!(fold.iter().all(|r| r.statistic == Statistic::Mu && r.n == 30));
}

#[test]
fn unmatched_runs_are_named() {
    let a = vec![row(ExperimentKind::Mdmt, 0, 0, 0.7), row(ExperimentKind::Mdmt, 1, 0, 0.7)];
    let b = vec![row(ExperimentKind::StlTau1, 0, 0, 0.6), row(ExperimentKind::StlTau1, 2, 0, 0.6)];
    let msg = compare_experiments(&a, &b, TaskId::TAU1, Pairing::Fold).unwrap_err().to_string();
    assert!(msg.contains("only in A") && msg.contains("only in B"), "{msg}");
}
