//! Paired one-tailed t-tests between two experiments, printed as a
//! significance table with stars.

use mdmt::data::TaskId;
use mdmt::evaluation::{ExperimentKind, FoldResult, Metrics};
use mdmt::stats::{compare_experiments, comparison_text, paired_t_one_tailed, ComparisonSet, Direction, Pairing};

fn rows(kind: ExperimentKind, base: f64) -> Vec<FoldResult> {
    (0..6u64)
        .flat_map(|seed| {
            (0..5).map(move |fold| {
                let acc = base + 0.01 * ((seed * 7 + fold as u64 * 3) % 5) as f64;
                FoldResult {
                    experiment: kind,
                    backbone: "cnn".into(),
                    fold,
                    task: TaskId::TAU1,
                    metrics: Metrics { acc, f1: acc - 0.01, gm: acc - 0.02 },
                    epochs_run: 30,
                    best_epoch: 20,
                    seed,
                }
            })
        })
        .collect()
}

fn main() -> mdmt::Result<()> {
    let t = paired_t_one_tailed(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5], Direction::AGreater)?;
    println!("d = [1, 2, 3, 4, 5]: t = {:.6}, df = {}, p = {:.6}\n", t.t, t.df, t.p);

    let mdmt = rows(ExperimentKind::Mdmt, 0.76);
    let stl: Vec<FoldResult> = rows(ExperimentKind::StlTau1, 0.74)
        .into_iter()
        .map(|mut r| {
            let bump = 0.004 * ((r.seed * 5 + r.fold as u64 * 2) % 7) as f64;
            r.metrics.acc += bump;
            r.metrics.f1 += 0.5 * bump;
            r.metrics.gm -= 0.3 * bump;
            r
        })
        .collect();
    let reports = compare_experiments(&mdmt, &stl, TaskId::TAU1, Pairing::Backbone)?;
    let set = ComparisonSet { test: "mdmt vs stl_tau1".into(), split: "cv:5".into(), reports };
    print!("{}", comparison_text(&[set]));
    Ok(())
}
