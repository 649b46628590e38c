//! Stratified k-fold and leave-one-center-out plans with their validation
//! carve.

use mdmt::data::{synth_generate, SynthConfig};
use mdmt::evaluation::{make_split, SplitKind};

fn main() -> mdmt::Result<()> {
    let data = synth_generate(&SynthConfig::default(), 0)?;
    for kind in [SplitKind::Cv(5), SplitKind::Loco] {
        let plan = make_split(&data.tau1, kind, 0)?;
        println!("{kind}:");
        for (i, fold) in plan.folds.iter().enumerate() {
            let test = data.tau1.subset(&fold.test)?;
            println!(
                "  fold {i}: train {} val {} test {} (test classes {:?}, centers {:?})",
                fold.train.len(),
                fold.val.len(),
                fold.test.len(),
                test.class_counts(),
                test.centers()
            );
        }
    }
    Ok(())
}
