//! Generates the synthetic two-task benchmark, writes it as manifests plus
//! PGM images, and loads it back.

use mdmt::data::{load_manifest, synth_generate, write_manifest, LoadOptions, SynthConfig, TaskId};

fn main() -> mdmt::Result<()> {
    let config = SynthConfig { n_tau1: 120, n_tau2: 240, ..SynthConfig::default() };
    let out = synth_generate(&config, 7)?;
    let dir = tempfile::tempdir().expect("temporary directory");
    for (task, dataset) in [(TaskId::TAU1, &out.tau1), (TaskId::TAU2, &out.tau2)] {
        let manifest = write_manifest(&dir.path().join(task.to_string()), dataset)?;
        let loaded = load_manifest(&manifest, &LoadOptions::new(config.image_size).with_task(task))?;
        // PGM stores 8-bit pixels, so values come back quantized.
        let mut worst: f64 = 0.0;
        for (a, b) in loaded.samples().iter().zip(dataset.samples()) {
            assert_eq!((&a.sample_id, a.label, &a.center_id), (&b.sample_id, b.label, &b.center_id));
            for (x, y) in a.image.data().iter().zip(b.image.data()) {
                worst = worst.max((x - y).abs());
            }
        }
        println!(
            "{task}: {} samples, class counts {:?}, centers {:?}, largest pixel change {worst:.4}",
            loaded.len(),
            loaded.class_counts(),
            loaded.centers()
        );
    }
    println!("labels, ids and centers round-trip through {}", dir.path().display());
    Ok(())
}
