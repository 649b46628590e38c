use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::settings::{load_raw, resolve, DataSource, Settings};
use super::{Cli, Command};
use crate::config::format_log;
use crate::data::{load_manifest, synth_generate, write_manifest, LoadOptions, TaskDataset, TaskId};
use crate::error::{Error, Result};
use crate::evaluation::{
    plan_splits, read_results, run_experiment, write_results, CheckpointStore, ExperimentKind, FoldResult,
    ResultsFile, SplitKind, RESULTS_SCHEMA_VERSION,
};
use crate::io::write_atomic;
use crate::stats::{compare_experiments, comparison_csv, comparison_text, summarize, ComparisonSet, Pairing};

pub(super) fn dispatch(cli: Cli) -> Result<()> {
    let mut raw = load_raw(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        raw.set_override("seed", seed);
    }
    if let Some(jobs) = cli.global.jobs {
        raw.set_override("jobs", jobs);
    }
    if let Some(out) = &cli.global.out {
        raw.set_override("out", out.display());
    }
    match &cli.command {
        Command::Generate => {}
        Command::Train { experiment, split } => {
            override_opt(&mut raw, "experiment", experiment);
            override_opt(&mut raw, "split", split);
        }
        Command::Compare { pairing, task, .. } => {
            override_opt(&mut raw, "compare.pairing", pairing);
            override_opt(&mut raw, "report.task", task);
        }
        Command::Report { task, .. } => override_opt(&mut raw, "report.task", task),
        Command::Pipeline { seeds, splits } => {
            override_opt(&mut raw, "pipeline.seeds", seeds);
            override_opt(&mut raw, "pipeline.splits", splits);
        }
    }
    let settings = resolve(&raw)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", settings.jobs)))?;
    pool.install(|| match cli.command {
        Command::Generate => generate(&settings),
        Command::Train { .. } => train(&settings),
        Command::Compare { a, b, .. } => compare(&settings, &a, &b),
        Command::Report { results, .. } => report(&settings, &results),
        Command::Pipeline { .. } => pipeline(&settings),
    })
}

fn override_opt<T: ToString>(raw: &mut crate::config::RawConfig, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        raw.set_override(key, v.to_string());
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn log_settings(settings: &Settings, name: &str) -> Result<()> {
    let path = settings.out.join("logs").join(format!("{name}.log"));
    write_text(&path, &format_log(&settings.log))
}

/// Writes synthetic data if configured, then loads both task datasets
/// from their manifests.
fn prepare_data(settings: &Settings) -> Result<(TaskDataset, TaskDataset)> {
    let (m1, m2) = match &settings.data {
        DataSource::Manifests { tau1, tau2 } => (tau1.clone(), tau2.clone()),
        DataSource::Synth { config, seed } => {
            let out = synth_generate(config, *seed)?;
            let dir = settings.data_dir();
            (write_manifest(&dir.join("tau1"), &out.tau1)?, write_manifest(&dir.join("tau2"), &out.tau2)?)
        }
    };
    let tau1 = load_manifest(&m1, &LoadOptions::new(settings.image_size).with_task(TaskId::TAU1))?;
    let tau2 = load_manifest(&m2, &LoadOptions::new(settings.image_size).with_task(TaskId::TAU2))?;
    Ok((tau1, tau2))
}

fn describe(d: &TaskDataset) -> String {
    format!(
        "{}: {} samples, class counts {:?}, {} centers",
        d.task_id(),
        d.len(),
        d.class_counts(),
        d.centers().len()
    )
}

fn generate(settings: &Settings) -> Result<()> {
    if matches!(settings.data, DataSource::Manifests { .. }) {
        return Err(Error::Config("generate writes synthetic data; remove data.tau1 and data.tau2".into()));
    }
    let (tau1, tau2) = prepare_data(settings)?;
    log_settings(settings, "generate")?;
    println!("wrote {}", settings.data_dir().display());
    println!("{}", describe(&tau1));
    println!("{}", describe(&tau2));
    Ok(())
}

fn results_path(out: &Path, seed: u64, split: SplitKind, kind: ExperimentKind) -> PathBuf {
    out.join("results")
        .join(format!("seed-{seed}"))
        .join(split.dir_name())
        .join(format!("{}.csv", kind.as_str()))
}

fn merged_results_path(out: &Path, split: SplitKind, kind: ExperimentKind) -> PathBuf {
    out.join("results").join(split.dir_name()).join(format!("{}.csv", kind.as_str()))
}

fn print_mean(kind: ExperimentKind, split: SplitKind, results: &[FoldResult]) {
    for task in kind.tasks() {
        let rows: Vec<_> = results.iter().filter(|r| r.task == *task).collect();
        let n = rows.len() as f64;
        let acc = rows.iter().map(|r| r.metrics.acc).sum::<f64>() / n;
        let f1 = rows.iter().map(|r| r.metrics.f1).sum::<f64>() / n;
        let gm = rows.iter().map(|r| r.metrics.gm).sum::<f64>() / n;
        println!("{kind} {split} {task}: acc {acc:.3} f1 {f1:.3} gm {gm:.3} over {} folds", rows.len());
    }
}

fn train(settings: &Settings) -> Result<()> {
    let kind = settings
        .experiment
        .ok_or_else(|| Error::Config("train needs an experiment (--experiment or `experiment` key)".into()))?;
    let (tau1, tau2) = prepare_data(settings)?;
    let config = settings.run_config(settings.seed, settings.split);
    let store = CheckpointStore::new(&settings.checkpoints);
    let splits = plan_splits(&tau1, &tau2, settings.split, settings.seed)?;
    let start = Instant::now();
    let results = run_experiment(kind, &tau1, &tau2, &splits, &config, &store)?;
    let path = results_path(&settings.out, settings.seed, settings.split, kind);
    write_results(&path, settings.split, &results)?;
    log_settings(settings, &format!("train-{}-seed-{}-{}", kind.as_str(), settings.seed, settings.split.dir_name()))?;
    print_mean(kind, settings.split, &results);
    println!("wrote {} in {:.1}s", path.display(), start.elapsed().as_secs_f64());
    Ok(())
}

/// Backbone pairing needs at least two (backbone, seed) runs; with a
/// single run the folds are the only available pairs.
fn auto_pairing(a: &[FoldResult], b: &[FoldResult]) -> Pairing {
    let runs = |rs: &[FoldResult]| rs.iter().map(|r| (r.backbone.clone(), r.seed)).collect::<BTreeSet<_>>().len();
    if runs(a).min(runs(b)) >= 2 {
        Pairing::Backbone
    } else {
        Pairing::Fold
    }
}

fn experiment_of(file: &ResultsFile, path: &Path) -> Result<ExperimentKind> {
    let kinds: BTreeSet<_> = file.results.iter().map(|r| r.experiment).collect();
    match kinds.len() {
        1 => Ok(*kinds.first().expect("one kind")),
        0 => Err(Error::Validation(format!("{}: no result rows", path.display()))),
        _ => Err(Error::Validation(format!("{}: rows from several experiments", path.display()))),
    }
}

fn split_label(file: &ResultsFile) -> String {
    file.split.map_or_else(|| "-".into(), |s| s.to_string())
}

fn comparison_set(a: &ResultsFile, b: &ResultsFile, pa: &Path, pb: &Path, settings: &Settings) -> Result<ComparisonSet> {
    let (ka, kb) = (experiment_of(a, pa)?, experiment_of(b, pb)?);
    if a.split != b.split {
        return Err(Error::Validation(format!(
            "{} uses split {} but {} uses {}",
            pa.display(),
            split_label(a),
            pb.display(),
            split_label(b)
        )));
    }
    let pairing = settings.pairing.unwrap_or_else(|| auto_pairing(&a.results, &b.results));
    Ok(ComparisonSet {
        test: format!("{ka} vs {kb}"),
        split: split_label(a),
        reports: compare_experiments(&a.results, &b.results, settings.task, pairing)?,
    })
}

fn write_comparisons(settings: &Settings, sets: &[ComparisonSet]) -> Result<String> {
    let text = comparison_text(sets);
    write_atomic(&settings.out.join("comparison.csv"), &comparison_csv(sets)?)?;
    write_text(&settings.out.join("comparison.txt"), &text)?;
    Ok(text)
}

fn compare(settings: &Settings, a: &Path, b: &Path) -> Result<()> {
    let (fa, fb) = (read_results(a)?, read_results(b)?);
    let set = comparison_set(&fa, &fb, a, b, settings)?;
    print!("{}", write_comparisons(settings, &[set])?);
    Ok(())
}

fn write_report(settings: &Settings, files: &[ResultsFile]) -> Result<String> {
    let table = summarize(files, settings.task)?;
    let text = table.to_text();
    write_text(&settings.out.join("report.txt"), &text)?;
    write_atomic(&settings.out.join("report.csv"), &table.to_csv()?)?;
    Ok(text)
}

fn report(settings: &Settings, paths: &[PathBuf]) -> Result<()> {
    let files = paths.iter().map(|p| read_results(p)).collect::<Result<Vec<_>>>()?;
    print!("{}", write_report(settings, &files)?);
    Ok(())
}

/// Every kind, in dependency order, for one seed and split.
fn run_seed(
    settings: &Settings,
    tau1: &TaskDataset,
    tau2: &TaskDataset,
    seed: u64,
    split: SplitKind,
) -> Result<Vec<(ExperimentKind, Vec<FoldResult>)>> {
    let config = settings.run_config(seed, split);
    let store = CheckpointStore::new(&settings.checkpoints);
    let splits = plan_splits(tau1, tau2, split, seed)?;
    let mut out = Vec::new();
    for kind in ExperimentKind::ALL {
        let start = Instant::now();
        let results = run_experiment(kind, tau1, tau2, &splits, &config, &store)?;
        write_results(&results_path(&settings.out, seed, split, kind), split, &results)?;
        eprintln!("seed {seed} {split} {kind}: {:.1}s", start.elapsed().as_secs_f64());
        out.push((kind, results));
    }
    Ok(out)
}

fn pipeline(settings: &Settings) -> Result<()> {
    let (tau1, tau2) = prepare_data(settings)?;
    log_settings(settings, "pipeline")?;
    println!("{}", describe(&tau1));
    println!("{}", describe(&tau2));
    let seeds: Vec<u64> = (0..settings.pipeline_seeds as u64).map(|i| settings.seed + i).collect();
    let mut merged_files = Vec::new();
    let mut sets = Vec::new();
    for &split in &settings.pipeline_splits {
        let per_seed = seeds
            .par_iter()
            .map(|&seed| run_seed(settings, &tau1, &tau2, seed, split))
            .collect::<Result<Vec<_>>>()?;
        let mut files = Vec::new();
        for kind in ExperimentKind::ALL {
            let results: Vec<FoldResult> = per_seed
                .iter()
                .flat_map(|runs| runs.iter().filter(|(k, _)| *k == kind).flat_map(|(_, r)| r.iter().cloned()))
                .collect();
            let path = merged_results_path(&settings.out, split, kind);
            write_results(&path, split, &results)?;
            print_mean(kind, split, &results);
            files.push((
                path,
                ResultsFile { schema_version: RESULTS_SCHEMA_VERSION, split: Some(split), results },
            ));
        }
        let find = |k: ExperimentKind| &files[ExperimentKind::ALL.iter().position(|&x| x == k).expect("kind")];
        let (mdmt, stl1, ft) = (find(ExperimentKind::Mdmt), find(ExperimentKind::StlTau1), find(ExperimentKind::Ft));
        for other in [stl1, ft] {
            sets.push(comparison_set(&mdmt.1, &other.1, &mdmt.0, &other.0, settings)?);
        }
        merged_files.extend(files.into_iter().map(|(_, f)| f));
    }
    print!("{}", write_comparisons(settings, &sets)?);
    print!("{}", write_report(settings, &merged_files)?);
    Ok(())
}
