use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::FoldResult;
use super::metrics::Metrics;
use super::splits::SplitKind;
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Row {
    experiment: String,
    backbone: String,
    fold: usize,
    task: String,
    acc: f64,
    f1: f64,
    gm: f64,
    epochs_run: usize,
    best_epoch: usize,
    seed: u64,
}

/// A parsed results file.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub split: Option<SplitKind>,
    pub results: Vec<FoldResult>,
}

/// CSV text with `# schema_version` and `# split` comment lines on top.
pub fn results_to_csv(split: SplitKind, results: &[FoldResult]) -> Result<Vec<u8>> {
    let mut out = format!("# schema_version={RESULTS_SCHEMA_VERSION}\n# split={split}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in results {
            w.serialize(Row {
                experiment: r.experiment.to_string(),
                backbone: r.backbone.clone(),
                fold: r.fold,
                task: r.task.to_string(),
                acc: r.metrics.acc,
                f1: r.metrics.f1,
                gm: r.metrics.gm,
                epochs_run: r.epochs_run,
                best_epoch: r.best_epoch,
                seed: r.seed,
            })?;
        }
        if results.is_empty() {
            w.write_record(["experiment", "backbone", "fold", "task", "acc", "f1", "gm", "epochs_run", "best_epoch", "seed"])?;
        }
        w.flush().map_err(|e| Error::io("<results>", e))?;
    }
    Ok(out)
}

pub fn write_results(path: &Path, split: SplitKind, results: &[FoldResult]) -> Result<()> {
    write_atomic(path, &results_to_csv(split, results)?)
}

fn metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map_while(|l| l.strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn parse_results(text: &str, source: &str) -> Result<ResultsFile> {
    let meta = metadata(text);
    let schema_version = meta
        .get("schema_version")
        .ok_or_else(|| Error::Validation(format!("{source}: no schema_version comment line")))?
        .parse()
        .map_err(|_| Error::Validation(format!("{source}: unreadable schema_version")))?;
    let split = meta.get("split").map(|s| s.parse()).transpose()?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut results = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row?;
        let metrics = Metrics { acc: row.acc, f1: row.f1, gm: row.gm };
        if [metrics.acc, metrics.f1, metrics.gm].iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation(format!("{source}: row {}: metric outside [0, 1]", i + 1)));
        }
        results.push(FoldResult {
            experiment: row.experiment.parse()?,
            backbone: row.backbone,
            fold: row.fold,
            task: row.task.parse()?,
            metrics,
            epochs_run: row.epochs_run,
            best_epoch: row.best_epoch,
            seed: row.seed,
        });
    }
    Ok(ResultsFile { schema_version, split, results })
}

pub fn read_results(path: &Path) -> Result<ResultsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results(&text, &path.display().to_string())
}
