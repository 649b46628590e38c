use std::collections::{BTreeMap, BTreeSet};

use super::compare::{align, Metric};
use super::ttest::{mean, sample_sd};
use crate::data::TaskId;
use crate::error::{Error, Result};
use crate::evaluation::{ExperimentKind, ResultsFile, SplitKind, RESULTS_SCHEMA_VERSION};

/// Mean and spread of one metric for one experiment on one split.
///
/// Each (backbone, seed) run contributes its across-fold mean and sample
/// standard deviation; the cell averages both over runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryCell {
    pub mean: f64,
    pub sd: f64,
    pub runs: usize,
}

impl SummaryCell {
    /// Percent with one decimal, e.g. `65.0(7.1)`.
    pub fn format(&self) -> String {
        format!("{:.1}({:.1})", self.mean * 100.0, self.sd * 100.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryTable {
    pub task: TaskId,
    pub columns: Vec<(SplitKind, Metric)>,
    pub rows: Vec<(ExperimentKind, Vec<Option<SummaryCell>>)>,
    /// Row index of the best mean per column; ties go to the first row.
    pub best: Vec<Option<usize>>,
}

/// Aggregates result files into experiment rows and (split, metric)
/// columns for one task.
pub fn summarize(files: &[ResultsFile], task: TaskId) -> Result<SummaryTable> {
    let versions: BTreeSet<u32> = files.iter().map(|f| f.schema_version).collect();
    if versions.len() > 1 {
        return Err(Error::Validation(format!("conflicting schema versions {versions:?}")));
    }
    if let Some(&v) = versions.iter().next() {
        if v != RESULTS_SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported results schema version {v} (expected {RESULTS_SCHEMA_VERSION})"
            )));
        }
    }

    // (kind, split) -> (backbone, seed) -> fold -> metrics
    type Runs = BTreeMap<(String, u64), BTreeMap<usize, crate::evaluation::Metrics>>;
    let mut cells: BTreeMap<(ExperimentKind, SplitKind), Runs> = BTreeMap::new();
    for (i, file) in files.iter().enumerate() {
        let split = file
            .split
            .ok_or_else(|| Error::Validation(format!("results file {} has no split comment line", i + 1)))?;
        for r in file.results.iter().filter(|r| r.task == task) {
            let runs = cells.entry((r.experiment, split)).or_default();
            let folds = runs.entry((r.backbone.clone(), r.seed)).or_default();
            if folds.insert(r.fold, r.metrics).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate result: {} {split} {} seed {} fold {}",
                    r.experiment, r.backbone, r.seed, r.fold
                )));
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Validation(format!("no {task} results to summarize")));
    }

    let splits: BTreeSet<SplitKind> = cells.keys().map(|(_, s)| *s).collect();
    let kinds: BTreeSet<ExperimentKind> = cells.keys().map(|(k, _)| *k).collect();
    let columns: Vec<(SplitKind, Metric)> = splits
        .iter()
        .flat_map(|&s| Metric::ALL.into_iter().map(move |m| (s, m)))
        .collect();
    let rows: Vec<(ExperimentKind, Vec<Option<SummaryCell>>)> = kinds
        .iter()
        .map(|&kind| {
            let row = columns
                .iter()
                .map(|&(split, metric)| {
                    cells.get(&(kind, split)).map(|runs| {
                        let (means, sds): (Vec<f64>, Vec<f64>) = runs
                            .values()
                            .map(|folds| {
                                let v: Vec<f64> = folds.values().map(|m| metric.of(m)).collect();
                                (mean(&v), sample_sd(&v))
                            })
                            .unzip();
                        SummaryCell { mean: mean(&means), sd: mean(&sds), runs: runs.len() }
                    })
                })
                .collect();
            (kind, row)
        })
        .collect();
    let best = (0..columns.len())
        .map(|c| {
            let mut best: Option<(usize, f64)> = None;
            for (r, (_, row)) in rows.iter().enumerate() {
                if let Some(cell) = row[c] {
                    if best.is_none_or(|(_, m)| cell.mean > m) {
                        best = Some((r, cell.mean));
                    }
                }
            }
            best.map(|(r, _)| r)
        })
        .collect();
    Ok(SummaryTable { task, columns, rows, best })
}

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

impl SummaryTable {
    /// Aligned text; the best cell of each column is wrapped in `**`.
    pub fn to_text(&self) -> String {
        let mut header = vec!["Experiment".to_string()];
        let mut sub = vec![String::new()];
        for (i, (split, metric)) in self.columns.iter().enumerate() {
            let first = i == 0 || self.columns[i - 1].0 != *split;
            header.push(if first { split.to_string().to_uppercase() } else { String::new() });
            sub.push(metric.to_string());
        }
        let mut rows = vec![header, sub];
        for (r, (kind, cells)) in self.rows.iter().enumerate() {
            let mut row = vec![kind.to_string()];
            for (c, cell) in cells.iter().enumerate() {
                row.push(match cell {
                    Some(cell) if self.best[c] == Some(r) => format!("**{}**", cell.format()),
                    Some(cell) => cell.format(),
                    None => "-".into(),
                });
            }
            rows.push(row);
        }
        let mut out = format!("{} test metrics, mean(sd) in percent; ** marks the best per column\n", self.task);
        out.push_str(&align(&rows));
        out
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut out = format!("# schema_version={SUMMARY_SCHEMA_VERSION}\n# task={}\n", self.task).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["experiment", "split", "metric", "mean", "sd", "runs", "cell", "best"])?;
            for (r, (kind, cells)) in self.rows.iter().enumerate() {
                for (c, cell) in cells.iter().enumerate() {
                    let Some(cell) = cell else { continue };
                    let (split, metric) = self.columns[c];
                    w.write_record([
                        kind.to_string(),
                        split.to_string(),
                        metric.to_string(),
                        cell.mean.to_string(),
                        cell.sd.to_string(),
                        cell.runs.to_string(),
                        cell.format(),
                        (self.best[c] == Some(r)).to_string(),
                    ])?;
                }
            }
            w.flush().map_err(|e| Error::io("<summary>", e))?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{FoldResult, Metrics};

    fn file(split: SplitKind, rows: &[(ExperimentKind, usize, f64)]) -> ResultsFile {
        ResultsFile {
            schema_version: 1,
            split: Some(split),
            results: rows
                .iter()
                .map(|&(experiment, fold, acc)| FoldResult {
                    experiment,
                    backbone: "b".into(),
                    fold,
                    task: TaskId::TAU1,
                    metrics: Metrics { acc, f1: acc, gm: acc },
                    epochs_run: 1,
                    best_epoch: 1,
                    seed: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn cell_format_example() {
        let f = file(SplitKind::Cv(2), &[(ExperimentKind::StlTau1, 0, 0.6), (ExperimentKind::StlTau1, 1, 0.7)]);
        let t = summarize(&[f], TaskId::TAU1).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].1[0].unwrap().format(), "65.0(7.1)");
        assert_eq!(t.best, vec![Some(0); 3]);
    }

    #[test]
    fn one_best_per_column_first_wins() {
        let f = file(
            SplitKind::Cv(2),
            &[
                (ExperimentKind::StlTau1, 0, 0.6),
                (ExperimentKind::StlTau1, 1, 0.8),
                (ExperimentKind::Ft, 0, 0.7),
                (ExperimentKind::Ft, 1, 0.7),
                (ExperimentKind::Mdmt, 0, 0.5),
                (ExperimentKind::Mdmt, 1, 0.6),
            ],
        );
        let t = summarize(&[f], TaskId::TAU1).unwrap();
        assert_eq!(t.best[0], Some(0));
        let text = t.to_text();
        let body: String = text.lines().skip(1).collect();
        assert_eq!(body.matches("**").count(), 2 * 3);
    }

    #[test]
    fn conflicting_versions_rejected() {
        let a = file(SplitKind::Cv(2), &[(ExperimentKind::Ft, 0, 0.5)]);
        let mut b = file(SplitKind::Loco, &[(ExperimentKind::Ft, 0, 0.5)]);
        b.schema_version = 2;
        assert!(matches!(summarize(&[a, b], TaskId::TAU1), Err(Error::Validation(_))));
    }

    #[test]
    fn cv_and_loco_columns() {
        let a = file(SplitKind::Cv(2), &[(ExperimentKind::Ft, 0, 0.5), (ExperimentKind::Ft, 1, 0.6)]);
        let b = file(SplitKind::Loco, &[(ExperimentKind::Ft, 0, 0.5), (ExperimentKind::Ft, 1, 0.7)]);
        let t = summarize(&[a, b], TaskId::TAU1).unwrap();
        assert_eq!(t.columns.len(), 6);
        assert!(t.to_text().contains("LOCO"));
        let csv = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 3 + 6);
    }
}
