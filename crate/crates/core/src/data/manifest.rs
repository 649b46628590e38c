//! CSV manifests pointing at PGM images.
//!
//! ```text
//! # schema_version=1
//! # task=tau2
//! # num_classes=4
//! sample_id,image_path,center_id,r1,r2,r3,r4,r5,r6
//! ```
//! `tau1` manifests carry a `label` column. `tau2` manifests carry either
//! six regional Brixia scores or a precomputed `label`, never both. The
//! comment lines are optional; without them the task comes from
//! [`LoadOptions::task`] or, for regional-score manifests, is `tau2`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::brixia::{brixia_categorize, brixia_global_score, BRIXIA_REGIONS};
use super::images::{load_image, save_image, IdentityCrop, ImageTransform};
use super::{TaskDataset, TaskId, TaskSample};
use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
const REGION_COLUMNS: [&str; BRIXIA_REGIONS] = ["r1", "r2", "r3", "r4", "r5", "r6"];

#[derive(Clone)]
pub struct LoadOptions {
    /// Expected task; must agree with the manifest's own `task` comment.
    pub task: Option<TaskId>,
    pub image_size: usize,
    pub transform: Arc<dyn ImageTransform>,
}

impl LoadOptions {
    pub fn new(image_size: usize) -> Self {
        Self {
            task: None,
            image_size,
            transform: Arc::new(IdentityCrop),
        }
    }

    pub fn with_task(mut self, task: TaskId) -> Self {
        self.task = Some(task);
        self
    }
}

impl fmt::Debug for LoadOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LoadOptions")
            .field("task", &self.task)
            .field("image_size", &self.image_size)
            .finish_non_exhaustive()
    }
}

fn comment_metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map(str::trim)
        .filter_map(|l| l.strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

enum LabelSource {
    Column(usize),
    Regions([usize; BRIXIA_REGIONS]),
}

/// Loads a manifest and every image it references.
///
/// All rows are checked before failing, so the error lists every bad row.
pub fn load_manifest(path: &Path, options: &LoadOptions) -> Result<TaskDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta = comment_metadata(&text);
    if let Some(v) = meta.get("schema_version") {
        if v.parse::<u32>().ok() != Some(MANIFEST_SCHEMA_VERSION) {
            return Err(Error::Validation(format!(
                "{}: unsupported manifest schema_version {v}",
                path.display()
            )));
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| {
        column(name).ok_or_else(|| {
            Error::Validation(format!("{}: missing column {name:?}", path.display()))
        })
    };
    let id_col = require("sample_id")?;
    let path_col = require("image_path")?;
    let center_col = require("center_id")?;

    let region_cols: Vec<Option<usize>> = REGION_COLUMNS.iter().map(|c| column(c)).collect();
    let has_regions = region_cols.iter().any(Option::is_some);
    if has_regions && region_cols.iter().any(Option::is_none) {
        return Err(Error::Validation(format!(
            "{}: regional score columns must be r1..r6",
            path.display()
        )));
    }
    let labels = match (column("label"), has_regions) {
        (Some(_), true) => {
            return Err(Error::Validation(format!(
                "{}: label and regional score columns are mutually exclusive",
                path.display()
            )))
        }
        (Some(c), false) => LabelSource::Column(c),
        (None, true) => {
            let mut cols = [0; BRIXIA_REGIONS];
            for (dst, src) in cols.iter_mut().zip(&region_cols) {
                *dst = src.unwrap();
            }
            LabelSource::Regions(cols)
        }
        (None, false) => {
            return Err(Error::Validation(format!(
                "{}: no label or regional score columns",
                path.display()
            )))
        }
    };

    let declared = meta.get("task").map(|t| t.parse::<TaskId>()).transpose()?;
    let task = match (declared, options.task) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Validation(format!(
                "{}: manifest declares {a} but {b} was expected",
                path.display()
            )))
        }
        (Some(t), _) | (None, Some(t)) => t,
        (None, None) if has_regions => TaskId::TAU2,
        (None, None) => {
            return Err(Error::Validation(format!(
                "{}: task is not declared and cannot be inferred",
                path.display()
            )))
        }
    };
    if has_regions && task != TaskId::TAU2 {
        return Err(Error::Validation(format!(
            "{}: regional scores only apply to tau2, not {task}",
            path.display()
        )));
    }
    let num_classes = match meta.get("num_classes") {
        Some(v) => v.parse::<usize>().map_err(|_| {
            Error::Validation(format!("{}: bad num_classes {v:?}", path.display()))
        })?,
        None => task.canonical_classes().ok_or_else(|| {
            Error::Validation(format!("{}: num_classes missing for {task}", path.display()))
        })?,
    };

    let base = path.parent().unwrap_or(Path::new("."));
    let mut samples = Vec::new();
    let mut problems = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                problems.push(e.to_string());
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let row = (|| -> std::result::Result<TaskSample, String> {
            let field = |i: usize| record.get(i).unwrap_or("").to_string();
            let sample_id = field(id_col);
            if sample_id.is_empty() {
                return Err("empty sample_id".into());
            }
            if !seen.insert(sample_id.clone()) {
                return Err(format!("duplicate sample_id {sample_id:?}"));
            }
            let center_id = field(center_col);
            if center_id.is_empty() {
                return Err("empty center_id".into());
            }
            let label = match &labels {
                LabelSource::Column(c) => field(*c)
                    .parse::<usize>()
                    .map_err(|_| format!("bad label {:?}", field(*c)))?,
                LabelSource::Regions(cols) => {
                    let scores = cols
                        .iter()
                        .map(|&c| field(c).parse::<u32>().map_err(|_| format!("bad score {:?}", field(c))))
                        .collect::<std::result::Result<Vec<_>, _>>()?;
                    let global = brixia_global_score(&scores).map_err(|e| e.to_string())?;
                    brixia_categorize(global).map_err(|e| e.to_string())?
                }
            };
            if label >= num_classes {
                return Err(format!("label {label} out of range for {num_classes} classes"));
            }
            let image_path = base.join(field(path_col));
            let image = load_image(&image_path, options.image_size, options.transform.as_ref())
                .map_err(|e| e.to_string())?;
            Ok(TaskSample {
                sample_id,
                image,
                label,
                task_id: task,
                center_id,
            })
        })();
        match row {
            Ok(s) => samples.push(s),
            Err(msg) => problems.push(format!("row {line}: {msg}")),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(format!(
            "{}: {} bad row(s): {}",
            path.display(),
            problems.len(),
            problems.join("; ")
        )));
    }
    TaskDataset::new(task, num_classes, samples)
}

/// Materializes a dataset as `dir/manifest.csv` plus `dir/images/<id>.pgm`.
///
/// Labels are written to a `label` column. Returns the manifest path.
pub fn write_manifest(dir: &Path, dataset: &TaskDataset) -> Result<PathBuf> {
    let mut rows = csv::Writer::from_writer(Vec::new());
    rows.write_record(["sample_id", "image_path", "center_id", "label"])?;
    for s in dataset.samples() {
        let rel = format!("images/{}.pgm", s.sample_id);
        save_image(&dir.join(&rel), &s.image)?;
        rows.write_record([
            s.sample_id.as_str(),
            rel.as_str(),
            s.center_id.as_str(),
            &s.label.to_string(),
        ])?;
    }
    let body = rows
        .into_inner()
        .map_err(|e| Error::Validation(e.to_string()))?;
    let mut bytes = format!(
        "# schema_version={MANIFEST_SCHEMA_VERSION}\n# task={}\n# num_classes={}\n",
        dataset.task_id(),
        dataset.num_classes()
    )
    .into_bytes();
    bytes.extend(body);
    let path = dir.join("manifest.csv");
    crate::io::write_atomic(&path, &bytes)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn write_pgm(dir: &Path, name: &str) {
        let data: Vec<f64> = (0..16).map(|v| v as f64 / 15.0).collect();
        save_image(&dir.join(name), &Tensor::new([1, 4, 4], data).unwrap()).unwrap();
    }

    #[test]
    fn header_only_manifest_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "# task=tau2\nsample_id,image_path,center_id,label\n").unwrap();
        let d = load_manifest(&path, &LoadOptions::new(4)).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.num_classes(), 4);
        assert_eq!(d.task_id(), TaskId::TAU2);

        fs::write(&path, "sample_id,image_path,center_id,label\n").unwrap();
        let d = load_manifest(&path, &LoadOptions::new(4).with_task(TaskId::TAU1)).unwrap();
        assert_eq!(d.num_classes(), 2);
    }

    #[test]
    fn regional_scores_are_categorized() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(dir.path(), "x.pgm");
        let path = dir.path().join("m.csv");
        fs::write(
            &path,
            "sample_id,image_path,center_id,r1,r2,r3,r4,r5,r6\n\
             a,x.pgm,c1,3,3,3,3,1,0\n\
             b,x.pgm,c1,3,3,3,3,2,0\n",
        )
        .unwrap();
        let d = load_manifest(&path, &LoadOptions::new(4)).unwrap();
        assert_eq!(d.task_id(), TaskId::TAU2);
        assert_eq!(d.labels(), vec![2, 3]);
    }

    #[test]
    fn duplicate_ids_are_named() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(dir.path(), "x.pgm");
        let path = dir.path().join("m.csv");
        fs::write(
            &path,
            "sample_id,image_path,center_id,label\np7,x.pgm,c,0\np7,x.pgm,c,1\n",
        )
        .unwrap();
        let err = load_manifest(&path, &LoadOptions::new(4).with_task(TaskId::TAU1))
            .unwrap_err()
            .to_string();
        assert!(err.contains("p7") && err.contains("row 3"), "{err}");
    }

    #[test]
    fn every_bad_row_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(dir.path(), "x.pgm");
        let path = dir.path().join("m.csv");
        fs::write(
            &path,
            "sample_id,image_path,center_id,label\n\
             a,x.pgm,c,0\n\
             b,missing.pgm,c,1\n\
             c,x.pgm,c,5\n",
        )
        .unwrap();
        let err = load_manifest(&path, &LoadOptions::new(4).with_task(TaskId::TAU1))
            .unwrap_err()
            .to_string();
        assert!(err.contains("2 bad row(s)") && err.contains("row 3") && err.contains("row 4"), "{err}");
    }

    #[test]
    fn label_and_regions_are_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "sample_id,image_path,center_id,label,r1,r2,r3,r4,r5,r6\n").unwrap();
        assert!(load_manifest(&path, &LoadOptions::new(4)).is_err());
    }

    #[test]
    fn declared_task_must_match_expectation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "# task=tau1\nsample_id,image_path,center_id,label\n").unwrap();
        assert!(load_manifest(&path, &LoadOptions::new(4).with_task(TaskId::TAU2)).is_err());
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let samples = (0..3)
            .map(|i| TaskSample {
                sample_id: format!("s{i}"),
                image: Tensor::new([1, 4, 4], (0..16).map(|v| ((v + i) % 16) as f64 / 15.0).collect())
                    .unwrap(),
                label: i % 2,
                task_id: TaskId::TAU1,
                center_id: format!("c{i}"),
            })
            .collect();
        let d = TaskDataset::new(TaskId::TAU1, 2, samples).unwrap();
        let path = write_manifest(dir.path(), &d).unwrap();
        let back = load_manifest(&path, &LoadOptions::new(4)).unwrap();
        assert_eq!(back.labels(), d.labels());
        assert_eq!(back.centers(), d.centers());
        for (a, b) in back.samples().iter().zip(d.samples()) {
            for (x, y) in a.image.data().iter().zip(b.image.data()) {
                assert!((x - y).abs() < 1.0 / 255.0 + 1e-9);
            }
        }
    }
}
