//! Task-labelled datasets and everything that produces or consumes them.

mod brixia;
mod images;
mod manifest;
mod sampler;
mod synth;

pub use brixia::{brixia_categorize, brixia_global_score, BRIXIA_MAX_GLOBAL, BRIXIA_REGIONS};
pub use images::{load_image, save_image, IdentityCrop, ImageTransform};
pub use manifest::{load_manifest, write_manifest, LoadOptions, MANIFEST_SCHEMA_VERSION};
pub use sampler::{mixed_batch_sample, MixedBatch, MixedBatchSampler};
pub use synth::{latent_labels, synth_generate, SynthConfig, SynthOutput};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Identity of a prediction task. `TAU1` is severity prognosis (binary),
/// `TAU2` is severity assessment (four Brixia categories).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId(pub u8);

impl TaskId {
    pub const TAU1: TaskId = TaskId(1);
    pub const TAU2: TaskId = TaskId(2);

    /// Class count of the canonical tasks.
    pub fn canonical_classes(self) -> Option<usize> {
        match self {
            TaskId::TAU1 => Some(2),
            TaskId::TAU2 => Some(4),
            _ => None,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tau{}", self.0)
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .to_ascii_lowercase()
            .strip_prefix("tau")
            .and_then(|n| n.parse::<u8>().ok())
            .filter(|&n| n >= 1)
            .map(TaskId)
            .ok_or_else(|| Error::Validation(format!("unknown task {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSample {
    pub sample_id: String,
    /// C×H×W, every pixel in [0, 1].
    pub image: Tensor,
    pub label: usize,
    pub task_id: TaskId,
    pub center_id: String,
}

/// Samples labelled for exactly one task.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskDataset {
    task_id: TaskId,
    num_classes: usize,
    samples: Vec<TaskSample>,
}

impl TaskDataset {
    pub fn new(task_id: TaskId, num_classes: usize, samples: Vec<TaskSample>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Validation(format!(
                "{task_id} needs at least 2 classes, got {num_classes}"
            )));
        }
        let mut seen = HashSet::new();
        for s in &samples {
            if s.task_id != task_id {
                return Err(Error::Validation(format!(
                    "sample {} belongs to {} in a {task_id} dataset",
                    s.sample_id, s.task_id
                )));
            }
            if s.label >= num_classes {
                return Err(Error::Validation(format!(
                    "sample {} has label {} but {task_id} has {num_classes} classes",
                    s.sample_id, s.label
                )));
            }
            if s.center_id.is_empty() {
                return Err(Error::Validation(format!("sample {} has no center", s.sample_id)));
            }
            if !s.image.is_finite() {
                return Err(Error::Validation(format!("sample {} has non-finite pixels", s.sample_id)));
            }
            if !seen.insert(s.sample_id.as_str()) {
                return Err(Error::Validation(format!("duplicate sample_id {:?}", s.sample_id)));
            }
        }
        Ok(Self {
            task_id,
            num_classes,
            samples,
        })
    }

    pub fn task_id(&self) -> TaskId {
        self.task_id
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn samples(&self) -> &[TaskSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Distinct center ids in sorted order.
    pub fn centers(&self) -> Vec<String> {
        let mut centers: Vec<String> = self.samples.iter().map(|s| s.center_id.clone()).collect();
        centers.sort();
        centers.dedup();
        centers
    }

    /// Samples whose ids appear in `ids`, in the order of `ids`.
    pub fn subset(&self, ids: &[String]) -> Result<TaskDataset> {
        let index: std::collections::HashMap<&str, &TaskSample> = self
            .samples
            .iter()
            .map(|s| (s.sample_id.as_str(), s))
            .collect();
        let samples = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|s| (*s).clone())
                    .ok_or_else(|| Error::Validation(format!("unknown sample_id {id:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        TaskDataset::new(self.task_id, self.num_classes, samples)
    }

    /// Shape of the first image, if any.
    pub fn image_shape(&self) -> Option<&[usize]> {
        self.samples.first().map(|s| s.image.shape())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, label: usize, task: TaskId) -> TaskSample {
        TaskSample {
            sample_id: id.into(),
            image: Tensor::zeros([1, 2, 2]),
            label,
            task_id: task,
            center_id: "c0".into(),
        }
    }

    #[test]
    fn task_id_parsing() {
        assert_eq!("tau1".parse::<TaskId>().unwrap(), TaskId::TAU1);
        assert_eq!("TAU2".parse::<TaskId>().unwrap(), TaskId::TAU2);
        assert_eq!(TaskId::TAU2.to_string(), "tau2");
        assert!("tau0".parse::<TaskId>().is_err());
        assert!("severity".parse::<TaskId>().is_err());
    }

    #[test]
    fn dataset_invariants() {
        let t1 = TaskId::TAU1;
        assert!(TaskDataset::new(t1, 2, vec![sample("a", 0, t1), sample("b", 1, t1)]).is_ok());
        assert!(TaskDataset::new(t1, 2, vec![sample("a", 2, t1)]).is_err());
        assert!(TaskDataset::new(t1, 2, vec![sample("a", 0, TaskId::TAU2)]).is_err());
        let err = TaskDataset::new(t1, 2, vec![sample("a", 0, t1), sample("a", 1, t1)])
            .unwrap_err()
            .to_string();
        assert!(err.contains("\"a\""), "{err}");
        let mut blank = sample("x", 0, t1);
        blank.center_id.clear();
        assert!(TaskDataset::new(t1, 2, vec![blank]).is_err());
    }

    #[test]
    fn subset_preserves_requested_order() {
        let t1 = TaskId::TAU1;
        let d = TaskDataset::new(t1, 2, vec![sample("a", 0, t1), sample("b", 1, t1)]).unwrap();
        let s = d.subset(&["b".into(), "a".into()]).unwrap();
        assert_eq!(s.samples()[0].sample_id, "b");
        assert!(d.subset(&["zzz".into()]).is_err());
    }
}
