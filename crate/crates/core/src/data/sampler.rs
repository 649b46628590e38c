use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{TaskDataset, TaskId, TaskSample};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A batch drawn from the union of task datasets. Each sample keeps its own
/// task identity and a label in that task's class space.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedBatch {
    /// N×C×H×W
    pub images: Tensor,
    pub tasks: Vec<TaskId>,
    pub labels: Vec<usize>,
    pub centers: Vec<String>,
    pub sample_ids: Vec<String>,
    pub num_classes: BTreeMap<TaskId, usize>,
}

impl MixedBatch {
    pub fn from_samples(samples: &[&TaskSample], num_classes: &BTreeMap<TaskId, usize>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Contract("a batch needs at least one sample".into()))?;
        let image_shape = first.image.shape().to_vec();
        let mut data = Vec::with_capacity(samples.len() * first.image.numel());
        for s in samples {
            if s.image.shape() != image_shape {
                return Err(Error::Dimension(format!(
                    "sample {} has shape {:?}, batch expects {image_shape:?}",
                    s.sample_id,
                    s.image.shape()
                )));
            }
            let classes = num_classes.get(&s.task_id).ok_or_else(|| {
                Error::Contract(format!("no class count for {}", s.task_id))
            })?;
            if s.label >= *classes {
                return Err(Error::Validation(format!(
                    "sample {} label {} outside {} classes",
                    s.sample_id, s.label, classes
                )));
            }
            data.extend_from_slice(s.image.data());
        }
        let mut shape = vec![samples.len()];
        shape.extend(image_shape);
        Ok(Self {
            images: Tensor::new(shape, data)?,
            tasks: samples.iter().map(|s| s.task_id).collect(),
            labels: samples.iter().map(|s| s.label).collect(),
            centers: samples.iter().map(|s| s.center_id.clone()).collect(),
            sample_ids: samples.iter().map(|s| s.sample_id.clone()).collect(),
            num_classes: num_classes.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// One-hot label of sample `i` in its own task's class space.
    pub fn one_hot(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.num_classes[&self.tasks[i]]];
        v[self.labels[i]] = 1.0;
        v
    }

    pub fn count(&self, task: TaskId) -> usize {
        self.tasks.iter().filter(|&&t| t == task).count()
    }

    /// Indices of the samples that belong to `task`.
    pub fn indices_of(&self, task: TaskId) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.tasks[i] == task).collect()
    }

    /// The samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<MixedBatch> {
        if indices.is_empty() {
            return Err(Error::Contract("a batch needs at least one sample".into()));
        }
        let shape = self.images.shape();
        let per = self.images.numel() / shape[0];
        let mut data = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            data.extend_from_slice(&self.images.data()[i * per..(i + 1) * per]);
        }
        let mut new_shape = shape.to_vec();
        new_shape[0] = indices.len();
        Ok(Self {
            images: Tensor::new(new_shape, data)?,
            tasks: indices.iter().map(|&i| self.tasks[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            centers: indices.iter().map(|&i| self.centers[i].clone()).collect(),
            sample_ids: indices.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            num_classes: self.num_classes.clone(),
        })
    }
}

/// Draws batches without replacement from the union of several task
/// datasets, reshuffling at each epoch boundary.
///
/// In the default mode every sample of the union is equally likely at
/// every position, so the expected task mix follows the dataset sizes. The
/// balanced mode interleaves per-task shuffles instead.
pub struct MixedBatchSampler<'a> {
    datasets: Vec<&'a TaskDataset>,
    num_classes: BTreeMap<TaskId, usize>,
    batch_size: usize,
    balanced: bool,
    order: Vec<(usize, usize)>,
    cursor: usize,
}

impl<'a> MixedBatchSampler<'a> {
    pub fn new(datasets: Vec<&'a TaskDataset>, batch_size: usize, balanced: bool) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Contract("batch_size must be at least 1".into()));
        }
        if datasets.is_empty() || datasets.iter().any(|d| d.is_empty()) {
            return Err(Error::Contract("every dataset must be non-empty".into()));
        }
        let mut num_classes = BTreeMap::new();
        for d in &datasets {
            if num_classes.insert(d.task_id(), d.num_classes()).is_some() {
                return Err(Error::Contract(format!("{} appears twice", d.task_id())));
            }
        }
        Ok(Self {
            datasets,
            num_classes,
            batch_size,
            balanced,
            order: Vec::new(),
            cursor: 0,
        })
    }

    pub fn epoch_len(&self) -> usize {
        self.datasets.iter().map(|d| d.len()).sum()
    }

    fn reshuffle<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.order.clear();
        if self.balanced {
            let mut per_task: Vec<Vec<(usize, usize)>> = self
                .datasets
                .iter()
                .enumerate()
                .map(|(d, ds)| {
                    let mut idx: Vec<_> = (0..ds.len()).map(|i| (d, i)).collect();
                    idx.shuffle(rng);
                    idx.reverse();
                    idx
                })
                .collect();
            while per_task.iter().any(|v| !v.is_empty()) {
                for queue in per_task.iter_mut() {
                    if let Some(item) = queue.pop() {
                        self.order.push(item);
                    }
                }
            }
        } else {
            for (d, ds) in self.datasets.iter().enumerate() {
                self.order.extend((0..ds.len()).map(|i| (d, i)));
            }
            self.order.shuffle(rng);
        }
        self.cursor = 0;
    }

    /// Next batch; the last batch of an epoch may be short but never empty.
    pub fn next_batch<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<MixedBatch> {
        if self.cursor >= self.order.len() {
            self.reshuffle(rng);
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let picked: Vec<&TaskSample> = self.order[self.cursor..end]
            .iter()
            .map(|&(d, i)| &self.datasets[d].samples()[i])
            .collect();
        self.cursor = end;
        MixedBatch::from_samples(&picked, &self.num_classes)
    }

    /// A fresh shuffle split into consecutive batches covering the union once.
    pub fn epoch<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<MixedBatch>> {
        self.reshuffle(rng);
        let mut batches = Vec::new();
        while self.cursor < self.order.len() {
            batches.push(self.next_batch(rng)?);
        }
        Ok(batches)
    }
}

/// One batch from a fresh uniform shuffle of `d1 ∪ d2`.
pub fn mixed_batch_sample<R: Rng + ?Sized>(
    d1: &TaskDataset,
    d2: &TaskDataset,
    batch_size: usize,
    rng: &mut R,
) -> Result<MixedBatch> {
    MixedBatchSampler::new(vec![d1, d2], batch_size, false)?.next_batch(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset(task: TaskId, classes: usize, n: usize) -> TaskDataset {
        let samples = (0..n)
            .map(|i| TaskSample {
                sample_id: format!("{task}-{i}"),
                image: Tensor::full([1, 2, 2], i as f64 / n as f64),
                label: i % classes,
                task_id: task,
                center_id: format!("c{}", i % 3),
            })
            .collect();
        TaskDataset::new(task, classes, samples).unwrap()
    }

    #[test]
    fn epoch_covers_union_exactly_once() {
        let d1 = dataset(TaskId::TAU1, 2, 7);
        let d2 = dataset(TaskId::TAU2, 4, 12);
        for balanced in [false, true] {
            let mut sampler = MixedBatchSampler::new(vec![&d1, &d2], 4, balanced).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let batches = sampler.epoch(&mut rng).unwrap();
            assert_eq!(batches.len(), 5);
            assert_eq!(batches.last().unwrap().len(), 3);
            let mut ids: Vec<String> = batches.iter().flat_map(|b| b.sample_ids.clone()).collect();
            ids.sort();
            let mut expected: Vec<String> = d1
                .samples()
                .iter()
                .chain(d2.samples())
                .map(|s| s.sample_id.clone())
                .collect();
            expected.sort();
            assert_eq!(ids, expected);
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let d1 = dataset(TaskId::TAU1, 2, 9);
        let d2 = dataset(TaskId::TAU2, 4, 9);
        let run = |seed| {
            let mut s = MixedBatchSampler::new(vec![&d1, &d2], 5, false).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..8).map(|_| s.next_batch(&mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn labels_stay_in_task_space() {
        let d1 = dataset(TaskId::TAU1, 2, 10);
        let d2 = dataset(TaskId::TAU2, 4, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = mixed_batch_sample(&d1, &d2, 20, &mut rng).unwrap();
        for i in 0..b.len() {
            let oh = b.one_hot(i);
            assert_eq!(oh.len(), if b.tasks[i] == TaskId::TAU1 { 2 } else { 4 });
            assert_eq!(oh.iter().sum::<f64>(), 1.0);
        }
        assert_eq!(b.images.shape(), &[20, 1, 2, 2]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let d1 = dataset(TaskId::TAU1, 2, 3);
        let empty = TaskDataset::new(TaskId::TAU2, 4, vec![]).unwrap();
        assert!(MixedBatchSampler::new(vec![&d1, &empty], 2, false).is_err());
        assert!(MixedBatchSampler::new(vec![&d1], 0, false).is_err());
        assert!(MixedBatchSampler::new(vec![&d1, &d1], 2, false).is_err());
    }
}
