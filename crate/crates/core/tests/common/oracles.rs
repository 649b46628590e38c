//! Independent reference implementations shared by the focused tests and
//! the acceptance suite.

use std::collections::{BTreeMap, BTreeSet};

use mdmt::data::{MixedBatch, TaskDataset, TaskId, TaskSample};
use mdmt::evaluation::{Fold, SplitPlan};
use mdmt::model::{backbone_forward, cross_entropy, head_forward, MultiTaskParams};
use mdmt::tensor::Tensor;
use rand::Rng;

/// Brute-force counts straight from the pairs, without a confusion matrix.
pub fn metrics_oracle(pred: &[usize], truth: &[usize], c: usize) -> (f64, f64, f64) {
    let n = pred.len();
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    let mut f1 = 0.0;
    let mut recall_product = 1.0;
    let mut present = 0;
    for k in 0..c {
        let support = truth.iter().filter(|&&t| t == k).count();
        if support == 0 {
            continue;
        }
        present += 1;
        let tp = (0..n).filter(|&i| truth[i] == k && pred[i] == k).count() as f64;
        let fp = (0..n).filter(|&i| truth[i] != k && pred[i] == k).count() as f64;
        let fn_ = (0..n).filter(|&i| truth[i] == k && pred[i] != k).count() as f64;
        f1 += 2.0 * tp / (2.0 * tp + fp + fn_);
        recall_product *= tp / support as f64;
    }
    (
        correct as f64 / n as f64,
        f1 / present as f64,
        recall_product.powf(1.0 / present as f64),
    )
}

/// Brixia category as the number of thresholds 5, 9 and 14 that `g` reaches.
pub fn brixia_oracle(g: u32) -> usize {
    [5, 9, 14].iter().filter(|&&t| g >= t).count()
}

/// Standalone cross-entropy sum over the samples of one task.
pub fn standalone_sum(params: &MultiTaskParams, batch: &MixedBatch, task: TaskId) -> f64 {
    let idx = batch.indices_of(task);
    if idx.is_empty() {
        return 0.0;
    }
    let sub = batch.select(&idx).unwrap();
    let h = backbone_forward(&sub.images, &params.backbone).unwrap();
    let o = head_forward(&h, &params.heads[&task]).unwrap();
    (0..sub.len())
        .map(|i| cross_entropy(o.row(i), &sub.one_hot(i)).unwrap())
        .sum()
}

pub fn dataset(labels: &[usize], centers: &[usize], classes: usize) -> TaskDataset {
    let samples = labels
        .iter()
        .zip(centers)
        .enumerate()
        .map(|(i, (&label, &c))| TaskSample {
            sample_id: format!("s{i:04}"),
            image: Tensor::zeros([1, 1, 1]),
            label,
            task_id: TaskId::TAU2,
            center_id: format!("c{c}"),
        })
        .collect();
    TaskDataset::new(TaskId::TAU2, classes, samples).unwrap()
}

fn by_id(d: &TaskDataset) -> BTreeMap<&str, &TaskSample> {
    d.samples().iter().map(|s| (s.sample_id.as_str(), s)).collect()
}

fn check_fold_partition(d: &TaskDataset, f: &Fold) {
    let all: BTreeSet<&str> = d.samples().iter().map(|s| s.sample_id.as_str()).collect();
    let parts = [&f.train, &f.val, &f.test];
    let total: usize = parts.iter().map(|p| p.len()).sum();
    let union: BTreeSet<&str> = parts.iter().flat_map(|p| p.iter().map(String::as_str)).collect();
    assert_eq!(total, union.len(), "train, val and test overlap");
    assert_eq!(union, all, "fold does not cover the dataset");
    assert!(!f.train.is_empty() && !f.val.is_empty() && !f.test.is_empty());
}

fn check_val_carve(d: &TaskDataset, f: &Fold) {
    let ids = by_id(d);
    let count = |part: &[String], class: usize| part.iter().filter(|id| ids[id.as_str()].label == class).count();
    for class in 0..d.num_classes() {
        let pool = count(&f.train, class) + count(&f.val, class);
        if pool == 0 {
            continue;
        }
        let val = count(&f.val, class);
        let expected = ((pool as f64) * 0.1).round().max(1.0) as usize;
        assert!(val.abs_diff(expected) <= 1, "class {class}: {val} of {pool} held out");
    }
}

pub fn check_cv(d: &TaskDataset, plan: &SplitPlan, k: usize) {
    assert_eq!(plan.len(), k);
    let ids = by_id(d);
    let mut tested = BTreeSet::new();
    for f in &plan.folds {
        check_fold_partition(d, f);
        check_val_carve(d, f);
        for id in &f.test {
            assert!(tested.insert(id.clone()), "{id} tested twice");
        }
    }
    assert_eq!(tested.len(), d.len());
    for (class, &n) in d.class_counts().iter().enumerate() {
        for f in &plan.folds {
            let in_fold = f.test.iter().filter(|id| ids[id.as_str()].label == class).count();
            assert!(in_fold == n / k || in_fold == n.div_ceil(k), "class {class}: {in_fold} of {n} in one fold");
        }
    }
    let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test.len()).collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "fold sizes {sizes:?}");
}

pub fn check_loco(d: &TaskDataset, plan: &SplitPlan) {
    let ids = by_id(d);
    let centers = d.centers();
    assert_eq!(plan.len(), centers.len());
    let mut held_out = BTreeSet::new();
    for f in &plan.folds {
        check_fold_partition(d, f);
        let test_centers: BTreeSet<&str> = f.test.iter().map(|id| ids[id.as_str()].center_id.as_str()).collect();
        assert_eq!(test_centers.len(), 1);
        let center = *test_centers.first().unwrap();
        let center_size = d.samples().iter().filter(|s| s.center_id == center).count();
        assert_eq!(f.test.len(), center_size, "test is not the whole center");
        for id in f.train.iter().chain(&f.val) {
            assert_ne!(ids[id.as_str()].center_id, center, "{id} from the held-out center");
        }
        assert!(held_out.insert(center.to_string()));
    }
    assert_eq!(held_out.into_iter().collect::<Vec<_>>(), centers);
}

/// 50 to 500 samples over 2 to 6 centers and 2 to 4 classes, with every
/// class holding at least `min_per_class` samples and every center used.
pub fn random_split_dataset<R: Rng>(rng: &mut R, min_per_class: usize) -> TaskDataset {
    let n = rng.gen_range(50..=500);
    let n_centers = rng.gen_range(2..=6);
    let classes = rng.gen_range(2..=4);
    let labels: Vec<usize> = (0..n)
        .map(|i| if i < classes * min_per_class { i % classes } else { rng.gen_range(0..classes) })
        .collect();
    let centers: Vec<usize> = (0..n).map(|i| if i < n_centers { i } else { rng.gen_range(0..n_centers) }).collect();
    dataset(&labels, &centers, classes)
}
