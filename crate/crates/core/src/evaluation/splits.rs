use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::TaskDataset;
use crate::error::{Error, Result};

/// Fraction of each training fold held out for early stopping.
pub const VALIDATION_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitKind {
    Cv(usize),
    Loco,
}

impl SplitKind {
    /// Path-safe name such as `cv5` or `loco`.
    pub fn dir_name(self) -> String {
        match self {
            SplitKind::Cv(k) => format!("cv{k}"),
            SplitKind::Loco => "loco".into(),
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitKind::Cv(k) => write!(f, "cv:{k}"),
            SplitKind::Loco => f.write_str("loco"),
        }
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("loco") {
            return Ok(SplitKind::Loco);
        }
        s.strip_prefix("cv:")
            .and_then(|k| k.parse().ok())
            .filter(|&k: &usize| k >= 2)
            .map(SplitKind::Cv)
            .ok_or_else(|| Error::Config(format!("split {s:?}: expected cv:K with K >= 2, or loco")))
    }
}

/// Sample ids of one fold, each list in dataset order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }
}

/// Per-class shuffled round-robin assignment to `k` folds.
///
/// The round-robin offset carries over from one class to the next, so
/// fold sizes differ by at most one as well as per-class counts.
pub fn stratified_kfold(dataset: &TaskDataset, k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::Validation(format!("k = {k}: need at least 2 folds")));
    }
    let counts = dataset.class_counts();
    if let Some((class, &n)) = counts.iter().enumerate().find(|(_, &n)| n > 0 && n < k) {
        return Err(Error::Validation(format!(
            "{}: class {class} has {n} samples, fewer than k = {k}",
            dataset.task_id()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; dataset.len()];
    let mut offset = 0;
    for class in 0..dataset.num_classes() {
        let mut members = class_members(dataset, class, None);
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            fold_of[i] = (offset + j) % k;
        }
        offset += members.len();
    }
    let folds = (0..k)
        .map(|f| {
            let test: Vec<usize> = (0..dataset.len()).filter(|&i| fold_of[i] == f).collect();
            let rest: Vec<usize> = (0..dataset.len()).filter(|&i| fold_of[i] != f).collect();
            carve_fold(dataset, test, rest, &mut rng)
        })
        .collect();
    Ok(SplitPlan { kind: SplitKind::Cv(k), folds })
}

/// One fold per center, in sorted center order. The seed only drives the
/// validation carve.
pub fn loco_split(dataset: &TaskDataset, seed: u64) -> Result<SplitPlan> {
    let centers = dataset.centers();
    if centers.len() < 2 {
        return Err(Error::Validation(format!(
            "{}: leave-one-center-out needs at least 2 centers, found {}",
            dataset.task_id(),
            centers.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = dataset.samples();
    let folds = centers
        .iter()
        .map(|c| {
            let (test, rest): (Vec<usize>, Vec<usize>) =
                (0..samples.len()).partition(|&i| &samples[i].center_id == c);
            carve_fold(dataset, test, rest, &mut rng)
        })
        .collect();
    Ok(SplitPlan { kind: SplitKind::Loco, folds })
}

/// Builds the split the given kind asks for.
pub fn make_split(dataset: &TaskDataset, kind: SplitKind, seed: u64) -> Result<SplitPlan> {
    match kind {
        SplitKind::Cv(k) => stratified_kfold(dataset, k, seed),
        SplitKind::Loco => loco_split(dataset, seed),
    }
}

fn class_members(dataset: &TaskDataset, class: usize, within: Option<&[usize]>) -> Vec<usize> {
    let samples = dataset.samples();
    match within {
        Some(idx) => idx.iter().copied().filter(|&i| samples[i].label == class).collect(),
        None => (0..samples.len()).filter(|&i| samples[i].label == class).collect(),
    }
}

/// Moves a stratified 10% of `rest` (at least one sample) into validation.
fn carve_fold(dataset: &TaskDataset, test: Vec<usize>, rest: Vec<usize>, rng: &mut ChaCha8Rng) -> Fold {
    let mut in_val = vec![false; dataset.len()];
    let mut picked = 0;
    let mut largest: Option<Vec<usize>> = None;
    for class in 0..dataset.num_classes() {
        let mut members = class_members(dataset, class, Some(&rest));
        members.shuffle(rng);
        let take = (members.len() as f64 * VALIDATION_FRACTION).round() as usize;
        for &i in &members[..take] {
            in_val[i] = true;
        }
        picked += take;
        if largest.as_ref().is_none_or(|l| members.len() > l.len()) {
            largest = Some(members);
        }
    }
    if picked == 0 && rest.len() >= 2 {
        if let Some(&i) = largest.as_ref().and_then(|l| l.first()) {
            in_val[i] = true;
        }
    }
    let ids = |idx: &mut dyn Iterator<Item = usize>| -> Vec<String> {
        idx.map(|i| dataset.samples()[i].sample_id.clone()).collect()
    };
    Fold {
        train: ids(&mut rest.iter().copied().filter(|&i| !in_val[i])),
        val: ids(&mut rest.iter().copied().filter(|&i| in_val[i])),
        test: ids(&mut test.into_iter()),
    }
}
