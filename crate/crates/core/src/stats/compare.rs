use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::ttest::{mean, paired_t_one_tailed, sample_sd, significance_stars, Direction};
use crate::data::TaskId;
use crate::error::{Error, Result};
use crate::evaluation::{FoldResult, Metrics};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Acc,
    F1,
    Gm,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Acc, Metric::F1, Metric::Gm];

    pub fn of(self, m: &Metrics) -> f64 {
        match self {
            Metric::Acc => m.acc,
            Metric::F1 => m.f1,
            Metric::Gm => m.gm,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Acc => "ACC",
            Metric::F1 => "F1",
            Metric::Gm => "GM",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Statistic {
    /// Per-key mean, tested for an increase.
    Mu,
    /// Per-key standard deviation, tested for a decrease.
    Sigma,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Mu => "mu",
            Statistic::Sigma => "sigma",
        })
    }
}

/// How observations of the two result sets are matched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Pairing {
    /// One pair per (backbone, seed) run; μ and σ are taken across that
    /// run's folds.
    #[default]
    Backbone,
    /// One pair per (backbone, seed, fold). Each key holds a single value,
    /// so only μ rows are produced.
    Fold,
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pairing::Backbone => "backbone",
            Pairing::Fold => "fold",
        })
    }
}

impl FromStr for Pairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "backbone" => Ok(Pairing::Backbone),
            "fold" => Ok(Pairing::Fold),
            other => Err(Error::Config(format!("pairing {other:?}: expected backbone or fold"))),
        }
    }
}

/// One row of a significance table.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub metric: Metric,
    pub statistic: Statistic,
    /// Number of paired keys.
    pub n: usize,
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub stars: &'static str,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    backbone: String,
    seed: u64,
    fold: Option<usize>,
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/seed {}", self.backbone, self.seed)?;
        if let Some(fold) = self.fold {
            write!(f, "/fold {fold}")?;
        }
        Ok(())
    }
}

fn group<'a>(results: &'a [FoldResult], task: TaskId, pairing: Pairing, side: &str) -> Result<BTreeMap<Key, Vec<&'a FoldResult>>> {
    let mut groups: BTreeMap<Key, Vec<&FoldResult>> = BTreeMap::new();
    for r in results.iter().filter(|r| r.task == task) {
        let key = Key {
            backbone: r.backbone.clone(),
            seed: r.seed,
            fold: (pairing == Pairing::Fold).then_some(r.fold),
        };
        let members = groups.entry(key.clone()).or_default();
        if members.iter().any(|m| m.fold == r.fold) {
            return Err(Error::Validation(format!("{side}: duplicate {task} result for {key}, fold {}", r.fold)));
        }
        members.push(r);
    }
    if groups.is_empty() {
        return Err(Error::Validation(format!("{side}: no {task} results")));
    }
    Ok(groups)
}

fn describe(keys: &BTreeSet<String>) -> String {
    if keys.is_empty() {
        "none".into()
    } else {
        keys.iter().cloned().collect::<Vec<_>>().join(", ")
    }
}

/// Paired one-tailed tests of A against B on `task`: μ rows test whether
/// A's per-key means are higher, σ rows whether A's per-key spreads are
/// lower.
pub fn compare_experiments(a: &[FoldResult], b: &[FoldResult], task: TaskId, pairing: Pairing) -> Result<Vec<ComparisonReport>> {
    let ga = group(a, task, pairing, "A")?;
    let gb = group(b, task, pairing, "B")?;
    let ka: BTreeSet<String> = ga.keys().map(Key::to_string).collect();
    let kb: BTreeSet<String> = gb.keys().map(Key::to_string).collect();
    if ka != kb {
        return Err(Error::Validation(format!(
            "pairing keys differ; only in A: {}; only in B: {}",
            describe(&ka.difference(&kb).cloned().collect()),
            describe(&kb.difference(&ka).cloned().collect())
        )));
    }
    for (key, members) in &ga {
        let fa: BTreeSet<usize> = members.iter().map(|r| r.fold).collect();
        let fb: BTreeSet<usize> = gb[key].iter().map(|r| r.fold).collect();
        if fa != fb {
            return Err(Error::Validation(format!("{key}: A has folds {fa:?} but B has {fb:?}")));
        }
    }
    let n = ga.len();
    let with_sigma = pairing == Pairing::Backbone && ga.values().all(|m| m.len() >= 2);
    let mut reports = Vec::new();
    for statistic in [Statistic::Mu, Statistic::Sigma] {
        if statistic == Statistic::Sigma && !with_sigma {
            continue;
        }
        for metric in Metric::ALL {
            let summarize = |groups: &BTreeMap<Key, Vec<&FoldResult>>| -> Vec<f64> {
                groups
                    .values()
                    .map(|members| {
                        let values: Vec<f64> = members.iter().map(|r| metric.of(&r.metrics)).collect();
                        match statistic {
                            Statistic::Mu => mean(&values),
                            Statistic::Sigma => sample_sd(&values),
                        }
                    })
                    .collect()
            };
            let direction = match statistic {
                Statistic::Mu => Direction::AGreater,
                Statistic::Sigma => Direction::ALess,
            };
            let test = paired_t_one_tailed(&summarize(&ga), &summarize(&gb), direction)?;
            reports.push(ComparisonReport {
                metric,
                statistic,
                n,
                t: test.t,
                df: test.df,
                p: test.p,
                stars: significance_stars(test.p),
                degenerate: test.degenerate,
            });
        }
    }
    Ok(reports)
}

/// Reports of one comparison ("mdmt vs stl_tau1") on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonSet {
    pub test: String,
    pub split: String,
    pub reports: Vec<ComparisonReport>,
}

pub const COMPARISON_SCHEMA_VERSION: u32 = 1;

pub fn comparison_csv(sets: &[ComparisonSet]) -> Result<Vec<u8>> {
    let mut out = format!("# schema_version={COMPARISON_SCHEMA_VERSION}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["statistic", "test", "split", "metric", "n", "t", "df", "p", "stars", "degenerate"])?;
        for set in sets {
            for r in &set.reports {
                w.write_record([
                    r.statistic.to_string(),
                    set.test.clone(),
                    set.split.clone(),
                    r.metric.to_string(),
                    r.n.to_string(),
                    r.t.to_string(),
                    r.df.to_string(),
                    r.p.to_string(),
                    r.stars.to_string(),
                    r.degenerate.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<comparison>", e))?;
    }
    Ok(out)
}

/// Lays out rows of left-aligned cells with two spaces between columns.
pub(crate) fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Significance stars laid out with one row per (statistic, test) and one
/// column per (split, metric). Degenerate tests are marked with `†`.
pub fn comparison_text(sets: &[ComparisonSet]) -> String {
    let mut splits: Vec<&str> = Vec::new();
    let mut tests: Vec<&str> = Vec::new();
    for s in sets {
        if !splits.contains(&s.split.as_str()) {
            splits.push(&s.split);
        }
        if !tests.contains(&s.test.as_str()) {
            tests.push(&s.test);
        }
    }
    let mut header = vec!["Statistic".to_string(), "Test".to_string()];
    let mut sub = vec![String::new(), String::new()];
    for split in &splits {
        for (i, m) in Metric::ALL.iter().enumerate() {
            header.push(if i == 0 { split.to_uppercase() } else { String::new() });
            sub.push(m.to_string());
        }
    }
    let mut rows = vec![header, sub];
    let mut any_degenerate = false;
    for statistic in [Statistic::Mu, Statistic::Sigma] {
        for test in &tests {
            let mut row = vec![statistic.to_string(), test.to_string()];
            let mut present = false;
            for split in &splits {
                let set = sets.iter().find(|s| s.test == *test && s.split == *split);
                for metric in Metric::ALL {
                    let cell = set
                        .and_then(|s| s.reports.iter().find(|r| r.metric == metric && r.statistic == statistic));
                    row.push(match cell {
                        Some(r) => {
                            present = true;
                            any_degenerate |= r.degenerate;
                            format!("{}{}", r.stars, if r.degenerate { "†" } else { "" })
                        }
                        None => "n/a".into(),
                    });
                }
            }
            if present {
                rows.push(row);
            }
        }
    }
    let mut out = align(&rows);
    out.push_str("* p < 0.05, ** p < 0.01, *** p < 0.001 (one-tailed paired t-test)\n");
    if any_degenerate {
        out.push_str("† zero spread in the paired differences; p follows the fixed convention\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::ExperimentKind;

    fn results(kind: ExperimentKind, values: &[(u64, usize, f64)]) -> Vec<FoldResult> {
        values
            .iter()
            .map(|&(seed, fold, acc)| FoldResult {
                experiment: kind,
                backbone: "b".into(),
                fold,
                task: TaskId::TAU1,
                metrics: Metrics { acc, f1: acc, gm: acc },
                epochs_run: 1,
                best_epoch: 1,
                seed,
            })
            .collect()
    }

    #[test]
    fn identical_sets_give_half() {
        let a = results(ExperimentKind::Mdmt, &[(0, 0, 0.5), (0, 1, 0.7), (1, 0, 0.6), (1, 1, 0.4)]);
        let r = compare_experiments(&a, &a, TaskId::TAU1, Pairing::Backbone).unwrap();
        assert_eq!(r.len(), 6);
        assert!(r.iter().all(|x| x.p == 0.5 && x.stars.is_empty()));
    }

    #[test]
    fn mismatched_keys_are_listed() {
        let a = results(ExperimentKind::Mdmt, &[(0, 0, 0.5), (1, 0, 0.6)]);
        let b = results(ExperimentKind::Ft, &[(0, 0, 0.5), (2, 0, 0.6)]);
        let err = compare_experiments(&a, &b, TaskId::TAU1, Pairing::Backbone).unwrap_err().to_string();
        assert!(err.contains("only in A: b/seed 1") && err.contains("only in B: b/seed 2"), "{err}");
    }

    #[test]
    fn fold_pairing_has_no_sigma_rows() {
        let a = results(ExperimentKind::Mdmt, &[(0, 0, 0.5), (0, 1, 0.7), (0, 2, 0.9)]);
        let b = results(ExperimentKind::Ft, &[(0, 0, 0.4), (0, 1, 0.5), (0, 2, 0.6)]);
        let r = compare_experiments(&a, &b, TaskId::TAU1, Pairing::Fold).unwrap();
        assert_eq!(r.len(), 3);
        assert!(r.iter().all(|x| x.statistic == Statistic::Mu && x.n == 3));
    }

    #[test]
    fn table_layout() {
        let a = results(ExperimentKind::Mdmt, &[(0, 0, 0.5), (0, 1, 0.7), (1, 0, 0.6), (1, 1, 0.4)]);
        let sets = vec![ComparisonSet {
            test: "mdmt vs ft".into(),
            split: "cv:2".into(),
            reports: compare_experiments(&a, &a, TaskId::TAU1, Pairing::Backbone).unwrap(),
        }];
        let text = comparison_text(&sets);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("Statistic") && lines[0].contains("CV:2"));
        assert!(lines[1].contains("ACC") && lines[1].contains("GM"));
        assert!(lines[2].starts_with("mu") && lines[3].starts_with("sigma"));
        let csv = String::from_utf8(comparison_csv(&sets).unwrap()).unwrap();
        assert!(csv.starts_with("# schema_version=1\nstatistic,test,split,metric"));
        assert_eq!(csv.lines().count(), 8);
    }
}
