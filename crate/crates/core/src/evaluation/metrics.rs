use crate::error::{Error, Result};

/// Test-set scores of one prediction set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub acc: f64,
    pub f1: f64,
    pub gm: f64,
}

/// `c × c` counts indexed `[truth][prediction]`.
pub fn confusion_matrix(predictions: &[usize], truth: &[usize], c: usize) -> Result<Vec<Vec<u64>>> {
    if predictions.is_empty() || predictions.len() != truth.len() {
        return Err(Error::Contract(format!(
            "metrics need equal-length non-empty inputs, got {} predictions and {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    let mut m = vec![vec![0u64; c]; c];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p >= c || t >= c {
            return Err(Error::Contract(format!("class index {} out of range for {c} classes", p.max(t))));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

/// Classes absent from `truth` are left out of the macro F1 and the
/// G-mean; a predicted-but-absent class still costs precision elsewhere.
pub fn compute_metrics(predictions: &[usize], truth: &[usize], c: usize) -> Result<Metrics> {
    let m = confusion_matrix(predictions, truth, c)?;
    let n = predictions.len() as f64;
    let correct: u64 = (0..c).map(|k| m[k][k]).sum();

    let mut f1_sum = 0.0;
    let mut recall_product = 1.0;
    let mut present = 0usize;
    for (k, row) in m.iter().enumerate() {
        let support: u64 = row.iter().sum();
        if support == 0 {
            continue;
        }
        present += 1;
        let tp = row[k] as f64;
        let predicted: u64 = m.iter().map(|r| r[k]).sum();
        let fp = predicted as f64 - tp;
        let fn_ = support as f64 - tp;
        f1_sum += 2.0 * tp / (2.0 * tp + fp + fn_);
        recall_product *= tp / support as f64;
    }
    let gm = recall_product.powf(1.0 / present as f64);
    Ok(Metrics {
        acc: correct as f64 / n,
        f1: f1_sum / present as f64,
        gm: gm.min(1.0),
    })
}
