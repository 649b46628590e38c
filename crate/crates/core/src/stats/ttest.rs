use std::fmt;

use super::distribution::student_t_upper_tail;
use crate::error::{Error, Result};

/// Alternative hypothesis of a one-tailed test on d = a − b.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// mean(d) > 0
    AGreater,
    /// mean(d) < 0
    ALess,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::AGreater => Direction::ALess,
            Direction::ALess => Direction::AGreater,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AGreater => "greater",
            Direction::ALess => "less",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p: f64,
    /// The differences had zero spread, so t and p follow the fixed
    /// conventions rather than the t distribution.
    pub degenerate: bool,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// One-tailed paired t-test.
///
/// When every difference is equal the statistic is undefined. Then a zero
/// mean gives t = 0 and p = 0.5, and a nonzero mean gives t = ±∞ with
/// p = 0 or 1 depending on the direction. Both cases set `degenerate`.
pub fn paired_t_one_tailed(a: &[f64], b: &[f64], direction: Direction) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "paired test on {} and {} observations",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Contract("paired test needs at least 2 pairs".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Contract("paired test on non-finite values".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let df = n - 1;
    let m = mean(&d);
    let sd = sample_sd(&d);
    // Differences equal up to rounding count as spread-free; their t
    // would exceed 1e12 and give p = 0 to double precision anyway.
    let spread_free = sd == 0.0 || sd <= 1e-12 * m.abs();
    let (t, degenerate) = if spread_free {
        let t = if m == 0.0 { 0.0 } else { m.signum() * f64::INFINITY };
        (t, true)
    } else {
        (m / (sd / (n as f64).sqrt()), false)
    };
    let upper = if degenerate && t == 0.0 { 0.5 } else { student_t_upper_tail(t, df as f64) };
    let p = match direction {
        Direction::AGreater => upper,
        Direction::ALess => 1.0 - upper,
    };
    Ok(TTest { t, df, p: p.clamp(0.0, 1.0), degenerate })
}

/// "***" below 0.001, "**" below 0.01, "*" below 0.05, otherwise blank.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}
