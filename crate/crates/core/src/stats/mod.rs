//! One-tailed paired t-tests between experiment kinds, significance
//! stars, and the summary tables built from result files.

mod compare;
mod distribution;
mod summary;
mod ttest;

pub use compare::{
    compare_experiments, comparison_csv, comparison_text, ComparisonReport, ComparisonSet, Metric,
    Pairing, Statistic, COMPARISON_SCHEMA_VERSION,
};
pub use distribution::{ln_gamma, regularized_incomplete_beta, student_t_cdf, student_t_upper_tail};
pub use summary::{summarize, SummaryCell, SummaryTable, SUMMARY_SCHEMA_VERSION};
pub use ttest::{mean, paired_t_one_tailed, sample_sd, significance_stars, Direction, TTest};
