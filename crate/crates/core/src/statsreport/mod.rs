//! Paired significance testing and metric report rendering.

mod report;
mod wilcoxon;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::CompensatedSum;

pub use report::{emit_report, render_report, MetricsReport, ModelRow, ReportFormat, SummaryRow, TestRow, TABLE_HEADER};
pub use wilcoxon::{wilcoxon_signed_rank, Alternative, TestMethod, WilcoxonResult, EXACT_MAX_N};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("paired samples differ in length: {baseline} vs {treatment}")]
    LengthMismatch { baseline: usize, treatment: usize },
    #[error("non-finite score at pair {0}")]
    NonFinite(usize),
    #[error("every paired difference is zero")]
    AllZeroDifferences,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report serialization failed: {0}")]
    Serialize(String),
}

pub type Result<T, E = StatsError> = std::result::Result<T, E>;

/// Per-case scores of two methods on the same cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedScores {
    baseline: Vec<f64>,
    treatment: Vec<f64>,
}

impl PairedScores {
    pub fn new(baseline: Vec<f64>, treatment: Vec<f64>) -> Result<Self> {
        if baseline.len() != treatment.len() {
            return Err(StatsError::LengthMismatch {
                baseline: baseline.len(),
                treatment: treatment.len(),
            });
        }
        if let Some(i) = (0..baseline.len()).find(|&i| !(baseline[i].is_finite() && treatment[i].is_finite())) {
            return Err(StatsError::NonFinite(i));
        }
        Ok(Self { baseline, treatment })
    }

    pub fn len(&self) -> usize {
        self.baseline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.baseline.is_empty()
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn treatment(&self) -> &[f64] {
        &self.treatment
    }

    /// `treatment - baseline` per pair.
    pub fn differences(&self) -> Vec<f64> {
        self.treatment.iter().zip(&self.baseline).map(|(t, b)| t - b).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator).
    pub std: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: n });
    }
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    let ss: CompensatedSum = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    Ok(Summary {
        mean,
        std: (ss.value() / (n - 1) as f64).sqrt(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_basics() {
        let s = summarize(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.std), (1.0, 0.0));
        let s = summarize(&[0.0, 2.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(summarize(&[1.0]), Err(StatsError::TooFewSamples { needed: 2, got: 1 })));
    }

    #[test]
    fn paired_validation() {
        assert!(PairedScores::new(vec![1.0], vec![]).is_err());
        assert!(matches!(
            PairedScores::new(vec![1.0, 2.0], vec![1.0, f64::NAN]),
            Err(StatsError::NonFinite(1))
        ));
    }
}
