//! Unbiased squared maximum mean discrepancy.

use serde::{Deserialize, Serialize};

use super::{FeatureSet, MetricError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `k(a, b) = a . b`
    Dot,
    /// `k(a, b) = exp(-gamma |a - b|^2)`
    Rbf { gamma: f64 },
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Dot => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

fn within(x: &FeatureSet, k: &Kernel) -> f64 {
    let n = x.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += k.eval(x.row(i), x.row(j));
            }
        }
    }
    s / (n as f64 * (n as f64 - 1.0))
}

/// Unbiased estimator: off-diagonal within-set means minus twice the full
/// cross mean. Can be negative.
pub fn mmd2(x: &FeatureSet, y: &FeatureSet, kernel: Kernel) -> Result<f64> {
    for s in [x, y] {
        if s.n() < 2 {
            return Err(MetricError::TooFewSamples {
                needed: 2,
                got: s.n(),
            });
        }
    }
    if x.d() != y.d() {
        return Err(MetricError::DimensionMismatch {
            left: x.d(),
            right: y.d(),
        });
    }
    let (n, m) = (x.n(), y.n());
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..m {
            cross += kernel.eval(x.row(i), y.row(j));
        }
    }
    Ok(within(x, &kernel) + within(y, &kernel) - 2.0 / (n as f64 * m as f64) * cross)
}
