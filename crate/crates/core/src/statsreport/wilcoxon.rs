//! Wilcoxon signed-rank test on paired differences.
//!
//! Zero differences are dropped before ranking and `n` counts what remains.
//! Tied magnitudes get average ranks. Up to [`EXACT_MAX_N`] pairs the null
//! distribution is counted exactly; above that a normal approximation with
//! tie-corrected variance and a 0.5 continuity correction is used.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{PairedScores, Result, StatsError};

pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    /// Treatment tends to exceed baseline.
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    pub p: f64,
    pub n: usize,
    pub method: TestMethod,
    pub alternative: Alternative,
}

/// Average ranks (1-based) of `values`.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// `(P(W+ >= w), P(W+ <= w))` by counting sign patterns over doubled ranks,
/// which are integers even with ties.
fn exact_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let w = (2.0 * w_plus).round() as usize;
    let all = 2f64.powi(ranks.len() as i32);
    let upper: f64 = counts[w..].iter().sum();
    let lower: f64 = counts[..=w].iter().sum();
    (upper / all, lower / all)
}

fn normal_tails(ranks: &[f64], abs: &[f64], w_plus: f64) -> (f64, f64) {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie / 48.0;
    let sd = var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let upper = std_normal.sf((w_plus - mean - 0.5) / sd);
    let lower = std_normal.cdf((w_plus - mean + 0.5) / sd);
    (upper, lower)
}

pub fn wilcoxon_signed_rank(scores: &PairedScores, alternative: Alternative) -> Result<WilcoxonResult> {
    let d: Vec<f64> = scores.differences().into_iter().filter(|&x| x != 0.0).collect();
    if d.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let (method, (upper, lower)) = if d.len() <= EXACT_MAX_N {
        (TestMethod::Exact, exact_tails(&ranks, w_plus))
    } else {
        (TestMethod::Normal, normal_tails(&ranks, &abs, w_plus))
    };
    let p = match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    };
    Ok(WilcoxonResult {
        w_plus,
        p,
        n: d.len(),
        method,
        alternative,
    })
}
