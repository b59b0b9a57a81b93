//! Repetition filtering, speedups and horizontal-waste distributions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RunResult;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no repetitions to summarize")]
    Empty,
    #[error("every repetition was discarded by the {0} rule; run more repetitions or relax the rule")]
    AllDiscarded(DiscardRule),
    #[error("turnaround times must be positive and finite")]
    BadValue,
}

/// Which repetitions are kept before averaging.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "width")]
pub enum DiscardRule {
    /// Keeps `x` with `|x - mean| <= 0.05 * cv`, where `cv` is the
    /// population standard deviation over the mean. The band is
    /// dimensionless, so with any spread at all it keeps almost nothing.
    #[default]
    Literal,
    /// Keeps `x` with `|x - mean| <= width * mean`.
    Relative(f64),
    /// Keeps everything.
    None,
}

impl std::fmt::Display for DiscardRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DiscardRule::Literal => f.write_str("literal"),
            DiscardRule::Relative(w) => write!(f, "relative({w})"),
            DiscardRule::None => f.write_str("none"),
        }
    }
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `true` marks a discarded repetition.
pub fn discard_mask(values: &[f64], rule: DiscardRule) -> Result<Vec<bool>, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(MetricsError::BadValue);
    }
    let (mean, sd) = mean_and_sd(values);
    let half_width = match rule {
        DiscardRule::Literal => 0.05 * sd / mean,
        DiscardRule::Relative(w) => w * mean,
        DiscardRule::None => f64::INFINITY,
    };
    Ok(values.iter().map(|v| (v - mean).abs() > half_width).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub mean: f64,
    /// Population standard deviation over the mean, before discarding.
    pub cv: f64,
    pub discarded: Vec<bool>,
}

/// Mean of the repetitions that survive `rule`.
pub fn summarize_repetitions(values: &[f64], rule: DiscardRule) -> Result<RepetitionSummary, MetricsError> {
    let discarded = discard_mask(values, rule)?;
    let kept: Vec<f64> = values
        .iter()
        .zip(&discarded)
        .filter(|(_, &d)| !d)
        .map(|(&v, _)| v)
        .collect();
    if kept.is_empty() {
        return Err(MetricsError::AllDiscarded(rule));
    }
    let (mean, sd) = mean_and_sd(values);
    Ok(RepetitionSummary {
        mean: kept.iter().sum::<f64>() / kept.len() as f64,
        cv: sd / mean,
        discarded,
    })
}

/// Thresholds 0, 0.01, ..., 1.
pub fn ccdf_thresholds() -> Vec<f64> {
    (0..=100).map(|k| k as f64 / 100.0).collect()
}

/// Fraction of `values` strictly above each threshold.
pub fn ccdf(values: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    thresholds
        .iter()
        .map(|&t| {
            let above = n - sorted.partition_point(|&v| v <= t);
            (t, if n == 0 { 0.0 } else { above as f64 / n as f64 })
        })
        .collect()
}

/// One policy on one workload, relative to a baseline policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub turnaround: RepetitionSummary,
    /// Mean IPC geomean over the kept repetitions.
    pub ipc_geomean: f64,
    pub baseline_turnaround: f64,
    pub baseline_ipc_geomean: f64,
    /// Baseline turnaround over policy turnaround.
    pub tt_speedup: f64,
    /// Policy IPC geomean over baseline IPC geomean.
    pub ipc_speedup: f64,
    /// Horizontal-waste distribution over every quantum of the kept
    /// repetitions.
    pub hw_ccdf: Vec<(f64, f64)>,
}

fn kept_ipc(runs: &[RunResult], discarded: &[bool]) -> f64 {
    let kept: Vec<f64> = runs
        .iter()
        .zip(discarded)
        .filter(|(_, &d)| !d)
        .map(|(r, _)| r.ipc_geomean)
        .collect();
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Filters repetitions of `runs` and of `baseline` with `rule` and compares
/// the survivors.
pub fn compute_metrics(
    runs: &[RunResult],
    baseline: &[RunResult],
    rule: DiscardRule,
) -> Result<PolicyMetrics, MetricsError> {
    let tts: Vec<f64> = runs.iter().map(|r| r.turnaround_quanta).collect();
    let turnaround = summarize_repetitions(&tts, rule)?;
    let base_tts: Vec<f64> = baseline.iter().map(|r| r.turnaround_quanta).collect();
    let base = summarize_repetitions(&base_tts, rule)?;
    let ipc = kept_ipc(runs, &turnaround.discarded);
    let base_ipc = kept_ipc(baseline, &base.discarded);
    let hw: Vec<f64> = runs
        .iter()
        .zip(&turnaround.discarded)
        .filter(|(_, &d)| !d)
        .flat_map(|(r, _)| r.horizontal_waste.iter().copied())
        .collect();
    Ok(PolicyMetrics {
        tt_speedup: base.mean / turnaround.mean,
        ipc_speedup: ipc / base_ipc,
        ipc_geomean: ipc,
        baseline_turnaround: base.mean,
        baseline_ipc_geomean: base_ipc,
        hw_ccdf: ccdf(&hw, &ccdf_thresholds()),
        turnaround,
    })
}
