//! Resilience metrics over episode records: MSR, VPK, APK and TTV, their
//! distributions, and a golden-run comparison with a Mann–Whitney U test.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{EpisodeRecord, Outcome};
use crate::faultlib::FaultClass;
use crate::violations::is_accident;

/// Significance level of the golden-run comparison.
pub const ALPHA: f64 = 0.05;

const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no records")]
    Empty,
    #[error("scenario sets differ: {left:?} vs {right:?}")]
    ScenarioMismatch { left: Vec<String>, right: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Distribution {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRow {
    pub trial_id: String,
    pub scenario: String,
    pub fault_spec: String,
    pub seed: u64,
    pub replicate: u32,
    pub outcome: Outcome,
    pub km: f64,
    pub violations: usize,
    pub accidents: usize,
    pub ttv: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignReport {
    pub scenarios: Vec<String>,
    pub episodes: usize,
    pub successes: usize,
    pub msr_percent: f64,
    /// Distance of the episodes that enter VPK/APK (zero-distance episodes excluded).
    pub total_distance_km: f64,
    pub violations: usize,
    pub accidents: usize,
    /// Pooled violations per km; `null` when no distance was driven.
    pub vpk: Option<f64>,
    pub apk: Option<f64>,
    pub zero_distance_trials: Vec<String>,
    pub vpk_per_episode: Option<Distribution>,
    pub ttv_samples: Vec<f64>,
    pub ttv: Option<Distribution>,
    pub trials: Vec<TrialRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MannWhitney {
    pub n1: usize,
    pub n2: usize,
    /// U of the first sample: pairs (x, y) with x > y, ties counting one half.
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaReport {
    pub msr_delta: f64,
    pub vpk_delta: Option<f64>,
    pub apk_delta: Option<f64>,
    pub ttv_mean_delta: Option<f64>,
    /// Faulted per-episode VPK against golden per-episode VPK.
    pub vpk_test: MannWhitney,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmReport {
    pub fault_spec_id: String,
    pub class: Option<FaultClass>,
    pub label: String,
    pub sweep_value: Option<f64>,
    pub report: CampaignReport,
    pub vs_golden: Option<DeltaReport>,
}

/// Linear interpolation between closest ranks of sorted `v`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Equal-width bins over `[min, max]`; the last bin is closed. A constant
/// sample yields one bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![HistogramBin { lo, hi, count: values.len() }];
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: lo + width * i as f64,
            hi: if i + 1 == bins { hi } else { lo + width * (i + 1) as f64 },
            count: 0,
        })
        .collect();
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}

fn distribution(values: &[f64]) -> Option<Distribution> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let stddev = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Distribution {
        n,
        mean,
        stddev,
        min: sorted[0],
        max: sorted[n - 1],
        p5: percentile(&sorted, 5.0),
        p50: percentile(&sorted, 50.0),
        p95: percentile(&sorted, 95.0),
        histogram: histogram(values, HISTOGRAM_BINS),
    })
}

/// Time from the first injection to the first violation at or after it.
fn ttv(r: &EpisodeRecord) -> Option<f64> {
    let t0 = r.first_injection_time?;
    r.violations.iter().find(|v| v.time >= t0).map(|v| v.time - t0)
}

fn accidents(r: &EpisodeRecord) -> usize {
    r.violations.iter().filter(|v| is_accident(v.kind)).count()
}

/// Per-episode VPK of the episodes that drove a nonzero distance.
fn episode_vpk(records: &[EpisodeRecord]) -> Vec<f64> {
    records.iter().filter(|r| r.distance_km > 0.0).map(|r| r.violations.len() as f64 / r.distance_km).collect()
}

pub fn compute_metrics(records: &[EpisodeRecord]) -> Result<CampaignReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let scenarios: BTreeSet<&str> = records.iter().map(|r| r.trial.scenario_id.as_str()).collect();
    let successes = records.iter().filter(|r| r.outcome == Outcome::Success).count();
    let driven: Vec<&EpisodeRecord> = records.iter().filter(|r| r.distance_km > 0.0).collect();
    let total_distance_km: f64 = driven.iter().map(|r| r.distance_km).sum();
    let violations: usize = driven.iter().map(|r| r.violations.len()).sum();
    let accident_count: usize = driven.iter().map(|r| accidents(r)).sum();
    let rate = |n: usize| (total_distance_km > 0.0).then(|| n as f64 / total_distance_km);
    let ttv_samples: Vec<f64> = records.iter().filter_map(ttv).collect();

    Ok(CampaignReport {
        scenarios: scenarios.iter().map(|s| s.to_string()).collect(),
        episodes: records.len(),
        successes,
        msr_percent: 100.0 * successes as f64 / records.len() as f64,
        total_distance_km,
        violations,
        accidents: accident_count,
        vpk: rate(violations),
        apk: rate(accident_count),
        zero_distance_trials: records.iter().filter(|r| r.distance_km <= 0.0).map(|r| r.trial.id()).collect(),
        vpk_per_episode: distribution(&episode_vpk(records)),
        ttv: distribution(&ttv_samples),
        ttv_samples,
        trials: records
            .iter()
            .map(|r| TrialRow {
                trial_id: r.trial.id(),
                scenario: r.trial.scenario_id.clone(),
                fault_spec: r.trial.fault_spec_id.clone(),
                seed: r.trial.seed,
                replicate: r.trial.replicate_index,
                outcome: r.outcome,
                km: r.distance_km,
                violations: r.violations.len(),
                accidents: accidents(r),
                ttv: ttv(r),
            })
            .collect(),
    })
}

/// Two-sided Mann–Whitney U test of `x` against `y` using the normal
/// approximation with tie and continuity corrections.
pub fn mann_whitney(x: &[f64], y: &[f64]) -> MannWhitney {
    let (n1, n2) = (x.len(), y.len());
    if n1 == 0 || n2 == 0 {
        return MannWhitney { n1, n2, u: 0.0, z: 0.0, p_value: 1.0, significant: false };
    }
    let mut pooled: Vec<(f64, bool)> = x.iter().map(|&v| (v, true)).chain(y.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pooled.len();
    let mut r1 = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share their average
        let rank = (i + 1 + j) as f64 / 2.0;
        r1 += rank * pooled[i..j].iter().filter(|p| p.1).count() as f64;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let (f1, f2, nf) = (n1 as f64, n2 as f64, n as f64);
    let u = r1 - f1 * (f1 + 1.0) / 2.0;
    let mu = f1 * f2 / 2.0;
    let var = f1 * f2 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return MannWhitney { n1, n2, u, z: 0.0, p_value: 1.0, significant: false };
    }
    let diff = u - mu;
    let corrected = if diff.abs() <= 0.5 { 0.0 } else { diff - 0.5 * diff.signum() };
    let z = corrected / var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = (2.0 * std_normal.cdf(-z.abs())).min(1.0);
    MannWhitney { n1, n2, u, z, p_value, significant: p_value < ALPHA }
}

fn delta(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

/// Metric deltas (`report − golden`) and a test on per-episode VPK.
pub fn compare_to_golden(report: &CampaignReport, golden: &CampaignReport) -> Result<DeltaReport, MetricsError> {
    if report.scenarios != golden.scenarios {
        return Err(MetricsError::ScenarioMismatch { left: report.scenarios.clone(), right: golden.scenarios.clone() });
    }
    let per_episode = |r: &CampaignReport| -> Vec<f64> {
        r.trials.iter().filter(|t| t.km > 0.0).map(|t| t.violations as f64 / t.km).collect()
    };
    Ok(DeltaReport {
        msr_delta: report.msr_percent - golden.msr_percent,
        vpk_delta: delta(report.vpk, golden.vpk),
        apk_delta: delta(report.apk, golden.apk),
        ttv_mean_delta: delta(report.ttv.as_ref().map(|d| d.mean), golden.ttv.as_ref().map(|d| d.mean)),
        vpk_test: mann_whitney(&per_episode(report), &per_episode(golden)),
    })
}
