//! Fault-injection campaigns: planning, episode execution, metrics and the
//! golden-run comparison.

mod config;
mod episode;
mod metrics;
mod output;

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{apply_override, AgentConfig, AgentParamsConfig, CampaignConfig, FaultSpecEntry, ResolvedCampaign, ResolvedManifest, ScenarioEntry};
pub use episode::{run_episode, EpisodeContext};
pub use metrics::{
    compare_to_golden, compute_metrics, histogram, mann_whitney, percentile, ArmReport, CampaignReport, DeltaReport,
    Distribution, HistogramBin, MannWhitney, MetricsError, TrialRow, ALPHA,
};
pub use output::{
    build_report, parse_episodes, read_episodes, read_manifest, write_episodes, write_outputs, write_report_files,
    FullReport, EPISODES_FILE, MANIFEST_FILE, PLOTDATA_DIR, REPORT_FILE, SUMMARY_FILE,
};

use crate::rng::derive_seed;
use crate::violations::ViolationEvent;

pub const GOLDEN: &str = "none";

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trial {
    pub scenario_id: String,
    /// `"none"` for the golden arm.
    pub fault_spec_id: String,
    pub seed: u64,
    pub replicate_index: u32,
}

impl Trial {
    pub fn id(&self) -> String {
        format!("{}/{}/{}", self.scenario_id, self.fault_spec_id, self.replicate_index)
    }

    pub fn is_golden(&self) -> bool {
        self.fault_spec_id == GOLDEN
    }

    /// Canonical output order: scenario, then spec (golden first), then replicate.
    pub fn canonical_cmp(&self, o: &Trial) -> Ordering {
        (&self.scenario_id, !self.is_golden(), &self.fault_spec_id, self.replicate_index).cmp(&(
            &o.scenario_id,
            !o.is_golden(),
            &o.fault_spec_id,
            o.replicate_index,
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Timeout,
    HaltedOnCollision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRecord {
    pub trial: Trial,
    pub outcome: Outcome,
    pub distance_km: f64,
    pub violations: Vec<ViolationEvent>,
    pub first_injection_time: Option<f64>,
    pub duration_s: f64,
    pub nan_substitutions: u32,
}

/// Seed of a trial: a hash of the master seed, scenario, spec and replicate.
pub fn trial_seed(master_seed: u64, scenario: &str, spec: &str, replicate: u32) -> u64 {
    derive_seed(master_seed, &[scenario, spec, &replicate.to_string()])
}

/// Seed of the environment stream (GPS noise). It does not depend on the
/// fault spec, so every arm of a scenario/replicate sees the same world.
pub fn environment_seed(master_seed: u64, scenario: &str, replicate: u32) -> u64 {
    derive_seed(master_seed, &[scenario, "environment", &replicate.to_string()])
}

/// A golden arm per scenario plus scenarios × fault specs × replicates, in
/// canonical order.
pub fn plan_campaign(campaign: &ResolvedCampaign) -> Vec<Trial> {
    let cfg = &campaign.config;
    let mut out = Vec::new();
    for s in &campaign.scenarios {
        let arms = std::iter::once(GOLDEN).chain(campaign.fault_specs.iter().map(|f| f.id.as_str()));
        for spec in arms {
            for r in 0..cfg.replicates {
                out.push(Trial {
                    scenario_id: s.id.clone(),
                    fault_spec_id: spec.to_string(),
                    seed: trial_seed(cfg.master_seed, &s.id, spec, r),
                    replicate_index: r,
                });
            }
        }
    }
    out.sort_by(Trial::canonical_cmp);
    out
}

/// Runs every trial on `workers` threads and returns the records in
/// canonical order.
pub fn run_campaign(campaign: &ResolvedCampaign, workers: usize) -> Result<Vec<EpisodeRecord>, CampaignError> {
    let trials = plan_campaign(campaign);
    let ctx = EpisodeContext::new(campaign);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CampaignError::Config(format!("worker pool: {e}")))?;
    let mut records = pool.install(|| {
        trials.par_iter().map(|t| run_episode(t, &ctx)).collect::<Result<Vec<_>, _>>()
    })?;
    records.sort_by(|a, b| a.trial.canonical_cmp(&b.trial));
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_puts_golden_first() {
        let t = |s: &str, f: &str, r| Trial { scenario_id: s.into(), fault_spec_id: f.into(), seed: 0, replicate_index: r };
        let mut v = [t("b", "a", 0), t("a", "z", 1), t("a", "none", 2), t("a", "b", 0), t("a", "none", 0)];
        v.sort_by(Trial::canonical_cmp);
        let ids: Vec<String> = v.iter().map(Trial::id).collect();
        assert_eq!(ids, ["a/none/0", "a/none/2", "a/b/0", "a/z/1", "b/a/0"]);
    }

    #[test]
    fn seeds_depend_on_every_part() {
        let s = trial_seed(1, "town", "f", 0);
        assert_eq!(s, trial_seed(1, "town", "f", 0));
        assert_ne!(s, trial_seed(2, "town", "f", 0));
        assert_ne!(s, trial_seed(1, "town2", "f", 0));
        assert_ne!(s, trial_seed(1, "town", "g", 0));
        assert_ne!(s, trial_seed(1, "town", "f", 1));
        assert_eq!(environment_seed(1, "town", 0), environment_seed(1, "town", 0));
        assert_ne!(environment_seed(1, "town", 0), environment_seed(1, "town", 1));
    }
}
