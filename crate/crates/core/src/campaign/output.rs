//! Result files: episodes.jsonl, report.json, summary.csv and plotdata/*.csv.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{compare_to_golden, compute_metrics, ArmReport, HistogramBin};
use super::{CampaignError, EpisodeRecord, FaultSpecEntry, ResolvedManifest, GOLDEN};

pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "campaign.resolved.json";
pub const PLOTDATA_DIR: &str = "plotdata";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullReport {
    pub master_seed: u64,
    pub tick_rate: u32,
    /// Golden arm first, then one arm per fault spec in config order.
    pub arms: Vec<ArmReport>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io { path: path.display().to_string(), source }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CampaignError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

/// Aggregates `records` per arm. Uses only the records and the manifest.
pub fn build_report(records: &[EpisodeRecord], manifest: &ResolvedManifest) -> Result<FullReport, CampaignError> {
    let data = |e: super::MetricsError| CampaignError::Data(e.to_string());
    let tick_rate = manifest.tick_rates.values().next().copied().unwrap_or(15);
    let of_arm = |id: &str| -> Vec<EpisodeRecord> {
        records.iter().filter(|r| r.trial.fault_spec_id == id).cloned().collect()
    };
    let golden_records = of_arm(GOLDEN);
    let golden = if golden_records.is_empty() { None } else { Some(compute_metrics(&golden_records).map_err(data)?) };

    let mut arms = Vec::new();
    if let Some(g) = &golden {
        arms.push(ArmReport {
            fault_spec_id: GOLDEN.into(),
            class: None,
            label: "golden".into(),
            sweep_value: None,
            report: g.clone(),
            vs_golden: None,
        });
    }
    for entry in &manifest.config.fault_specs {
        let FaultSpecEntry::Inline(spec) = entry else {
            return Err(CampaignError::Data("manifest fault specs must be inline".into()));
        };
        let rs = of_arm(&spec.id);
        if rs.is_empty() {
            continue;
        }
        let report = compute_metrics(&rs).map_err(data)?;
        let vs_golden = match &golden {
            Some(g) => Some(compare_to_golden(&report, g).map_err(data)?),
            None => None,
        };
        arms.push(ArmReport {
            fault_spec_id: spec.id.clone(),
            class: Some(spec.class()),
            label: spec.label(tick_rate),
            sweep_value: Some(spec.sweep_value()),
            report,
            vs_golden,
        });
    }
    if arms.is_empty() {
        return Err(CampaignError::Data("no records".into()));
    }
    Ok(FullReport { master_seed: manifest.config.master_seed, tick_rate, arms })
}

pub fn write_episodes(path: &Path, records: &[EpisodeRecord]) -> Result<(), CampaignError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    write(path, out)
}

/// Parses episodes.jsonl text. Errors name the 1-based line.
pub fn parse_episodes(text: &str) -> Result<Vec<EpisodeRecord>, CampaignError> {
    let mut out = Vec::new();
    let lines: Vec<&str> = text.split_terminator('\n').collect();
    for (i, line) in lines.iter().enumerate() {
        let n = i + 1;
        if i + 1 == lines.len() && !text.ends_with('\n') {
            return Err(CampaignError::Data(format!("line {n}: truncated record (no trailing newline)")));
        }
        let r = serde_json::from_str(line).map_err(|e| CampaignError::Data(format!("line {n}: {e}")))?;
        out.push(r);
    }
    if out.is_empty() {
        return Err(CampaignError::Data("no records".into()));
    }
    Ok(out)
}

pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeRecord>, CampaignError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_episodes(&text)
}

pub fn read_manifest(dir: &Path) -> Result<ResolvedManifest, CampaignError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| CampaignError::Data(format!("{}: {e}", path.display())))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn histogram_rows(arm: &str, bins: &[HistogramBin]) -> Vec<Vec<String>> {
    bins.iter().map(|b| vec![arm.to_string(), b.lo.to_string(), b.hi.to_string(), b.count.to_string()]).collect()
}

/// Writes report.json, summary.csv and plotdata/ under `dir`.
pub fn write_report_files(dir: &Path, report: &FullReport) -> Result<(), CampaignError> {
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    write(&dir.join(REPORT_FILE), json)?;

    let mut summary = Vec::new();
    for arm in &report.arms {
        for t in &arm.report.trials {
            summary.push(vec![
                t.trial_id.clone(),
                t.scenario.clone(),
                t.fault_spec.clone(),
                t.seed.to_string(),
                t.replicate.to_string(),
                serde_json::to_value(t.outcome).expect("outcome").as_str().unwrap_or_default().to_string(),
                t.km.to_string(),
                t.violations.to_string(),
                t.accidents.to_string(),
                opt(t.ttv),
            ]);
        }
    }
    summary.sort();
    let header = ["trial_id", "scenario", "spec", "seed", "replicate", "outcome", "km", "violations", "accidents", "ttv"];
    write(&dir.join(SUMMARY_FILE), csv_bytes(&header, summary))?;

    let plot = dir.join(PLOTDATA_DIR);
    std::fs::create_dir_all(&plot).map_err(io_err(&plot))?;
    let bins_header = ["arm", "bin_lo", "bin_hi", "count"];
    let mut vpk = Vec::new();
    let mut ttv = Vec::new();
    let mut sweep = Vec::new();
    for arm in &report.arms {
        let r = &arm.report;
        if let Some(d) = &r.vpk_per_episode {
            vpk.extend(histogram_rows(&arm.fault_spec_id, &d.histogram));
        }
        if let Some(d) = &r.ttv {
            ttv.extend(histogram_rows(&arm.fault_spec_id, &d.histogram));
        }
        let test = arm.vs_golden.as_ref().map(|d| &d.vpk_test);
        sweep.push(vec![
            arm.fault_spec_id.clone(),
            arm.class.map(|c| serde_json::to_value(c).expect("class").as_str().unwrap_or_default().to_string()).unwrap_or_default(),
            arm.label.clone(),
            opt(arm.sweep_value),
            r.episodes.to_string(),
            r.msr_percent.to_string(),
            opt(r.vpk),
            opt(r.apk),
            opt(r.vpk_per_episode.as_ref().map(|d| d.stddev)),
            opt(r.ttv.as_ref().map(|d| d.mean)),
            opt(test.map(|t| t.u)),
            opt(test.map(|t| t.p_value)),
            test.map(|t| t.significant.to_string()).unwrap_or_default(),
        ]);
    }
    write(&plot.join("vpk_histogram.csv"), csv_bytes(&bins_header, vpk))?;
    write(&plot.join("ttv_histogram.csv"), csv_bytes(&bins_header, ttv))?;
    let sweep_header = [
        "arm", "class", "label", "sweep_value", "episodes", "msr_percent", "vpk", "apk", "vpk_stddev", "ttv_mean",
        "mw_u", "mw_p", "significant",
    ];
    write(&plot.join("sweep.csv"), csv_bytes(&sweep_header, sweep))
}

/// Writes every result file of a finished campaign.
pub fn write_outputs(dir: &Path, manifest: &ResolvedManifest, records: &[EpisodeRecord]) -> Result<FullReport, CampaignError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut m = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    m.push('\n');
    write(&dir.join(MANIFEST_FILE), m)?;
    write_episodes(&dir.join(EPISODES_FILE), records)?;
    // The report is built from the parsed file so a later `report` run sees the same input.
    let stored = read_episodes(&dir.join(EPISODES_FILE))?;
    let report = build_report(&stored, manifest)?;
    write_report_files(dir, &report)?;
    Ok(report)
}
