//! Command-line front end: `run`, `report`, `validate` and `replay`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::campaign::{
    build_report, read_episodes, read_manifest, run_campaign, run_episode, write_outputs, write_report_files,
    CampaignError, EpisodeContext, FullReport, ResolvedCampaign, ResolvedManifest, EPISODES_FILE,
};
use crate::faultlib::FaultSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "faultdrive", version, about = "Fault-injection campaigns on a 2D driving simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a campaign and write every result file.
    Run(RunArgs),
    /// Recompute report.json, summary.csv and plotdata/ from stored episodes.
    Report(ReportArgs),
    /// Check a campaign config, scenario, fault spec or weights file.
    Validate(ValidateArgs),
    /// Re-run stored trials and compare them byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(short = 'c', long = "config")]
    pub config: Option<PathBuf>,
    /// Config override `K=V`, dotted keys allowed. Repeatable.
    #[arg(long = "override", value_name = "K=V")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
    /// Trial id `scenario/spec/replicate`; every stored trial when omitted.
    #[arg(long)]
    pub trial: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
}

fn exit_code(e: &CampaignError) -> i32 {
    match e {
        CampaignError::Config(_) => EXIT_CONFIG,
        CampaignError::Data(_) | CampaignError::Io { .. } => EXIT_DATA,
    }
}

fn fail(e: CampaignError) -> i32 {
    eprintln!("error: {e}");
    exit_code(&e)
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Validate(a) => cmd_validate(&a),
        Command::Replay(a) => cmd_replay(&a),
    }
}

fn load_campaign(common: &CommonArgs) -> Result<ResolvedCampaign, CampaignError> {
    let path = common.config.as_ref().ok_or_else(|| CampaignError::Config("--config is required".into()))?;
    ResolvedCampaign::load(path, &common.overrides)
}

fn print_summary(report: &FullReport) {
    for arm in &report.arms {
        let r = &arm.report;
        let rate = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into());
        let mut line = format!(
            "{:<24} {:<40} episodes {:>4}  MSR {:>6.2}%  VPK {}  APK {}",
            arm.fault_spec_id,
            arm.label,
            r.episodes,
            r.msr_percent,
            rate(r.vpk),
            rate(r.apk)
        );
        if let Some(d) = &arm.vs_golden {
            line.push_str(&format!("  U {} p {:.3e}{}", d.vpk_test.u, d.vpk_test.p_value, if d.vpk_test.significant { " *" } else { "" }));
        }
        println!("{line}");
    }
}

pub fn cmd_run(a: &RunArgs) -> i32 {
    let campaign = match load_campaign(&a.common) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let workers = a.workers.unwrap_or(campaign.config.workers);
    if workers == 0 {
        return fail(CampaignError::Config("--workers must be ≥ 1".into()));
    }
    let result = run_campaign(&campaign, workers).and_then(|records| write_outputs(&a.out, &campaign.manifest(), &records));
    match result {
        Ok(report) => {
            print_summary(&report);
            EXIT_OK
        }
        Err(e) => fail(e),
    }
}

fn manifest_for(common: &CommonArgs, out: &Path) -> Result<ResolvedManifest, CampaignError> {
    match &common.config {
        Some(_) => Ok(load_campaign(common)?.manifest()),
        None => read_manifest(out),
    }
}

pub fn cmd_report(a: &ReportArgs) -> i32 {
    let result = (|| {
        let manifest = manifest_for(&a.common, &a.out)?;
        let records = read_episodes(&a.out.join(EPISODES_FILE))?;
        let report = build_report(&records, &manifest)?;
        write_report_files(&a.out, &report)?;
        Ok(report)
    })();
    match result {
        Ok(report) => {
            print_summary(&report);
            EXIT_OK
        }
        Err(e) => fail(e),
    }
}

pub fn cmd_validate(a: &ValidateArgs) -> i32 {
    let Some(path) = &a.common.config else {
        return fail(CampaignError::Config("--config is required".into()));
    };
    let doc: Value = match std::fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string())) {
        Ok(v) => v,
        Err(e) => return fail(CampaignError::Config(format!("{}: {e}", path.display()))),
    };
    let what = if doc.get("class").is_some() {
        serde_json::from_value::<FaultSpec>(doc).map(|s| format!("fault spec {}", s.id)).map_err(|e| e.to_string())
    } else if doc.get("lanes").is_some() {
        crate::world::load_scenario_file(path).map(|w| format!("scenario with {} lanes, {} actors", w.map.lanes().len(), w.actors.len())).map_err(|e| e.to_string())
    } else if doc.get("layers").is_some() {
        crate::agent::load_weights(path).map(|w| format!("weights with shape {:?}", w.shape())).map_err(|e| e.to_string())
    } else {
        load_campaign(&a.common)
            .map(|c| {
                let n = crate::campaign::plan_campaign(&c).len();
                format!("campaign with {} scenarios, {} fault specs, {n} trials", c.scenarios.len(), c.fault_specs.len())
            })
            .map_err(|e| e.to_string())
    };
    match what {
        Ok(w) => {
            println!("ok: {}: {w}", path.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            EXIT_CONFIG
        }
    }
}

/// Path of the first differing leaf between two JSON values, e.g. `violations[2].time`.
pub fn first_difference(a: &Value, b: &Value, path: &str) -> Option<String> {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for (k, va) in x {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match y.get(k) {
                    Some(vb) => {
                        if let Some(d) = first_difference(va, vb, &p) {
                            return Some(d);
                        }
                    }
                    None => return Some(p),
                }
            }
            y.keys().find(|k| !x.contains_key(*k)).map(|k| if path.is_empty() { k.clone() } else { format!("{path}.{k}") })
        }
        (Value::Array(x), Value::Array(y)) => {
            for (i, (va, vb)) in x.iter().zip(y).enumerate() {
                if let Some(d) = first_difference(va, vb, &format!("{path}[{i}]")) {
                    return Some(d);
                }
            }
            (x.len() != y.len()).then(|| format!("{path}.length"))
        }
        _ => (a != b).then(|| path.to_string()),
    }
}

pub fn cmd_replay(a: &ReplayArgs) -> i32 {
    let setup = (|| {
        let manifest = manifest_for(&a.common, &a.out)?;
        let campaign = ResolvedCampaign::resolve(manifest.config, Path::new("/"))?;
        let text = std::fs::read_to_string(a.out.join(EPISODES_FILE))
            .map_err(|source| CampaignError::Io { path: a.out.join(EPISODES_FILE).display().to_string(), source })?;
        crate::campaign::parse_episodes(&text)?;
        Ok((campaign, text))
    })();
    let (campaign, text) = match setup {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let lines: Vec<&str> = text.lines().collect();
    let stored: Vec<(String, crate::campaign::EpisodeRecord)> = lines
        .iter()
        .map(|l| serde_json::from_str::<crate::campaign::EpisodeRecord>(l).expect("parsed above"))
        .map(|r| (r.trial.id(), r))
        .collect();
    let selected: Vec<usize> = match &a.trial {
        Some(id) => match stored.iter().position(|(sid, _)| sid == id) {
            Some(i) => vec![i],
            None => return fail(CampaignError::Config(format!("unknown trial id {id}"))),
        },
        None => (0..stored.len()).collect(),
    };

    let ctx = EpisodeContext::new(&campaign);
    let workers = a.workers.unwrap_or(campaign.config.workers).max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => return fail(CampaignError::Config(format!("worker pool: {e}"))),
    };
    use rayon::prelude::*;
    let fresh: Vec<Result<String, CampaignError>> = pool.install(|| {
        selected
            .par_iter()
            .map(|&i| run_episode(&stored[i].1.trial, &ctx).map(|r| serde_json::to_string(&r).expect("record serializes")))
            .collect()
    });

    let mut diverged = 0;
    for (&i, fresh) in selected.iter().zip(fresh) {
        let fresh = match fresh {
            Ok(f) => f,
            Err(e) => return fail(e),
        };
        let (id, _) = &stored[i];
        if fresh.as_bytes() != lines[i].as_bytes() {
            let a: Value = serde_json::from_str(lines[i]).expect("parsed above");
            let b: Value = serde_json::from_str(&fresh).expect("fresh record");
            let field = first_difference(&a, &b, "").unwrap_or_else(|| "(formatting)".into());
            eprintln!("divergence: {id}: first differing field {field}");
            diverged += 1;
        }
    }
    if diverged > 0 {
        eprintln!("{diverged} of {} trials diverged", selected.len());
        EXIT_DIVERGENCE
    } else {
        println!("ok: {} trials replayed identically", selected.len());
        EXIT_OK
    }
}
