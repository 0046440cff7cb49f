//! Campaign configuration: parsing, overrides and resolution against disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CampaignError;
use crate::agent::{load_weights, AgentParams, Weights};
use crate::faultlib::{select_locations, FaultClass, FaultSpec};
use crate::violations::{CountMode, DEFAULT_CONTACT_COOLDOWN};
use crate::world::{load_scenario_file, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum AgentConfig {
    #[default]
    Rule,
    Nn { weights: String },
}

/// A fault spec given inline or as a path to a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FaultSpecEntry {
    Path(String),
    Inline(FaultSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub master_seed: u64,
    /// Scenario file paths, relative to the config file. The file stem is the scenario id.
    pub scenarios: Vec<String>,
    #[serde(default)]
    pub fault_specs: Vec<FaultSpecEntry>,
    pub replicates: u32,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_true")]
    pub halt_on_collision: bool,
    #[serde(default)]
    pub count_mode: CountMode,
    #[serde(default = "default_cooldown")]
    pub contact_cooldown: u64,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default, skip_serializing_if = "AgentParamsConfig::is_empty")]
    pub agent_params: AgentParamsConfig,
}

/// Optional overrides of the controller defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParamsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_gps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_brake: Option<f64>,
    /// Degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brake_cone_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lookahead: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_gain: Option<f64>,
}

impl AgentParamsConfig {
    pub fn is_empty(&self) -> bool {
        *self == AgentParamsConfig::default()
    }

    pub fn apply(&self, mut p: AgentParams) -> AgentParams {
        if let Some(v) = self.sigma_gps {
            p.sigma_gps = v;
        }
        if let Some(v) = self.v_target {
            p.v_target = v;
        }
        if let Some(v) = self.d_brake {
            p.d_brake = v;
        }
        if let Some(v) = self.brake_cone_deg {
            p.brake_cone = v.to_radians();
        }
        if let Some(v) = self.lookahead {
            p.lookahead = v;
        }
        if let Some(v) = self.speed_gain {
            p.speed_gain = v;
        }
        p
    }

    fn validate(&self) -> Result<(), CampaignError> {
        let fields = [
            ("sigma_gps", self.sigma_gps),
            ("v_target", self.v_target),
            ("d_brake", self.d_brake),
            ("brake_cone_deg", self.brake_cone_deg),
            ("lookahead", self.lookahead),
            ("speed_gain", self.speed_gain),
        ];
        for (name, v) in fields {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(config_err(format!("agent_params.{name} must be finite and ≥ 0")));
                }
            }
        }
        Ok(())
    }
}

fn default_workers() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_cooldown() -> u64 {
    DEFAULT_CONTACT_COOLDOWN
}

/// Parses `K=V` and sets the dotted key path `K` in `doc`. `V` is read as
/// JSON when it parses, else as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CampaignError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CampaignError::Config(format!("override {assignment:?} is not K=V")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CampaignError::Config(format!("override {key:?}: {part:?} is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CampaignError::Config(format!("override {assignment:?} has an empty key")))
}

#[derive(Clone, Debug)]
pub struct ScenarioEntry {
    pub id: String,
    pub path: PathBuf,
    pub world: World,
}

/// A configuration with every file reference loaded and validated.
#[derive(Clone, Debug)]
pub struct ResolvedCampaign {
    pub config: CampaignConfig,
    pub scenarios: Vec<ScenarioEntry>,
    pub fault_specs: Vec<FaultSpec>,
    pub weights: Option<Weights>,
}

/// Self-contained record of a resolved campaign, stored next to the outputs
/// so reports and replays need no other files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedManifest {
    pub config: CampaignConfig,
    /// Scenario id -> absolute path.
    pub scenario_paths: BTreeMap<String, String>,
    pub tick_rates: BTreeMap<String, u32>,
}

fn config_err(e: impl std::fmt::Display) -> CampaignError {
    CampaignError::Config(e.to_string())
}

impl ResolvedCampaign {
    /// Loads `path`, applies `overrides` and resolves every reference.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CampaignError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CampaignError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut doc: Value = serde_json::from_str(&text)
            .map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let config: CampaignConfig =
            serde_json::from_value(doc).map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::resolve(config, base)
    }

    pub fn resolve(config: CampaignConfig, base: &Path) -> Result<Self, CampaignError> {
        if config.replicates == 0 {
            return Err(config_err("replicates must be ≥ 1"));
        }
        if config.workers == 0 {
            return Err(config_err("workers must be ≥ 1"));
        }
        if config.scenarios.is_empty() {
            return Err(config_err("at least one scenario is required"));
        }
        config.agent_params.validate()?;
        let resolve_path = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };

        let mut scenarios = Vec::new();
        for s in &config.scenarios {
            let path = resolve_path(s);
            if !path.is_file() {
                return Err(CampaignError::Config(format!("scenario file not found: {}", path.display())));
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| config_err(format!("bad scenario path {}", path.display())))?
                .to_string();
            if scenarios.iter().any(|e: &ScenarioEntry| e.id == id) {
                return Err(config_err(format!("duplicate scenario id {id}")));
            }
            let world = load_scenario_file(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            let path = path.canonicalize().unwrap_or(path);
            scenarios.push(ScenarioEntry { id, path, world });
        }

        let mut fault_specs: Vec<FaultSpec> = Vec::new();
        for entry in &config.fault_specs {
            let spec = match entry {
                FaultSpecEntry::Inline(s) => s.clone(),
                FaultSpecEntry::Path(p) => {
                    let path = resolve_path(p);
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| config_err(format!("cannot read fault spec {}: {e}", path.display())))?;
                    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
                }
            };
            if fault_specs.iter().any(|s| s.id == spec.id) {
                return Err(config_err(format!("duplicate fault spec id {}", spec.id)));
            }
            fault_specs.push(spec);
        }

        let weights = match &config.agent {
            AgentConfig::Rule => None,
            AgentConfig::Nn { weights } => {
                let path = resolve_path(weights);
                Some(load_weights(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))?)
            }
        };
        for spec in fault_specs.iter().filter(|s| s.class() == FaultClass::Ml) {
            let w = weights
                .as_ref()
                .ok_or_else(|| config_err(format!("fault spec {}: ml faults need an nn agent", spec.id)))?;
            select_locations(&w.shape(), spec).map_err(config_err)?;
        }
        if let Some(w) = &weights {
            let width = w.input_width();
            let expect = AgentParams::default().num_rays + 4;
            if width != expect {
                return Err(config_err(format!("network input width {width} does not match sensor layout ({expect})")));
            }
        }

        // Store absolute references so the manifest is location independent.
        let mut config = config;
        config.scenarios = scenarios.iter().map(|s| s.path.display().to_string()).collect();
        config.fault_specs = fault_specs.iter().cloned().map(FaultSpecEntry::Inline).collect();
        if let AgentConfig::Nn { weights } = &mut config.agent {
            let p = resolve_path(weights);
            *weights = p.canonicalize().unwrap_or(p).display().to_string();
        }
        Ok(ResolvedCampaign { config, scenarios, fault_specs, weights })
    }

    pub fn manifest(&self) -> ResolvedManifest {
        ResolvedManifest {
            config: self.config.clone(),
            scenario_paths: self.scenarios.iter().map(|s| (s.id.clone(), s.path.display().to_string())).collect(),
            tick_rates: self.scenarios.iter().map(|s| (s.id.clone(), s.world.tick_rate)).collect(),
        }
    }

    pub fn scenario(&self, id: &str) -> Option<&ScenarioEntry> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn fault_spec(&self, id: &str) -> Option<&FaultSpec> {
        self.fault_specs.iter().find(|s| s.id == id)
    }
}
