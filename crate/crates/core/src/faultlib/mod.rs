//! Fault models for the four fault classes and their trigger logic.
//!
//! Every injector is an explicit transformation of a value crossing a
//! pipeline boundary:
//!
//! | class      | boundary                                   | target             |
//! |------------|--------------------------------------------|--------------------|
//! | `data`     | sensor frame before the agent              | `sensor_channel`   |
//! | `hardware` | sensor frame or control command, as `f32`  | `sensor_channel` / `command_field` |
//! | `timing`   | link between two stages                    | `channel_direction`|
//! | `ml`       | controller weights                         | `ml_location`      |
//!
//! With neutral parameters (σ = 0, probability 0, delay 0, empty masks) each
//! injector returns its input bit for bit.

mod data;
mod hardware;
mod ml;
mod timing;

use serde::{Deserialize, Serialize};

pub use data::{inject_data_fault, DataMemory};
pub use hardware::{
    apply_to_command, apply_to_sensor, decode_f32, encode_f32, flip_bit, inject_hardware_fault,
    multi_bit_mask, stuck_at, HardwareOutcome,
};
pub use ml::{inject_ml_fault, select_locations, ParamIndex};
pub use timing::{TimingChannel, TimingPayload};

use crate::agent::CommandField;
use crate::rng::SimRng;

#[derive(Debug, thiserror::Error)]
pub enum FaultError {
    #[error("fault spec {id}: {message}")]
    Validation { id: String, message: String },
    #[error("fault spec {id}: invalid target: {message}")]
    InvalidTarget { id: String, message: String },
    #[error("fault spec {id}: shape mismatch: {message}")]
    Shape { id: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultClass {
    Data,
    Hardware,
    Timing,
    Ml,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorChannel {
    Ranges,
    Gps,
    Speed,
    Weather,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelDirection {
    SenseToAgent,
    AgentToActuation,
}

/// Which parameters of the network an ML fault touches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MlLocation {
    All {
        #[serde(default)]
        include_biases: bool,
    },
    RandomLayer {
        #[serde(default)]
        include_biases: bool,
    },
    RandomWeights {
        n: usize,
    },
    Explicit {
        layer: usize,
        rows: Vec<usize>,
        cols: Vec<usize>,
        #[serde(default)]
        include_biases: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultTarget {
    SensorChannel(SensorChannel),
    CommandField(CommandField),
    ChannelDirection(ChannelDirection),
    MlLocation(MlLocation),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Duration {
    Frames(u64),
    Persistent(Persistent),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Persistent {
    Persistent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultTrigger {
    pub start: u64,
    pub duration: Duration,
    pub prob: f64,
}

impl FaultTrigger {
    pub fn always() -> Self {
        FaultTrigger { start: 0, duration: Duration::Persistent(Persistent::Persistent), prob: 1.0 }
    }

    pub fn in_window(&self, frame: u64) -> bool {
        frame >= self.start
            && match self.duration {
                Duration::Frames(d) => frame - self.start < d,
                Duration::Persistent(_) => true,
            }
    }
}

/// True iff `frame` lies in the half-open window `[start, start + duration)`
/// and a uniform draw falls below the per-frame probability. Inside the
/// window exactly one draw is consumed whatever the probability.
pub fn trigger_active(trigger: &FaultTrigger, frame: u64, rng: &mut SimRng) -> bool {
    trigger.in_window(frame) && rng.uniform() < trigger.prob
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataModel {
    Gaussian { sigma: f64 },
    /// Rays `start .. start + len` read 0 m.
    Occlusion { start: usize, len: usize },
    /// Channel frozen at its value from the first triggered frame.
    Stuck,
    Offset { dx: f64, dy: f64 },
    Scale { factor: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum HardwareModel {
    /// XOR one bit; a random bit in `[0, 31]` per triggered frame when `bit` is absent.
    SingleBit {
        #[serde(default)]
        bit: Option<u8>,
    },
    /// XOR `n` distinct random bits.
    MultiBit { n: u8 },
    /// `(v | ones) & !zeros`.
    StuckAt { ones: u32, zeros: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    ReplayLast,
    DropToDefault,
    Reorder { window: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingModel {
    #[serde(default)]
    pub delay_frames: u64,
    #[serde(default)]
    pub drop_probability: f64,
    pub mode: TimingMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum MlModel {
    Gaussian {
        sigma: f64,
    },
    Bitflip {
        #[serde(default)]
        bit: Option<u8>,
    },
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FaultModel {
    Data(DataModel),
    Hardware(HardwareModel),
    Timing(TimingModel),
    Ml(MlModel),
}

impl FaultModel {
    pub fn class(&self) -> FaultClass {
        match self {
            FaultModel::Data(_) => FaultClass::Data,
            FaultModel::Hardware(_) => FaultClass::Hardware,
            FaultModel::Timing(_) => FaultClass::Timing,
            FaultModel::Ml(_) => FaultClass::Ml,
        }
    }
}

/// One fault: what, where, when, and the seed of its private random stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFaultSpec", into = "RawFaultSpec")]
pub struct FaultSpec {
    pub id: String,
    pub target: FaultTarget,
    pub model: FaultModel,
    pub trigger: FaultTrigger,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFaultSpec {
    id: String,
    class: FaultClass,
    target: FaultTarget,
    params: serde_json::Value,
    trigger: FaultTrigger,
    seed: u64,
}

impl TryFrom<RawFaultSpec> for FaultSpec {
    type Error = FaultError;

    fn try_from(raw: RawFaultSpec) -> Result<Self, FaultError> {
        let bad = |e: serde_json::Error| FaultError::Validation { id: raw.id.clone(), message: format!("params: {e}") };
        let p = raw.params.clone();
        let model = match raw.class {
            FaultClass::Data => FaultModel::Data(serde_json::from_value(p).map_err(bad)?),
            FaultClass::Hardware => FaultModel::Hardware(serde_json::from_value(p).map_err(bad)?),
            FaultClass::Timing => FaultModel::Timing(serde_json::from_value(p).map_err(bad)?),
            FaultClass::Ml => FaultModel::Ml(serde_json::from_value(p).map_err(bad)?),
        };
        let spec = FaultSpec { id: raw.id, target: raw.target, model, trigger: raw.trigger, seed: raw.seed };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<FaultSpec> for RawFaultSpec {
    fn from(s: FaultSpec) -> Self {
        let params = match &s.model {
            FaultModel::Data(m) => serde_json::to_value(m),
            FaultModel::Hardware(m) => serde_json::to_value(m),
            FaultModel::Timing(m) => serde_json::to_value(m),
            FaultModel::Ml(m) => serde_json::to_value(m),
        }
        .expect("fault params serialize");
        RawFaultSpec { id: s.id, class: s.model.class(), target: s.target, params, trigger: s.trigger, seed: s.seed }
    }
}

fn unit_interval(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl FaultSpec {
    pub fn class(&self) -> FaultClass {
        self.model.class()
    }

    pub fn validate(&self) -> Result<(), FaultError> {
        let invalid = |m: &str| Err(FaultError::Validation { id: self.id.clone(), message: m.to_string() });
        let target = |m: &str| Err(FaultError::InvalidTarget { id: self.id.clone(), message: m.to_string() });

        if self.id.is_empty() || self.id == "none" {
            return invalid("id must be nonempty and not \"none\"");
        }
        if !unit_interval(self.trigger.prob) {
            return invalid("trigger.prob must lie in [0, 1]");
        }
        if self.trigger.duration == Duration::Frames(0) {
            return invalid("trigger.duration must be ≥ 1 frame or \"persistent\"");
        }

        match (&self.model, &self.target) {
            (FaultModel::Data(m), FaultTarget::SensorChannel(ch)) => match m {
                DataModel::Gaussian { sigma } if !(*sigma >= 0.0 && sigma.is_finite()) => {
                    invalid("gaussian sigma must be finite and ≥ 0")
                }
                DataModel::Occlusion { .. } if *ch != SensorChannel::Ranges => target("occlusion applies to ranges only"),
                DataModel::Offset { .. } if *ch != SensorChannel::Gps => target("offset applies to gps only"),
                DataModel::Offset { dx, dy } if !(dx.is_finite() && dy.is_finite()) => invalid("offset must be finite"),
                DataModel::Scale { factor } if !factor.is_finite() => invalid("scale factor must be finite"),
                _ => Ok(()),
            },
            (FaultModel::Data(_), _) => target("data faults target a sensor_channel"),
            (FaultModel::Hardware(m), FaultTarget::SensorChannel(_) | FaultTarget::CommandField(_)) => match m {
                HardwareModel::SingleBit { bit: Some(b) } if *b > 31 => invalid("bit index must be ≤ 31"),
                HardwareModel::MultiBit { n } if !(1..=32).contains(n) => invalid("multi_bit n must lie in [1, 32]"),
                HardwareModel::StuckAt { ones, zeros } if ones & zeros != 0 => {
                    invalid("stuck_at ones and zeros masks overlap")
                }
                _ => Ok(()),
            },
            (FaultModel::Hardware(_), _) => target("hardware faults target a sensor_channel or command_field"),
            (FaultModel::Timing(m), FaultTarget::ChannelDirection(_)) => {
                if !unit_interval(m.drop_probability) {
                    invalid("drop_probability must lie in [0, 1]")
                } else if matches!(m.mode, TimingMode::Reorder { window: 0 }) {
                    invalid("reorder window must be ≥ 1")
                } else {
                    Ok(())
                }
            }
            (FaultModel::Timing(_), _) => target("timing faults target a channel_direction"),
            (FaultModel::Ml(m), FaultTarget::MlLocation(loc)) => {
                if matches!(loc, MlLocation::RandomWeights { n: 0 }) {
                    return invalid("random_weights n must be ≥ 1");
                }
                match m {
                    MlModel::Gaussian { sigma } if !(*sigma >= 0.0 && sigma.is_finite()) => {
                        invalid("gaussian sigma must be finite and ≥ 0")
                    }
                    MlModel::Bitflip { bit: Some(b) } if *b > 31 => invalid("bit index must be ≤ 31"),
                    _ => Ok(()),
                }
            }
            (FaultModel::Ml(_), _) => target("ml faults target an ml_location"),
        }
    }

    /// Human-readable parameter summary; timing delays are also given in
    /// seconds at `tick_rate`.
    pub fn label(&self, tick_rate: u32) -> String {
        match &self.model {
            FaultModel::Data(m) => match m {
                DataModel::Gaussian { sigma } => format!("gaussian sigma={sigma}"),
                DataModel::Occlusion { start, len } => format!("occlusion rays {start}..{}", start + len),
                DataModel::Stuck => "stuck".into(),
                DataModel::Offset { dx, dy } => format!("offset ({dx}, {dy})"),
                DataModel::Scale { factor } => format!("scale x{factor}"),
            },
            FaultModel::Hardware(m) => match m {
                HardwareModel::SingleBit { bit: Some(b) } => format!("single_bit {b}"),
                HardwareModel::SingleBit { bit: None } => "single_bit random".into(),
                HardwareModel::MultiBit { n } => format!("multi_bit {n}"),
                HardwareModel::StuckAt { ones, zeros } => format!("stuck_at ones={ones:#010x} zeros={zeros:#010x}"),
            },
            FaultModel::Timing(m) => format!(
                "delay {} frames ({}), drop p={}",
                m.delay_frames,
                delay_seconds_label(m.delay_frames, tick_rate),
                m.drop_probability
            ),
            FaultModel::Ml(m) => match m {
                MlModel::Gaussian { sigma } => format!("weights gaussian sigma={sigma}"),
                MlModel::Bitflip { bit: Some(b) } => format!("weights bitflip {b}"),
                MlModel::Bitflip { bit: None } => "weights bitflip random".into(),
                MlModel::Zero => "weights zero".into(),
            },
        }
    }

    /// Main numeric knob of the model, used as the x-axis of sweep plots.
    pub fn sweep_value(&self) -> f64 {
        match &self.model {
            FaultModel::Data(DataModel::Gaussian { sigma }) | FaultModel::Ml(MlModel::Gaussian { sigma }) => *sigma,
            FaultModel::Data(DataModel::Scale { factor }) => *factor,
            FaultModel::Data(DataModel::Offset { dx, dy }) => dx.hypot(*dy),
            FaultModel::Data(DataModel::Occlusion { len, .. }) => *len as f64,
            FaultModel::Timing(m) => m.delay_frames as f64,
            FaultModel::Hardware(HardwareModel::MultiBit { n }) => *n as f64,
            _ => self.trigger.prob,
        }
    }
}

/// `"2.0 s"` for 30 frames at 15 fps.
pub fn delay_seconds_label(frames: u64, tick_rate: u32) -> String {
    format!("{:.1} s", frames as f64 / tick_rate as f64)
}
