//! Bit-level corruption of values carried as 32-bit IEEE-754 words.

use super::{HardwareModel, SensorChannel};
use crate::agent::{CommandField, ControlCommand, SensorFrame};
use crate::rng::SimRng;

pub fn encode_f32(v: f64) -> u32 {
    (v as f32).to_bits()
}

pub fn decode_f32(bits: u32) -> f64 {
    f32::from_bits(bits) as f64
}

pub fn flip_bit(bits: u32, bit: u8) -> u32 {
    bits ^ (1u32 << bit)
}

pub fn stuck_at(bits: u32, ones: u32, zeros: u32) -> u32 {
    (bits | ones) & !zeros
}

/// Mask with `n` distinct bits set, drawn by a partial Fisher-Yates shuffle
/// of the 32 positions (exactly `n` draws).
pub fn multi_bit_mask(n: u8, rng: &mut SimRng) -> u32 {
    let mut pos: [u8; 32] = std::array::from_fn(|i| i as u8);
    let mut mask = 0u32;
    for i in 0..(n as usize).min(32) {
        let j = i + rng.below(32 - i);
        pos.swap(i, j);
        mask |= 1 << pos[i];
    }
    mask
}

/// Outcome of corrupting one word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HardwareOutcome {
    pub bits: u32,
    /// The XOR mask applied (for bit flips) or the bits that changed (stuck-at).
    pub mask: u32,
}

/// Corrupts one encoded scalar.
pub fn inject_hardware_fault(bits: u32, model: &HardwareModel, rng: &mut SimRng) -> HardwareOutcome {
    let mask = match *model {
        HardwareModel::SingleBit { bit } => 1u32 << bit.unwrap_or_else(|| rng.below(32) as u8),
        HardwareModel::MultiBit { n } => multi_bit_mask(n, rng),
        HardwareModel::StuckAt { ones, zeros } => {
            let out = stuck_at(bits, ones, zeros);
            return HardwareOutcome { bits: out, mask: out ^ bits };
        }
    };
    HardwareOutcome { bits: bits ^ mask, mask }
}

/// Corrupts `v` through its f32 encoding. An unchanged word leaves the
/// original f64 untouched, so masks that change nothing are exact identities.
fn corrupt(v: f64, model: &HardwareModel, rng: &mut SimRng) -> f64 {
    let bits = encode_f32(v);
    let out = inject_hardware_fault(bits, model, rng);
    if out.bits == bits {
        v
    } else {
        decode_f32(out.bits)
    }
}

/// Corrupts one command field. The result may be NaN or out of range; the
/// actuation boundary applies the field policy.
pub fn apply_to_command(cmd: &ControlCommand, field: CommandField, model: &HardwareModel, rng: &mut SimRng) -> ControlCommand {
    let mut out = *cmd;
    out.set(field, corrupt(cmd.get(field), model, rng));
    out
}

/// Corrupts a sensor channel. Bit flips hit one word of the channel, chosen
/// uniformly (a ray, or one of gps x / y / heading); stuck-at masks are
/// applied to every word of the channel.
pub fn apply_to_sensor(frame: &SensorFrame, channel: SensorChannel, model: &HardwareModel, rng: &mut SimRng) -> SensorFrame {
    let mut out = frame.clone();
    let mut words: Vec<&mut f64> = match channel {
        SensorChannel::Ranges => out.ranges.iter_mut().collect(),
        SensorChannel::Gps => vec![&mut out.gps.x, &mut out.gps.y, &mut out.gps.heading],
        SensorChannel::Speed => vec![&mut out.speed],
        SensorChannel::Weather => vec![&mut out.weather],
    };
    if words.is_empty() {
        return out;
    }
    match model {
        HardwareModel::StuckAt { .. } => {
            for w in words.iter_mut() {
                **w = corrupt(**w, model, rng);
            }
        }
        _ => {
            let i = rng.below(words.len());
            *words[i] = corrupt(*words[i], model, rng);
        }
    }
    out
}
