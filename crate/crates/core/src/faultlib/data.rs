use super::{DataModel, FaultError, FaultModel, FaultSpec, FaultTarget, SensorChannel};
use crate::agent::SensorFrame;
use crate::rng::SimRng;

/// Per-fault memory for the `stuck` model: the frame seen on the first
/// triggered tick.
#[derive(Clone, Debug, Default)]
pub struct DataMemory {
    stuck: Option<SensorFrame>,
}

fn add_noise(v: &mut f64, sigma: f64, rng: &mut SimRng) {
    let n = rng.normal();
    // σ = 0 must leave the bits alone, including the sign of zero.
    if sigma != 0.0 {
        *v += sigma * n;
    }
}

/// Applies one data fault on a triggered frame. Channels other than the
/// target are returned bit-identical. Gaussian noise on `gps` perturbs x and
/// y; the other models scale or translate the same two coordinates.
pub fn inject_data_fault(
    frame: &SensorFrame,
    spec: &FaultSpec,
    memory: &mut DataMemory,
    rng: &mut SimRng,
) -> Result<SensorFrame, FaultError> {
    let (FaultModel::Data(model), FaultTarget::SensorChannel(channel)) = (&spec.model, &spec.target) else {
        return Err(FaultError::InvalidTarget {
            id: spec.id.clone(),
            message: "not a data fault on a sensor channel".into(),
        });
    };
    let mut out = frame.clone();
    match model {
        DataModel::Gaussian { sigma } => match channel {
            SensorChannel::Ranges => out.ranges.iter_mut().for_each(|r| add_noise(r, *sigma, rng)),
            SensorChannel::Gps => {
                add_noise(&mut out.gps.x, *sigma, rng);
                add_noise(&mut out.gps.y, *sigma, rng);
            }
            SensorChannel::Speed => add_noise(&mut out.speed, *sigma, rng),
            SensorChannel::Weather => add_noise(&mut out.weather, *sigma, rng),
        },
        DataModel::Occlusion { start, len } => {
            let n = out.ranges.len();
            let lo = (*start).min(n);
            let hi = start.saturating_add(*len).min(n);
            out.ranges[lo..hi].iter_mut().for_each(|r| *r = 0.0);
        }
        DataModel::Stuck => {
            let held = memory.stuck.get_or_insert_with(|| frame.clone());
            match channel {
                SensorChannel::Ranges => out.ranges.clone_from(&held.ranges),
                SensorChannel::Gps => out.gps = held.gps,
                SensorChannel::Speed => out.speed = held.speed,
                SensorChannel::Weather => out.weather = held.weather,
            }
        }
        DataModel::Offset { dx, dy } => {
            out.gps.x += dx;
            out.gps.y += dy;
        }
        DataModel::Scale { factor } => match channel {
            SensorChannel::Ranges => out.ranges.iter_mut().for_each(|r| *r *= factor),
            SensorChannel::Gps => {
                out.gps.x *= factor;
                out.gps.y *= factor;
            }
            SensorChannel::Speed => out.speed *= factor,
            SensorChannel::Weather => out.weather *= factor,
        },
    }
    Ok(out)
}
