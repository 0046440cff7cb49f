use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentError, AgentParams, ControlCommand, ControllerState, SensorFrame};
use crate::world::Mission;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "tanh")]
    Tanh,
    #[serde(rename = "relu")]
    Relu,
    #[serde(rename = "id", alias = "identity")]
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Identity => x,
        }
    }
}

/// Fully connected layer computing `act(w · x + b)`; `w` is rows × cols with
/// one row per output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub act: Activation,
}

impl Layer {
    pub fn rows(&self) -> usize {
        self.w.len()
    }

    pub fn cols(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub layers: Vec<Layer>,
}

impl Weights {
    /// `(rows, cols)` per layer.
    pub fn shape(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.rows(), l.cols())).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, Layer::cols)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.layers.is_empty() {
            return Err(AgentError::Empty);
        }
        let dim = |layer, message: String| AgentError::Dimension { layer, message };
        let mut prev_rows: Option<usize> = None;
        for (i, l) in self.layers.iter().enumerate() {
            if l.rows() == 0 || l.cols() == 0 {
                return Err(dim(i, "empty weight matrix".into()));
            }
            if let Some(r) = l.w.iter().position(|row| row.len() != l.cols()) {
                return Err(dim(i, format!("row {r} has {} columns, expected {}", l.w[r].len(), l.cols())));
            }
            if l.b.len() != l.rows() {
                return Err(dim(i, format!("bias length {} does not match {} rows", l.b.len(), l.rows())));
            }
            if let Some(p) = prev_rows {
                if l.cols() != p {
                    return Err(dim(i, format!("expects {} inputs but previous layer outputs {p}", l.cols())));
                }
            }
            prev_rows = Some(l.rows());
        }
        if prev_rows != Some(3) {
            return Err(dim(self.layers.len() - 1, format!("final output width {} is not 3", prev_rows.unwrap_or(0))));
        }
        Ok(())
    }
}

pub fn parse_weights(text: &str) -> Result<Weights, AgentError> {
    let w: Weights = serde_json::from_str(text).map_err(|e| AgentError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    w.validate()?;
    Ok(w)
}

pub fn load_weights(path: &Path) -> Result<Weights, AgentError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| AgentError::Io { path: path.display().to_string(), source })?;
    parse_weights(&text)
}

/// Network input: the ranges in metres, then `speed / v_max`, the bearing to
/// the next unvisited waypoint (radians, negative = left), its distance / 100
/// and the weather scalar.
pub fn nn_input(frame: &SensorFrame, mission: &Mission, state: &mut ControllerState, params: &AgentParams) -> Vec<f64> {
    state.advance(&frame.gps, mission);
    let goal = &mission.waypoints[state.next_waypoint.min(mission.waypoints.len() - 1)];
    let mut v = Vec::with_capacity(frame.ranges.len() + 4);
    v.extend_from_slice(&frame.ranges);
    v.push(frame.speed / params.v_max);
    v.push(frame.gps.bearing_to(goal.point()));
    v.push(frame.gps.dist(goal) / 100.0);
    v.push(frame.weather);
    v
}

/// Raw network outputs before squashing.
pub fn nn_raw(input: &[f64], weights: &Weights) -> Result<Vec<f64>, AgentError> {
    if input.len() != weights.input_width() {
        return Err(AgentError::Dimension {
            layer: 0,
            message: format!("input has {} values, layer expects {}", input.len(), weights.input_width()),
        });
    }
    let mut x = input.to_vec();
    for (i, l) in weights.layers.iter().enumerate() {
        if l.cols() != x.len() {
            return Err(AgentError::Dimension {
                layer: i,
                message: format!("expects {} inputs, got {}", l.cols(), x.len()),
            });
        }
        x = l
            .w
            .iter()
            .zip(&l.b)
            .map(|(row, b)| {
                let mut acc = 0.0;
                for (w, xi) in row.iter().zip(&x) {
                    acc += w * xi;
                }
                l.act.apply(acc + b)
            })
            .collect();
    }
    Ok(x)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Forward pass mapped to a command: `steer = tanh(y0)`,
/// `throttle = σ(y1)`, `brake = σ(y2)`. The command is not yet sanitized,
/// so corrupted weights can still surface a NaN here.
pub fn nn_forward(input: &[f64], weights: &Weights, frame: u64) -> Result<ControlCommand, AgentError> {
    let y = nn_raw(input, weights)?;
    if y.len() != 3 {
        return Err(AgentError::Dimension {
            layer: weights.layers.len() - 1,
            message: format!("output width {} is not 3", y.len()),
        });
    }
    Ok(ControlCommand { steer: y[0].tanh(), throttle: sigmoid(y[1]), brake: sigmoid(y[2]), frame })
}
