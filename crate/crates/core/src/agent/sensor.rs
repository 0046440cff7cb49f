use std::f64::consts::PI;

use super::{AgentParams, SensorFrame};
use crate::rng::SimRng;
use crate::world::{Point, Pose, World};

/// Stop marching once the free-space bound drops below this.
const HIT_EPS: f64 = 1e-3;
/// Smallest advance per march iteration; the range error is below this.
pub const MARCH_STEP: f64 = 0.05;

/// Ray angles relative to the heading, evenly spaced over the forward 180°
/// arc from -90° (left) to +90° (right), endpoints included.
pub fn ray_angles(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|i| -PI / 2.0 + PI * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Lower bound on the distance from `p` to the nearest obstacle: an actor
/// footprint or the curb edge of the drivable area.
fn free_space(world: &World, p: Point) -> f64 {
    world
        .actors
        .iter()
        .map(|a| a.pose.point().dist(p) - a.radius)
        .fold(world.map.curb_clearance(p), f64::min)
}

fn march(world: &World, origin: Point, dir: Point, max_range: f64) -> f64 {
    let mut t = 0.0;
    while t < max_range {
        let p = Point::new(origin.x + t * dir.x, origin.y + t * dir.y);
        let s = free_space(world, p);
        if s <= HIT_EPS {
            return t;
        }
        t += s.max(MARCH_STEP);
    }
    max_range
}

/// Synthesizes one sensor frame. Always draws two normals from `rng` for the
/// GPS jitter so the stream position does not depend on the noise level.
pub fn sense(world: &World, rng: &mut SimRng, params: &AgentParams) -> SensorFrame {
    let ego = &world.ego.pose;
    let origin = ego.point();
    let ranges = ray_angles(params.num_rays)
        .into_iter()
        .map(|a| {
            let (s, c) = (ego.heading + a).sin_cos();
            march(world, origin, Point::new(c, s), params.max_range)
        })
        .collect();
    let sigma = params.sigma_gps * (1.0 + world.weather);
    let nx = rng.normal();
    let ny = rng.normal();
    let gps = if sigma == 0.0 { *ego } else { Pose { x: ego.x + sigma * nx, y: ego.y + sigma * ny, ..*ego } };
    SensorFrame { ranges, gps, speed: world.ego.speed, weather: world.weather, frame: world.frame }
}
