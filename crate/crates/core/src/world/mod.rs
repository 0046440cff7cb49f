//! Deterministic 2D urban driving world.
//!
//! The ego vehicle follows a kinematic bicycle model stepped at a fixed
//! `dt = 1 / tick_rate`. Lanes are polylines with a lane width and a curb
//! offset; other road users are circles that follow frame-indexed scripts.
//! A [`World`] is an immutable snapshot: [`World::step`] returns the next one.

pub mod geometry;
mod scenario;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use geometry::{normalize_angle, Point, Pose};
pub use scenario::{load_scenario, load_scenario_file, ScenarioDoc};

use crate::agent::ControlCommand;
use geometry::Segment;

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid {field}: {message}")]
    Invariant { field: String, message: String },
    #[error("off-map: nearest lane is {distance:.2} m away (horizon {horizon} m)")]
    OffMap { distance: f64, horizon: f64 },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl WorldError {
    pub(crate) fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        WorldError::Invariant { field: field.into(), message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaneSegment {
    pub id: String,
    pub centerline: Vec<Point>,
    pub lane_width: f64,
    pub curb_offset: f64,
}

/// Lane set with a flattened segment cache.
#[derive(Clone, Debug)]
pub struct Map {
    lanes: Vec<LaneSegment>,
    segments: Vec<Segment>,
}

impl Map {
    pub fn new(lanes: Vec<LaneSegment>) -> Self {
        let segments = lanes
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.centerline.windows(2).map(move |w| Segment::new(w[0], w[1], i)))
            .collect();
        Map { lanes, segments }
    }

    pub fn lanes(&self) -> &[LaneSegment] {
        &self.lanes
    }

    /// Signed offset to the nearest centerline and the index of its lane.
    pub fn nearest(&self, p: Point) -> Option<(f64, usize)> {
        let mut best: Option<(f64, &Segment)> = None;
        for s in &self.segments {
            let d = s.distance(p);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, s));
            }
        }
        best.map(|(d, s)| {
            let signed = if s.side(p) < 0.0 { -d } else { d };
            (signed, s.lane)
        })
    }

    /// Distance from `p` to the curb boundary of the drivable area (union of
    /// all lane corridors). Positive inside, negative outside.
    pub fn curb_clearance(&self, p: Point) -> f64 {
        self.segments
            .iter()
            .map(|s| self.lanes[s.lane].curb_offset - s.distance(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    Pedestrian,
    Vehicle,
    StaticObstacle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub frame: u64,
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Actor {
    pub id: String,
    pub kind: ActorKind,
    pub pose: Pose,
    pub speed: f64,
    pub radius: f64,
    /// Pose at frame 0; the script interpolates from here.
    pub origin: Pose,
    pub script: Vec<Keyframe>,
}

impl Actor {
    /// Pose and speed at `frame` by linear interpolation between keyframes.
    fn at_frame(&self, frame: u64, tick_rate: u32) -> (Pose, f64) {
        let mut prev = Keyframe { frame: 0, pose: self.origin };
        for kf in &self.script {
            if frame < kf.frame {
                let span = (kf.frame - prev.frame) as f64;
                let t = (frame - prev.frame) as f64 / span;
                let dh = normalize_angle(kf.pose.heading - prev.pose.heading);
                let pose = Pose::new(
                    prev.pose.x + t * (kf.pose.x - prev.pose.x),
                    prev.pose.y + t * (kf.pose.y - prev.pose.y),
                    prev.pose.heading + t * dh,
                );
                let speed = prev.pose.dist(&kf.pose) / (span / tick_rate as f64);
                return (pose, speed);
            }
            prev = *kf;
        }
        (prev.pose, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgoState {
    pub pose: Pose,
    pub speed: f64,
    pub wheelbase: f64,
    pub half_width: f64,
}

impl EgoState {
    pub fn half_length(&self) -> f64 {
        (self.wheelbase + 1.0) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mission {
    pub start: Pose,
    pub waypoints: Vec<Pose>,
    pub goal_radius: f64,
    pub time_budget: f64,
}

/// Vehicle dynamics constants and query settings shared by every snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldParams {
    /// Steering angle at `steer = ±1`, radians.
    pub max_steer: f64,
    pub v_max: f64,
    pub a_throttle: f64,
    pub a_brake: f64,
    pub drag: f64,
    /// Lane queries fail with `OffMap` beyond this distance from every centerline.
    pub off_map_horizon: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            max_steer: 35f64.to_radians(),
            v_max: 20.0,
            a_throttle: 3.0,
            a_brake: 8.0,
            drag: 0.05,
            off_map_horizon: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub actor: usize,
    pub actor_id: String,
    pub kind: ActorKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneMetrics {
    pub lateral_offset: f64,
    pub off_lane: bool,
    pub on_curb: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionStatus {
    InProgress,
    Success,
    Timeout,
}

#[derive(Clone, Debug)]
pub struct World {
    pub map: Arc<Map>,
    pub actors: Vec<Actor>,
    pub ego: EgoState,
    pub weather: f64,
    pub frame: u64,
    pub tick_rate: u32,
    pub mission: Arc<Mission>,
    pub odometer_km: f64,
    /// Index of the next waypoint to visit; equals `waypoints.len()` once done.
    pub next_waypoint: usize,
    pub params: Arc<WorldParams>,
}

impl World {
    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate as f64
    }

    /// Simulated seconds since frame 0.
    pub fn time(&self) -> f64 {
        self.frame as f64 / self.tick_rate as f64
    }

    /// Advances one tick. Command fields are re-clamped here; NaN maps to the
    /// safe defaults (no steer, no throttle, full brake).
    pub fn step(&self, cmd: &ControlCommand) -> World {
        let p = &*self.params;
        let dt = self.dt();
        let steer = if cmd.steer.is_nan() { 0.0 } else { cmd.steer.clamp(-1.0, 1.0) };
        let throttle = if cmd.throttle.is_nan() { 0.0 } else { cmd.throttle.clamp(0.0, 1.0) };
        let brake = if cmd.brake.is_nan() { 1.0 } else { cmd.brake.clamp(0.0, 1.0) };

        let ego = &self.ego;
        let v = ego.speed;
        let dh = v / ego.wheelbase * (p.max_steer * steer).tan() * dt;
        // Advancing along the mid-step heading puts every vertex of a
        // constant-curvature run on the exact circle.
        let mid = ego.pose.heading + 0.5 * dh;
        let dx = v * dt * mid.cos();
        let dy = v * dt * mid.sin();
        let pose = Pose::new(ego.pose.x + dx, ego.pose.y + dy, ego.pose.heading + dh);
        let accel = p.a_throttle * throttle - p.a_brake * brake - p.drag * v;
        let speed = (v + accel * dt).clamp(0.0, p.v_max);

        let frame = self.frame + 1;
        let actors = self
            .actors
            .iter()
            .map(|a| {
                let (pose, speed) = a.at_frame(frame, self.tick_rate);
                Actor { pose, speed, ..a.clone() }
            })
            .collect();

        let mut next = World {
            map: Arc::clone(&self.map),
            actors,
            ego: EgoState { pose, speed, ..*ego },
            weather: self.weather,
            frame,
            tick_rate: self.tick_rate,
            mission: Arc::clone(&self.mission),
            odometer_km: self.odometer_km + dx.hypot(dy) / 1000.0,
            next_waypoint: self.next_waypoint,
            params: Arc::clone(&self.params),
        };
        next.advance_waypoints();
        next
    }

    fn advance_waypoints(&mut self) {
        let wps = &self.mission.waypoints;
        while self.next_waypoint < wps.len()
            && self.ego.pose.dist(&wps[self.next_waypoint]) <= self.mission.goal_radius
        {
            self.next_waypoint += 1;
        }
    }

    /// Actors whose circular footprint touches or overlaps the ego rectangle.
    pub fn query_collisions(&self) -> Vec<CollisionEvent> {
        let e = &self.ego;
        let (sin, cos) = e.pose.heading.sin_cos();
        let hl = e.half_length();
        self.actors
            .iter()
            .enumerate()
            .filter(|(_, a)| {
                let rx = a.pose.x - e.pose.x;
                let ry = a.pose.y - e.pose.y;
                let lx = rx * cos + ry * sin;
                let ly = -rx * sin + ry * cos;
                let qx = lx - lx.clamp(-hl, hl);
                let qy = ly - ly.clamp(-e.half_width, e.half_width);
                qx * qx + qy * qy <= a.radius * a.radius
            })
            .map(|(i, a)| CollisionEvent { actor: i, actor_id: a.id.clone(), kind: a.kind })
            .collect()
    }

    pub fn lane_metrics(&self) -> Result<LaneMetrics, WorldError> {
        let horizon = self.params.off_map_horizon;
        let (offset, lane) = self
            .map
            .nearest(self.ego.pose.point())
            .ok_or(WorldError::OffMap { distance: f64::INFINITY, horizon })?;
        if offset.abs() > horizon {
            return Err(WorldError::OffMap { distance: offset.abs(), horizon });
        }
        let l = &self.map.lanes[lane];
        Ok(LaneMetrics {
            lateral_offset: offset,
            off_lane: offset.abs() > l.lane_width / 2.0,
            on_curb: offset.abs() > l.curb_offset,
        })
    }

    pub fn mission_status(&self) -> MissionStatus {
        if self.next_waypoint >= self.mission.waypoints.len() {
            MissionStatus::Success
        } else if self.time() > self.mission.time_budget {
            MissionStatus::Timeout
        } else {
            MissionStatus::InProgress
        }
    }
}
