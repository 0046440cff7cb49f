//! JSON scenario documents and their validation into a [`World`].

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    Actor, ActorKind, EgoState, Keyframe, LaneSegment, Map, Mission, Point, Pose, World,
    WorldError, WorldParams,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_tick_rate")]
    pub tick_rate: u32,
    #[serde(default)]
    pub weather: f64,
    pub lanes: Vec<LaneDoc>,
    #[serde(default)]
    pub actors: Vec<ActorDoc>,
    #[serde(default)]
    pub ego: EgoDoc,
    pub mission: MissionDoc,
}

fn default_tick_rate() -> u32 {
    15
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneDoc {
    #[serde(default)]
    pub id: Option<String>,
    /// `[[x, y], ...]`
    pub centerline: Vec<[f64; 2]>,
    pub lane_width: f64,
    pub curb_offset: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorDoc {
    #[serde(default)]
    pub id: Option<String>,
    pub kind: ActorKind,
    pub pose: Pose,
    #[serde(default)]
    pub speed: f64,
    pub radius: f64,
    #[serde(default)]
    pub script: Vec<Keyframe>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoDoc {
    #[serde(default = "default_wheelbase")]
    pub wheelbase: f64,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default)]
    pub speed: f64,
}

impl Default for EgoDoc {
    fn default() -> Self {
        EgoDoc { wheelbase: default_wheelbase(), half_width: default_half_width(), speed: 0.0 }
    }
}

fn default_wheelbase() -> f64 {
    2.7
}

fn default_half_width() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionDoc {
    pub start: Pose,
    pub waypoints: Vec<Pose>,
    pub goal_radius: f64,
    pub time_budget: f64,
}

/// Parses and validates a scenario document. The returned world is at frame 0
/// with the ego at the mission start.
pub fn load_scenario(text: &str) -> Result<World, WorldError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| WorldError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    doc.into_world(WorldParams::default())
}

pub fn load_scenario_file(path: &Path) -> Result<World, WorldError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| WorldError::Io { path: path.display().to_string(), source })?;
    load_scenario(&text)
}

fn check(cond: bool, field: impl Into<String>, message: &str) -> Result<(), WorldError> {
    if cond {
        Ok(())
    } else {
        Err(WorldError::invariant(field, message))
    }
}

fn finite_pose(p: &Pose) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.heading.is_finite()
}

impl ScenarioDoc {
    pub fn into_world(self, params: WorldParams) -> Result<World, WorldError> {
        check(self.tick_rate > 0, "tick_rate", "must be positive")?;
        check((0.0..=1.0).contains(&self.weather), "weather", "must lie in [0, 1]")?;
        check(!self.lanes.is_empty(), "lanes", "at least one lane is required")?;

        let mut lanes = Vec::with_capacity(self.lanes.len());
        for (i, l) in self.lanes.into_iter().enumerate() {
            let f = |name: &str| format!("lanes[{i}].{name}");
            check(l.centerline.len() >= 2, f("centerline"), "polyline needs at least 2 points")?;
            check(
                l.centerline.iter().flatten().all(|v| v.is_finite()),
                f("centerline"),
                "coordinates must be finite",
            )?;
            check(
                l.centerline.windows(2).all(|w| w[0] != w[1]),
                f("centerline"),
                "consecutive points must be distinct",
            )?;
            check(l.lane_width > 0.0, f("lane_width"), "must be positive")?;
            check(
                l.curb_offset >= l.lane_width / 2.0,
                f("curb_offset"),
                "must be at least lane_width / 2",
            )?;
            lanes.push(LaneSegment {
                id: l.id.unwrap_or_else(|| format!("lane-{i}")),
                centerline: l.centerline.iter().map(|p| Point::new(p[0], p[1])).collect(),
                lane_width: l.lane_width,
                curb_offset: l.curb_offset,
            });
        }

        let mut actors = Vec::with_capacity(self.actors.len());
        for (i, a) in self.actors.into_iter().enumerate() {
            let f = |name: &str| format!("actors[{i}].{name}");
            check(a.radius > 0.0, f("radius"), "must be positive")?;
            check(a.speed >= 0.0, f("speed"), "must be nonnegative")?;
            check(finite_pose(&a.pose), f("pose"), "must be finite")?;
            check(a.script.iter().all(|k| finite_pose(&k.pose)), f("script"), "poses must be finite")?;
            // frame 0 is the actor's initial pose, so keyframes start after it
            let increasing = a.script.first().is_none_or(|k| k.frame > 0)
                && a.script.windows(2).all(|w| w[0].frame < w[1].frame);
            check(increasing, f("script"), "script frames not increasing")?;
            actors.push(Actor {
                id: a.id.unwrap_or_else(|| format!("actor-{i}")),
                kind: a.kind,
                pose: a.pose,
                speed: a.speed,
                radius: a.radius,
                origin: a.pose,
                script: a.script,
            });
        }

        let e = self.ego;
        check(e.wheelbase > 0.0, "ego.wheelbase", "must be positive")?;
        check(e.half_width > 0.0, "ego.half_width", "must be positive")?;
        check((0.0..=params.v_max).contains(&e.speed), "ego.speed", "must lie in [0, v_max]")?;

        let m = self.mission;
        check(!m.waypoints.is_empty(), "mission.waypoints", "at least one waypoint is required")?;
        check(m.waypoints.iter().all(finite_pose), "mission.waypoints", "must be finite")?;
        check(finite_pose(&m.start), "mission.start", "must be finite")?;
        check(m.goal_radius > 0.0, "mission.goal_radius", "must be positive")?;
        check(m.time_budget > 0.0, "mission.time_budget", "must be positive")?;

        let ego = EgoState { pose: m.start, speed: e.speed, wheelbase: e.wheelbase, half_width: e.half_width };
        Ok(World {
            map: Arc::new(Map::new(lanes)),
            actors,
            ego,
            weather: self.weather,
            frame: 0,
            tick_rate: self.tick_rate,
            mission: Arc::new(Mission {
                start: m.start,
                waypoints: m.waypoints,
                goal_radius: m.goal_radius,
                time_budget: m.time_budget,
            }),
            odometer_km: 0.0,
            next_waypoint: 0,
            params: Arc::new(params),
        })
    }
}
