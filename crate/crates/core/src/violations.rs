//! Traffic violation detection over consecutive world snapshots.
//!
//! In the default `edge` mode a lane or curb violation is one event per
//! continuous excursion, and a collision is one event per contact with an
//! actor; the same actor only produces a new event after `contact_cooldown`
//! frames without contact. `per_frame` mode emits an event on every frame
//! the condition holds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::world::{ActorKind, Pose, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Lane,
    Curb,
    CollisionPedestrian,
    CollisionVehicle,
    CollisionStatic,
}

impl ViolationKind {
    pub fn from_actor(kind: ActorKind) -> Self {
        match kind {
            ActorKind::Pedestrian => ViolationKind::CollisionPedestrian,
            ActorKind::Vehicle => ViolationKind::CollisionVehicle,
            ActorKind::StaticObstacle => ViolationKind::CollisionStatic,
        }
    }
}

/// Collisions are accidents; lane and curb excursions are not.
pub fn is_accident(kind: ViolationKind) -> bool {
    matches!(
        kind,
        ViolationKind::CollisionPedestrian | ViolationKind::CollisionVehicle | ViolationKind::CollisionStatic
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViolationEvent {
    pub kind: ViolationKind,
    pub frame: u64,
    pub time: f64,
    pub position: Pose,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    #[default]
    Edge,
    PerFrame,
}

pub const DEFAULT_CONTACT_COOLDOWN: u64 = 30;

#[derive(Clone, Debug)]
pub struct ViolationLedger {
    events: Vec<ViolationEvent>,
    off_lane: bool,
    on_curb: bool,
    /// Last frame each actor was in contact with the ego.
    last_contact: BTreeMap<usize, u64>,
    pub count_mode: CountMode,
    pub contact_cooldown: u64,
}

impl Default for ViolationLedger {
    fn default() -> Self {
        ViolationLedger::new(CountMode::Edge, DEFAULT_CONTACT_COOLDOWN)
    }
}

impl ViolationLedger {
    pub fn new(count_mode: CountMode, contact_cooldown: u64) -> Self {
        ViolationLedger {
            events: Vec::new(),
            off_lane: false,
            on_curb: false,
            last_contact: BTreeMap::new(),
            count_mode,
            contact_cooldown,
        }
    }

    pub fn events(&self) -> &[ViolationEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<ViolationEvent> {
        self.events
    }

    /// Whether the ego is currently inside a lane / curb excursion.
    pub fn open_states(&self) -> (bool, bool) {
        (self.off_lane, self.on_curb)
    }

    /// Records the violations of the `prev -> next` transition and returns the
    /// events added. Leaving the map counts as both off-lane and on-curb.
    pub fn observe(&mut self, prev: &World, next: &World) -> &[ViolationEvent] {
        debug_assert_eq!(next.frame, prev.frame + 1);
        let before = self.events.len();
        let (off_lane, on_curb) = match next.lane_metrics() {
            Ok(m) => (m.off_lane, m.on_curb),
            Err(_) => (true, true),
        };
        self.record_excursion(ViolationKind::Lane, off_lane, next);
        self.record_excursion(ViolationKind::Curb, on_curb, next);
        self.off_lane = off_lane;
        self.on_curb = on_curb;

        for hit in next.query_collisions() {
            let fresh = match (self.count_mode, self.last_contact.get(&hit.actor)) {
                (CountMode::PerFrame, _) | (_, None) => true,
                (CountMode::Edge, Some(&last)) => next.frame - last >= self.contact_cooldown,
            };
            if fresh {
                self.push(ViolationKind::from_actor(hit.kind), next);
            }
            self.last_contact.insert(hit.actor, next.frame);
        }
        &self.events[before..]
    }

    fn record_excursion(&mut self, kind: ViolationKind, now: bool, world: &World) {
        let was = match kind {
            ViolationKind::Lane => self.off_lane,
            _ => self.on_curb,
        };
        let emit = match self.count_mode {
            CountMode::Edge => now && !was,
            CountMode::PerFrame => now,
        };
        if emit {
            self.push(kind, world);
        }
    }

    fn push(&mut self, kind: ViolationKind, world: &World) {
        self.events.push(ViolationEvent { kind, frame: world.frame, time: world.time(), position: world.ego.pose });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::ControlCommand;
    use crate::world::{load_scenario, Actor};

    fn world() -> World {
        load_scenario(
            r#"{
              "lanes": [{"centerline": [[-500, 0], [500, 0]], "lane_width": 3.5, "curb_offset": 5.0}],
              "ego": {},
              "mission": {"start": {"x": 0, "y": 0}, "waypoints": [{"x": 400, "y": 0}],
                          "goal_radius": 2.0, "time_budget": 600}
            }"#,
        )
        .unwrap()
    }

    /// Steps the world once with the ego teleported to lateral offset `y`.
    fn step_to(w: &World, y: f64) -> World {
        let mut n = w.step(&ControlCommand::safe_default(w.frame));
        n.ego.pose.y = y;
        n
    }

    fn run(ledger: &mut ViolationLedger, offsets: &[f64]) -> World {
        let mut w = world();
        for &y in offsets {
            let n = step_to(&w, y);
            ledger.observe(&w, &n);
            w = n;
        }
        w
    }

    #[test]
    fn long_excursion_is_one_event() {
        let mut l = ViolationLedger::default();
        let mut offsets = vec![0.0; 3];
        offsets.extend([2.5; 40]);
        run(&mut l, &offsets);
        assert_eq!(l.events().len(), 1);
        assert_eq!(l.events()[0].kind, ViolationKind::Lane);
        assert_eq!(l.events()[0].frame, 4);
        assert_eq!(l.events()[0].time, 4.0 / 15.0);
    }

    #[test]
    fn two_excursions_two_events() {
        let mut l = ViolationLedger::default();
        run(&mut l, &[2.5, 2.5, 0.0, 2.5]);
        assert_eq!(l.events().iter().filter(|e| e.kind == ViolationKind::Lane).count(), 2);
    }

    #[test]
    fn per_frame_mode_counts_every_frame() {
        let mut l = ViolationLedger::new(CountMode::PerFrame, DEFAULT_CONTACT_COOLDOWN);
        run(&mut l, &[2.5, 2.5, 0.0, 2.5]);
        assert_eq!(l.events().len(), 3);
    }

    #[test]
    fn curb_and_pedestrian_in_one_frame() {
        let mut w = world();
        let pose = Pose::new(0.0, 6.0, 0.0);
        w.actors.push(Actor {
            id: "p".into(),
            kind: ActorKind::Pedestrian,
            pose,
            speed: 0.0,
            radius: 0.3,
            origin: pose,
            script: vec![],
        });
        let n = step_to(&w, 6.0);
        let mut l = ViolationLedger::default();
        let added: Vec<ViolationKind> = l.observe(&w, &n).iter().map(|e| e.kind).collect();
        assert!(added.contains(&ViolationKind::Curb));
        assert!(added.contains(&ViolationKind::CollisionPedestrian));
        assert!(added.contains(&ViolationKind::Lane));
        assert_eq!(added.len(), 3);
    }

    #[test]
    fn recontact_needs_cooldown() {
        let mut w = world();
        let pose = Pose::new(0.0, 0.0, 0.0);
        w.actors.push(Actor {
            id: "v".into(),
            kind: ActorKind::Vehicle,
            pose,
            speed: 0.0,
            radius: 1.0,
            origin: pose,
            script: vec![],
        });
        let mut l = ViolationLedger::new(CountMode::Edge, 5);
        // contact at frames 1..=3, apart 4..=6, contact 7 (gap 4 < 5), apart, contact at 20
        let far = |w: &World| {
            let mut n = w.step(&ControlCommand::safe_default(0));
            n.ego.pose.x = 50.0;
            n
        };
        let near = |w: &World| {
            let mut n = w.step(&ControlCommand::safe_default(0));
            n.ego.pose.x = 0.0;
            n
        };
        for f in 1..=25u64 {
            let n = if (1..=3).contains(&f) || f == 7 || f == 20 { near(&w) } else { far(&w) };
            l.observe(&w, &n);
            w = n;
        }
        let frames: Vec<u64> = l.events().iter().map(|e| e.frame).collect();
        assert_eq!(frames, vec![1, 20]);
    }

    #[test]
    fn accident_classification() {
        assert!(is_accident(ViolationKind::CollisionPedestrian));
        assert!(is_accident(ViolationKind::CollisionVehicle));
        assert!(is_accident(ViolationKind::CollisionStatic));
        assert!(!is_accident(ViolationKind::Lane));
        assert!(!is_accident(ViolationKind::Curb));
    }
}
