use super::{ray_angles, AgentParams, ControlCommand, ControllerState, SensorFrame};
use crate::world::Mission;

/// Pure-pursuit steering towards the waypoint path plus proportional speed
/// control with an obstacle brake.
///
/// The pursuit target is the first unvisited waypoint at least `lookahead`
/// metres from the GPS pose (or the last waypoint). Steering sign follows the
/// world axes: negative steers left.
pub fn rule_controller(
    frame: &SensorFrame,
    mission: &Mission,
    state: &mut ControllerState,
    params: &AgentParams,
) -> ControlCommand {
    state.advance(&frame.gps, mission);
    let wps = &mission.waypoints;
    if state.next_waypoint >= wps.len() {
        return ControlCommand::safe_default(frame.frame);
    }

    let aim = wps[state.next_waypoint..]
        .iter()
        .find(|w| frame.gps.dist(w) >= params.lookahead)
        .unwrap_or(&wps[wps.len() - 1]);
    let alpha = frame.gps.bearing_to(aim.point());
    let ld = frame.gps.dist(aim).max(1e-6);
    let curvature = 2.0 * alpha.sin() / ld;
    let delta = (params.wheelbase * curvature).atan();
    let steer = (delta / params.max_steer).clamp(-1.0, 1.0);

    let forward_min = ray_angles(frame.ranges.len())
        .iter()
        .zip(&frame.ranges)
        .filter(|(a, _)| a.abs() <= params.brake_cone)
        .map(|(_, &r)| r)
        .fold(f64::INFINITY, f64::min);

    let (throttle, brake) = if forward_min < params.d_brake {
        (0.0, 1.0)
    } else {
        let err = params.v_target - frame.speed;
        let throttle = (params.speed_gain * err).clamp(0.0, 1.0);
        let brake = if err < -1.0 { (-0.25 * err).clamp(0.0, 1.0) } else { 0.0 };
        (throttle, brake)
    };

    let mut cmd = ControlCommand { steer, throttle, brake, frame: frame.frame };
    cmd.sanitize();
    cmd
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Pose;

    fn mission(waypoints: Vec<Pose>) -> Mission {
        Mission { start: Pose::new(0.0, 0.0, 0.0), waypoints, goal_radius: 2.0, time_budget: 60.0 }
    }

    fn frame(ranges: Vec<f64>) -> SensorFrame {
        SensorFrame { ranges, gps: Pose::new(0.0, 0.0, 0.0), speed: 2.0, weather: 0.0, frame: 4 }
    }

    #[test]
    fn aligned_waypoint_drives_straight() {
        let m = mission(vec![Pose::new(30.0, 0.0, 0.0)]);
        let c = rule_controller(&frame(vec![50.0; 32]), &m, &mut ControllerState::default(), &AgentParams::default());
        assert!(c.steer.abs() < 1e-12);
        assert!(c.throttle > 0.0);
        assert_eq!(c.brake, 0.0);
        assert_eq!(c.frame, 4);
    }

    #[test]
    fn close_obstacle_brakes() {
        let m = mission(vec![Pose::new(30.0, 0.0, 0.0)]);
        let mut ranges = vec![50.0; 32];
        ranges[15] = 2.0;
        ranges[16] = 2.0;
        let c = rule_controller(&frame(ranges), &m, &mut ControllerState::default(), &AgentParams::default());
        assert_eq!((c.throttle, c.brake), (0.0, 1.0));
    }

    #[test]
    fn side_obstacle_does_not_brake() {
        let m = mission(vec![Pose::new(30.0, 0.0, 0.0)]);
        let mut ranges = vec![50.0; 32];
        ranges[0] = 2.0;
        let c = rule_controller(&frame(ranges), &m, &mut ControllerState::default(), &AgentParams::default());
        assert_eq!(c.brake, 0.0);
    }

    #[test]
    fn waypoint_to_the_left_saturates_negative() {
        // left of an east-facing vehicle is -y in screen axes
        let m = mission(vec![Pose::new(0.0, -7.0, 0.0)]);
        let c = rule_controller(&frame(vec![50.0; 32]), &m, &mut ControllerState::default(), &AgentParams::default());
        assert_eq!(c.steer, -1.0);
        let m = mission(vec![Pose::new(0.0, 7.0, 0.0)]);
        let c = rule_controller(&frame(vec![50.0; 32]), &m, &mut ControllerState::default(), &AgentParams::default());
        assert_eq!(c.steer, 1.0);
    }

    #[test]
    fn finished_mission_holds_the_brake() {
        let m = mission(vec![Pose::new(1.0, 0.0, 0.0)]);
        let mut st = ControllerState::default();
        let c = rule_controller(&frame(vec![50.0; 32]), &m, &mut st, &AgentParams::default());
        assert_eq!(st.next_waypoint, 1);
        assert_eq!(c.brake, 1.0);
    }
}
