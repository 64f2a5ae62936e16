//! Pure-pursuit expert that supplies ground-truth driving commands.

use super::map::TownMap;
use super::route::RouteSpec;
use super::{SimError, SimParams, WorldState};
use crate::geom::{point_at_arc_length, wrap_angle, Vec2};
use crate::types::NavCommand;

/// What the expert wants right now. Steering is normalized; longitudinal
/// control is a target speed for the low-level speed controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpertDecision {
    pub steer_norm: f64,
    pub target_speed: f64,
    pub command: NavCommand,
    /// Ego progress along the route, meters.
    pub route_s: f64,
    /// Unsigned lateral deviation from the route, meters.
    pub lateral_dev: f64,
    pub at_goal: bool,
}

/// Expert action as a normalized control command (speed over v_max).
pub fn autopilot_action(
    map: &TownMap,
    params: &SimParams,
    route: &RouteSpec,
    state: &WorldState,
) -> Result<crate::types::ControlCommand, SimError> {
    let d = expert_decision(map, params, route, state)?;
    Ok(crate::types::ControlCommand::new(
        d.steer_norm,
        d.target_speed / params.v_max,
    ))
}

/// Pure pursuit toward a look-ahead point on the route, a hard stop rule
/// for agents blocking the ego lane, and the route's command zones.
pub fn expert_decision(
    map: &TownMap,
    params: &SimParams,
    route: &RouteSpec,
    state: &WorldState,
) -> Result<ExpertDecision, SimError> {
    let ego = &state.ego;
    let (route_s, lateral_dev) = route.progress(ego.pos);
    if lateral_dev > params.offroute_bound {
        return Err(SimError::OffRoute {
            deviation: lateral_dev,
            bound: params.offroute_bound,
        });
    }
    let command = route.command_at(route_s);

    if ego.pos.dist(route.goal) <= params.goal_radius {
        return Ok(ExpertDecision {
            steer_norm: 0.0,
            target_speed: 0.0,
            command,
            route_s,
            lateral_dev,
            at_goal: true,
        });
    }

    let lookahead = (params.lookahead_gain * ego.speed)
        .clamp(params.lookahead_min, params.lookahead_max);
    let target = point_at_arc_length(&route.polyline, route_s + lookahead);
    let bearing = (target - ego.pos).heading();
    let alpha = wrap_angle(bearing - ego.heading);
    let delta = (2.0 * params.wheelbase * alpha.sin()).atan2(lookahead);
    let steer_norm = (delta / params.max_steer_rad()).clamp(-1.0, 1.0);

    let blocked = lane_blocked(map, params, state);
    let target_speed = if blocked {
        0.0
    } else if command != NavCommand::LaneFollow {
        params.turn_speed
    } else {
        params.cruise_speed
    };

    Ok(ExpertDecision {
        steer_norm,
        target_speed,
        command,
        route_s,
        lateral_dev,
        at_goal: false,
    })
}

/// True when any agent sits in the ego's corridor with a bumper gap below
/// the stop distance.
fn lane_blocked(map: &TownMap, params: &SimParams, state: &WorldState) -> bool {
    let fwd = Vec2::from_heading(state.ego.heading);
    let corridor = 0.6 * map.lane_width;
    let ego_half = state.ego.half_extents.0;
    state
        .traffic_vehicles
        .iter()
        .map(|v| (v.state.pos, v.state.half_extents.0))
        .chain(
            state
                .pedestrians
                .iter()
                .map(|p| (p.state.pos, p.state.half_extents.0)),
        )
        .any(|(pos, half)| {
            let rel = pos - state.ego.pos;
            let along = rel.dot(fwd);
            let lateral = rel.cross(fwd).abs();
            along > 0.0 && along - ego_half - half < params.stop_distance && lateral <= corridor
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::pose_at_arc_length;
    use crate::simworld::route::{from_lane_path, single_hop_paths};
    use crate::simworld::{
        build_town, spawn_scenario, step, traffic::TrafficVehicle, EgoControls, TownId, TownMap,
        TurnKind, VehicleState, WeatherParams,
    };

    fn straight_setup() -> (TownMap, SimParams, RouteSpec, WorldState) {
        let map = build_town(TownId::TrainTown);
        let params = SimParams::default();
        let from = map.road_lane_ids().next().unwrap();
        let route = from_lane_path(&map, &params, vec![from]).unwrap();
        let mut state =
            spawn_scenario(&map, &params, 0, 0, WeatherParams::clear_afternoon(), 5).unwrap();
        let (pos, heading) = pose_at_arc_length(&route.polyline, 5.0);
        state.ego = VehicleState::at_pose(pos, heading, params.vehicle_half_extents);
        state.ego.speed = params.cruise_speed;
        (map, params, route, state)
    }

    #[test]
    fn cruises_straight_on_an_empty_lane() {
        let (map, params, route, state) = straight_setup();
        let d = expert_decision(&map, &params, &route, &state).unwrap();
        assert!(d.steer_norm.abs() < 1e-9, "steer {}", d.steer_norm);
        assert_eq!(d.target_speed, params.cruise_speed);
        assert_eq!(d.command, NavCommand::LaneFollow);
        assert!(!d.at_goal);
    }

    #[test]
    fn steers_right_when_left_of_the_route() {
        let (map, params, route, mut state) = straight_setup();
        // Right of the heading is +right_normal; move the ego the other way.
        let left = Vec2::from_heading(state.ego.heading).right_normal().scale(-1.0);
        state.ego.pos = state.ego.pos + left.scale(1.0);
        let d = expert_decision(&map, &params, &route, &state).unwrap();
        assert!(d.steer_norm > 0.01, "steer {}", d.steer_norm);
    }

    #[test]
    fn stops_for_an_agent_in_the_lane_but_not_beside_it() {
        let (map, params, route, state) = straight_setup();
        let fwd = Vec2::from_heading(state.ego.heading);

        let mut blocked = state.clone();
        blocked.traffic_vehicles.push(TrafficVehicle {
            state: VehicleState::at_pose(
                state.ego.pos + fwd.scale(7.0),
                state.ego.heading,
                params.vehicle_half_extents,
            ),
            lane: 0,
            s: 0.0,
        });
        let d = expert_decision(&map, &params, &route, &blocked).unwrap();
        assert_eq!(d.target_speed, 0.0);

        let mut beside = state.clone();
        let side = fwd.right_normal().scale(3.0);
        beside.traffic_vehicles.push(TrafficVehicle {
            state: VehicleState::at_pose(
                state.ego.pos + fwd.scale(7.0) + side,
                state.ego.heading,
                params.vehicle_half_extents,
            ),
            lane: 0,
            s: 0.0,
        });
        let d = expert_decision(&map, &params, &route, &beside).unwrap();
        assert_eq!(d.target_speed, params.cruise_speed);
    }

    #[test]
    fn reports_goal_arrival() {
        let (map, params, route, mut state) = straight_setup();
        state.ego.pos = route.goal + Vec2::new(0.5, 0.5);
        let d = expert_decision(&map, &params, &route, &state).unwrap();
        assert!(d.at_goal);
        assert_eq!(d.target_speed, 0.0);
    }

    #[test]
    fn errors_when_far_off_route() {
        let (map, params, route, mut state) = straight_setup();
        let side = Vec2::from_heading(state.ego.heading).right_normal();
        state.ego.pos = state.ego.pos + side.scale(5.0);
        let err = expert_decision(&map, &params, &route, &state).unwrap_err();
        assert!(matches!(err, SimError::OffRoute { .. }));
    }

    /// Closed-loop smoke test: the expert drives a right turn end to end
    /// with a proportional speed controller standing in for the PID.
    #[test]
    fn drives_a_turn_to_the_goal() {
        let map = build_town(TownId::TrainTown);
        let params = SimParams::default();
        let mut picked = None;
        'outer: for from in map.road_lane_ids() {
            for (path, turn) in single_hop_paths(&map, from) {
                if turn == TurnKind::Right {
                    picked = Some(path);
                    break 'outer;
                }
            }
        }
        let route = from_lane_path(&map, &params, picked.expect("no right turn")).unwrap();
        let mut state =
            spawn_scenario(&map, &params, 0, 0, WeatherParams::clear_afternoon(), 5).unwrap();
        let (pos, heading) = route.start_pose();
        state.ego = VehicleState::at_pose(pos, heading, params.vehicle_half_extents);

        let dt = 0.1;
        let mut reached = false;
        let mut saw_turn_cmd = false;
        for _ in 0..((route.length / 2.0 / dt) as usize + 200) {
            let d = expert_decision(&map, &params, &route, &state).unwrap();
            saw_turn_cmd |= d.command == NavCommand::TurnRight;
            assert!(d.lateral_dev < 2.0, "deviation {:.2}", d.lateral_dev);
            if d.at_goal {
                reached = true;
                break;
            }
            let err = d.target_speed - state.ego.speed;
            let controls = EgoControls::new(d.steer_norm, 0.6 * err, -0.6 * err);
            state = step(&map, &params, &state, controls, dt);
        }
        assert!(reached, "expert never reached the goal");
        assert!(saw_turn_cmd, "turn command never activated");
    }
}
