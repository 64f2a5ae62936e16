//! Scripted traffic: lane-following vehicles and road-crossing pedestrians.

use super::map::{LaneId, TownMap};
use super::{SimParams, VehicleState, WorldState};
use crate::geom::{pose_at_arc_length, Vec2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficVehicle {
    pub state: VehicleState,
    pub lane: LaneId,
    /// Arc-length position along the lane polyline.
    pub s: f64,
}

/// A pedestrian walks back and forth across one road, perpendicular to its
/// axis. `phase` in [0, 1] spans one crossing; direction flips at the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub state: VehicleState,
    /// Anchor point on the road centerline.
    pub anchor: Vec2,
    /// Unit vector along which the pedestrian oscillates.
    pub cross_dir: Vec2,
    /// Half-span of the oscillation, meters.
    pub half_span: f64,
    pub phase: f64,
    /// +1 walking toward +cross_dir, -1 back.
    pub dir: f64,
}

pub(super) fn vehicle_at(
    map: &TownMap,
    params: &SimParams,
    lane: LaneId,
    s: f64,
) -> TrafficVehicle {
    let (pos, heading) = pose_at_arc_length(&map.lanes[lane].polyline, s);
    let mut state = VehicleState::at_pose(pos, heading, params.vehicle_half_extents);
    state.speed = 0.0;
    TrafficVehicle { state, lane, s }
}

pub(super) fn spawn_pedestrian(
    map: &TownMap,
    params: &SimParams,
    rng: &mut ChaCha8Rng,
) -> Pedestrian {
    let (na, nb) = map.roads[rng.random_range(0..map.roads.len())];
    let (a, b) = (map.node_centers[na], map.node_centers[nb]);
    let axis = (b - a).normalized();
    let len = a.dist(b);
    let t = rng.random_range(0.15..0.85);
    let anchor = a + axis.scale(t * len);
    let cross_dir = axis.right_normal();
    let half_span = map.road_half_width() + 2.0;
    let phase = rng.random_range(0.0..1.0);
    let dir = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
    let offset = (phase * 2.0 - 1.0) * half_span;
    let pos = anchor + cross_dir.scale(offset);
    let heading = cross_dir.scale(dir).heading();
    let mut state = VehicleState::at_pose(pos, heading, params.pedestrian_half_extents);
    state.speed = params.pedestrian_speed;
    Pedestrian {
        state,
        anchor,
        cross_dir,
        half_span,
        phase,
        dir,
    }
}

/// Advance every scripted agent by `dt`. Vehicles follow their lane at
/// cruise speed, braking for anything ahead in the same corridor; at lane
/// ends they pick a successor with the state rng. Pedestrians ping-pong.
pub(super) fn step_agents(map: &TownMap, params: &SimParams, world: &mut WorldState, dt: f64) {
    let obstacle_positions: Vec<(Vec2, f64)> = world
        .traffic_vehicles
        .iter()
        .map(|v| (v.state.pos, v.state.half_extents.0))
        .chain(
            world
                .pedestrians
                .iter()
                .map(|p| (p.state.pos, p.state.half_extents.0)),
        )
        .chain(std::iter::once((
            world.ego.pos,
            world.ego.half_extents.0,
        )))
        .collect();

    let n = world.traffic_vehicles.len();
    for i in 0..n {
        let (lane_id, s, speed, pos, heading) = {
            let v = &world.traffic_vehicles[i];
            (v.lane, v.s, v.state.speed, v.state.pos, v.state.heading)
        };
        let fwd = Vec2::from_heading(heading);

        // Anything ahead in a 1.8 m half-width corridor within the stop gap
        // forces a full brake. Index n corresponds to the ego entry.
        let gap = params.stop_distance;
        let mut blocked = false;
        for (j, (op, ohalf)) in obstacle_positions.iter().enumerate() {
            if j == i {
                continue;
            }
            let rel = *op - pos;
            let along = rel.dot(fwd);
            let lateral = rel.cross(fwd).abs();
            if along > 0.0 && along < gap + ohalf && lateral < 1.8 {
                blocked = true;
                break;
            }
        }

        let target = if blocked { 0.0 } else { params.traffic_speed };
        let accel = if target > speed {
            params.accel_max
        } else {
            -params.brake_max
        };
        let new_speed = (speed + accel * dt).clamp(0.0, target.max(speed.min(target)));
        let new_speed = if blocked {
            (speed - params.brake_max * dt).max(0.0)
        } else {
            new_speed.min(params.traffic_speed)
        };

        let mut new_s = s + new_speed * dt;
        let mut new_lane = lane_id;
        let mut lane = &map.lanes[new_lane];
        while new_s > lane.length {
            let succ = &lane.successors;
            if succ.is_empty() {
                new_s = lane.length;
                break;
            }
            let pick = if succ.len() == 1 {
                0
            } else {
                world.rng.random_range(0..succ.len())
            };
            new_s -= lane.length;
            new_lane = succ[pick];
            lane = &map.lanes[new_lane];
        }
        let (new_pos, new_heading) = pose_at_arc_length(&lane.polyline, new_s);

        let v = &mut world.traffic_vehicles[i];
        v.lane = new_lane;
        v.s = new_s;
        v.state.pos = new_pos;
        v.state.yaw_rate = crate::geom::wrap_angle(new_heading - v.state.heading) / dt;
        v.state.heading = new_heading;
        v.state.speed = new_speed;
    }

    for p in &mut world.pedestrians {
        let step_phase = params.pedestrian_speed * dt / (2.0 * p.half_span);
        let mut phase = p.phase + p.dir * step_phase;
        if phase > 1.0 {
            phase = 2.0 - phase;
            p.dir = -1.0;
        } else if phase < 0.0 {
            phase = -phase;
            p.dir = 1.0;
        }
        p.phase = phase;
        let offset = (phase * 2.0 - 1.0) * p.half_span;
        p.state.pos = p.anchor + p.cross_dir.scale(offset);
        p.state.heading = p.cross_dir.scale(p.dir).heading();
        p.state.speed = params.pedestrian_speed;
    }
}
