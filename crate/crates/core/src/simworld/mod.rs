//! Deterministic synthetic urban driving world.
//!
//! A `WorldState` advances only through [`step`]; identical seeds and control
//! sequences reproduce identical state and raster sequences bit for bit.

pub mod autopilot;
pub mod camera;
pub mod map;
pub mod render;
pub mod route;
pub mod traffic;
pub mod weather;

use crate::geom::{wrap_angle, Obb, Vec2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use camera::CameraConfig;
pub use map::{build_town, LaneId, LaneKind, TownId, TownMap, TurnKind};
pub use render::{render_observation, Observation};
pub use route::{plan_route, RouteSpec};
pub use traffic::{Pedestrian, TrafficVehicle};
pub use weather::WeatherParams;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot place {requested} agents; map capacity is about {capacity}")]
    PlacementInfeasible { requested: usize, capacity: usize },
    #[error("goal is unreachable from the start pose")]
    UnreachableGoal,
    #[error("pose is not on a mapped lane")]
    OffLane,
    #[error("ego deviated {deviation:.2} m from the route (recovery bound {bound:.2} m)")]
    OffRoute { deviation: f64, bound: f64 },
}

/// Physical and behavioral constants of the world. All tunables referenced
/// by the driving stack live here so they can be set from the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Bicycle-model wheelbase, meters.
    pub wheelbase: f64,
    /// Hard speed bound, m/s; also the speed normalization constant.
    pub v_max: f64,
    /// Expert cruise speed, m/s.
    pub cruise_speed: f64,
    /// Expert speed while a crossing command is active, m/s.
    pub turn_speed: f64,
    /// Full-scale steering angle: steer_norm 1.0 means this many degrees.
    pub max_steer_deg: f64,
    /// Physical front-wheel angle cap, degrees.
    pub steer_cap_deg: f64,
    /// Throttle acceleration at full pedal, m/s^2.
    pub accel_max: f64,
    /// Brake deceleration at full pedal, m/s^2.
    pub brake_max: f64,
    /// Rolling/coast deceleration, m/s^2.
    pub coast_decel: f64,
    /// Expert stops when an agent occupies its lane within this distance.
    pub stop_distance: f64,
    /// Turn commands activate this far before an intersection node.
    pub activation_radius: f64,
    /// Episode ends when the ego is within this distance of the goal.
    pub goal_radius: f64,
    /// Expert aborts when farther than this from the route.
    pub offroute_bound: f64,
    /// Pure-pursuit look-ahead: clamp(gain * v, min, max).
    pub lookahead_min: f64,
    pub lookahead_max: f64,
    pub lookahead_gain: f64,
    /// Ego/vehicle box half extents (half length, half width).
    pub vehicle_half_extents: (f64, f64),
    pub vehicle_height: f64,
    pub pedestrian_half_extents: (f64, f64),
    pub pedestrian_height: f64,
    /// Scripted traffic cruise speed, m/s.
    pub traffic_speed: f64,
    pub pedestrian_speed: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.5,
            v_max: 10.0,
            cruise_speed: 6.0,
            turn_speed: 3.5,
            max_steer_deg: 70.0,
            steer_cap_deg: 35.0,
            accel_max: 3.0,
            brake_max: 6.0,
            coast_decel: 0.5,
            stop_distance: 6.0,
            activation_radius: 15.0,
            goal_radius: 2.0,
            offroute_bound: 4.0,
            lookahead_min: 3.0,
            lookahead_max: 8.0,
            lookahead_gain: 0.8,
            vehicle_half_extents: (2.2, 0.9),
            vehicle_height: 1.5,
            pedestrian_half_extents: (0.35, 0.35),
            pedestrian_height: 1.8,
            traffic_speed: 4.0,
            pedestrian_speed: 1.2,
        }
    }
}

impl SimParams {
    pub fn max_steer_rad(&self) -> f64 {
        self.max_steer_deg.to_radians()
    }

    pub fn steer_cap_rad(&self) -> f64 {
        self.steer_cap_deg.to_radians()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub pos: Vec2,
    /// Heading, wrapped to (-pi, pi]. Positive increments turn right.
    pub heading: f64,
    /// Forward speed, m/s, never negative.
    pub speed: f64,
    pub yaw_rate: f64,
    pub half_extents: (f64, f64),
}

impl VehicleState {
    pub fn at_pose(pos: Vec2, heading: f64, half_extents: (f64, f64)) -> Self {
        Self {
            pos,
            heading: wrap_angle(heading),
            speed: 0.0,
            yaw_rate: 0.0,
            half_extents,
        }
    }

    pub fn obb(&self) -> Obb {
        Obb {
            center: self.pos,
            heading: self.heading,
            half_extents: self.half_extents,
        }
    }
}

/// Ego actuation for one step. Values outside the declared ranges are
/// clamped, never rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoControls {
    pub steer_norm: f64,
    pub throttle: f64,
    pub brake: f64,
}

impl EgoControls {
    pub fn new(steer_norm: f64, throttle: f64, brake: f64) -> Self {
        Self {
            steer_norm: steer_norm.clamp(-1.0, 1.0),
            throttle: throttle.clamp(0.0, 1.0),
            brake: brake.clamp(0.0, 1.0),
        }
    }

    pub fn coast() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub time: f64,
    pub ego: VehicleState,
    pub traffic_vehicles: Vec<TrafficVehicle>,
    pub pedestrians: Vec<Pedestrian>,
    pub weather: WeatherParams,
    pub seed: u64,
    /// Generator for scripted traffic decisions; advancing it is part of the
    /// deterministic state evolution.
    pub rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionReport {
    None,
    EgoVsAgent,
    EgoOffRoad,
}

/// Place the ego, scripted vehicles and pedestrians on the map without
/// initial overlap. Deterministic in `seed`.
pub fn spawn_scenario(
    map: &TownMap,
    params: &SimParams,
    n_vehicles: usize,
    n_pedestrians: usize,
    weather: WeatherParams,
    seed: u64,
) -> Result<WorldState, SimError> {
    let spacing = 4.0 * params.vehicle_half_extents.0;
    let capacity = (map.total_road_lane_length() / spacing) as usize;
    if n_vehicles > capacity {
        return Err(SimError::PlacementInfeasible {
            requested: n_vehicles,
            capacity,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let road_lanes: Vec<LaneId> = map.road_lane_ids().collect();

    // Default ego pose: start of the first road lane. Episode runners move
    // the ego to their route start afterwards.
    let ego_lane = &map.lanes[road_lanes[0]];
    let mut ego = VehicleState::at_pose(
        ego_lane.start(),
        ego_lane.heading_at_start(),
        params.vehicle_half_extents,
    );
    ego.yaw_rate = 0.0;

    let mut vehicles: Vec<TrafficVehicle> = Vec::with_capacity(n_vehicles);
    let mut attempts = 0usize;
    let max_attempts = 200 * (n_vehicles + 1);
    while vehicles.len() < n_vehicles {
        if attempts > max_attempts {
            return Err(SimError::PlacementInfeasible {
                requested: n_vehicles,
                capacity,
            });
        }
        attempts += 1;
        let lane_id = road_lanes[rng.random_range(0..road_lanes.len())];
        let lane = &map.lanes[lane_id];
        let margin = params.vehicle_half_extents.0 + 0.5;
        if lane.length <= 2.0 * margin {
            continue;
        }
        let s = rng.random_range(margin..lane.length - margin);
        let candidate = traffic::vehicle_at(map, params, lane_id, s);
        let cand_obb = candidate.state.obb();
        let clear = !cand_obb.overlaps(&ego.obb())
            && vehicles.iter().all(|v| {
                !cand_obb.overlaps(&v.state.obb())
                    && (v.lane != lane_id || (v.s - s).abs() > spacing)
            });
        if clear {
            vehicles.push(candidate);
        }
    }

    let mut pedestrians = Vec::with_capacity(n_pedestrians);
    for _ in 0..n_pedestrians {
        pedestrians.push(traffic::spawn_pedestrian(map, params, &mut rng));
    }

    Ok(WorldState {
        time: 0.0,
        ego,
        traffic_vehicles: vehicles,
        pedestrians,
        weather,
        seed,
        rng,
    })
}

/// Advance the world by `dt`. The ego follows bicycle kinematics; scripted
/// agents follow their own policies. Pure in the sense that the input state
/// is untouched.
pub fn step(
    map: &TownMap,
    params: &SimParams,
    state: &WorldState,
    controls: EgoControls,
    dt: f64,
) -> WorldState {
    assert!(dt > 0.0, "dt must be positive");
    let controls = EgoControls::new(controls.steer_norm, controls.throttle, controls.brake);
    let mut next = state.clone();

    let ego = &mut next.ego;
    let steer_rad = (controls.steer_norm * params.max_steer_rad())
        .clamp(-params.steer_cap_rad(), params.steer_cap_rad());
    let v = ego.speed;
    ego.pos.x += v * ego.heading.cos() * dt;
    ego.pos.y += v * ego.heading.sin() * dt;
    let dtheta = v / params.wheelbase * steer_rad.tan() * dt;
    ego.heading = wrap_angle(ego.heading + dtheta);
    ego.yaw_rate = dtheta / dt;
    let accel =
        controls.throttle * params.accel_max - controls.brake * params.brake_max - params.coast_decel;
    ego.speed = (v + accel * dt).clamp(0.0, params.v_max);

    traffic::step_agents(map, params, &mut next, dt);
    next.time = state.time + dt;
    next
}

/// Oriented-box overlap against every agent, then the paved-region test.
/// Agent contact wins when both conditions hold at once.
pub fn check_collision(map: &TownMap, state: &WorldState) -> CollisionReport {
    let ego = state.ego.obb();
    let agent_hit = state
        .traffic_vehicles
        .iter()
        .map(|v| v.state.obb())
        .chain(state.pedestrians.iter().map(|p| p.state.obb()))
        .any(|b| ego.overlaps(&b));
    if agent_hit {
        return CollisionReport::EgoVsAgent;
    }
    if !map.on_road(state.ego.pos) {
        return CollisionReport::EgoOffRoad;
    }
    CollisionReport::None
}
