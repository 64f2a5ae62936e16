//! Closed-loop episode recording: the expert drives, steering noise is
//! injected into the actuation only, and every frame stores the expert's
//! commands as ground truth.

use super::noise::NoiseSchedule;
use super::sample::{EpisodeMeta, FrameRecord, Sample};
use super::DataError;
use crate::control::{PidConfig, SpeedPid};
use crate::simworld::autopilot::expert_decision;
use crate::simworld::render::render_observation;
use crate::simworld::route::RouteSpec;
use crate::simworld::{
    spawn_scenario, step, CameraConfig, EgoControls, SimError, SimParams, TownMap, VehicleState,
    WeatherParams,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSettings {
    pub dt: f64,
    pub max_steps: usize,
    pub n_vehicles: usize,
    pub n_pedestrians: usize,
    pub pid: PidConfig,
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        Self {
            dt: 0.1,
            max_steps: 2000,
            n_vehicles: 0,
            n_pedestrians: 0,
            pid: PidConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectOutcome {
    pub n_frames: usize,
    pub reached_goal: bool,
    /// Why the episode stopped early, if it did.
    pub truncation: Option<String>,
}

impl CollectOutcome {
    pub fn meta(
        &self,
        map: &TownMap,
        weather: &WeatherParams,
        route: &RouteSpec,
        settings: &EpisodeSettings,
        seed: u64,
    ) -> EpisodeMeta {
        EpisodeMeta {
            town: map.town_id,
            weather: weather.name.clone(),
            seed,
            n_frames: self.n_frames,
            reached_goal: self.reached_goal,
            truncation: self.truncation.clone(),
            route_length: route.length,
            n_vehicles: settings.n_vehicles,
            n_pedestrians: settings.n_pedestrians,
        }
    }
}

/// Drive `route` with the expert and feed one `Sample` per frame to
/// `sink`. Noise perturbs only the executed steering; an off-route abort
/// truncates the episode and keeps the frames recorded so far.
pub fn record_episode(
    map: &TownMap,
    params: &SimParams,
    camera: &CameraConfig,
    route: &RouteSpec,
    weather: WeatherParams,
    noise: Option<&NoiseSchedule>,
    settings: &EpisodeSettings,
    seed: u64,
    mut sink: impl FnMut(Sample) -> Result<(), DataError>,
) -> Result<CollectOutcome, DataError> {
    let mut state = spawn_scenario(
        map,
        params,
        settings.n_vehicles,
        settings.n_pedestrians,
        weather,
        seed,
    )?;
    let (pos, heading) = route.start_pose();
    state.ego = VehicleState::at_pose(pos, heading, params.vehicle_half_extents);
    let mut pid = SpeedPid::new(settings.pid);

    let mut n_frames = 0usize;
    let mut reached_goal = false;
    let mut truncation = None;

    for k in 0..settings.max_steps {
        let t = k as f64 * settings.dt;
        let decision = match expert_decision(map, params, route, &state) {
            Ok(d) => d,
            Err(e @ SimError::OffRoute { .. }) => {
                truncation = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e.into()),
        };
        if decision.at_goal {
            reached_goal = true;
            break;
        }

        let (noise_value, noise_flag) = match noise {
            Some(schedule) => schedule.sample(t, seed),
            None => (0.0, false),
        };
        let executed = (decision.steer_norm + noise_value).clamp(-1.0, 1.0);
        let (throttle, brake) = pid.update(decision.target_speed, state.ego.speed, settings.dt);

        let obs = render_observation(map, params, camera, &state);
        let record = FrameRecord {
            frame: k,
            timestamp: t,
            steer_gt: decision.steer_norm,
            speed_gt: decision.target_speed,
            steer_executed: executed,
            noise_flag,
            command: decision.command,
            measured_speed: state.ego.speed,
            pose: (state.ego.pos.x, state.ego.pos.y, state.ego.heading),
        };
        sink(Sample {
            rgb: Sample::quantize_rgb(&obs.rgb),
            depth: Sample::quantize_depth(&obs.depth),
            semantic: obs.semantic,
            record,
        })?;
        n_frames += 1;

        state = step(
            map,
            params,
            &state,
            EgoControls::new(executed, throttle, brake),
            settings.dt,
        );
    }

    if !reached_goal && truncation.is_none() {
        truncation = Some("max steps exceeded".to_string());
    }
    Ok(CollectOutcome {
        n_frames,
        reached_goal,
        truncation,
    })
}
