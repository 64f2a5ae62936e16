//! Benchmark protocol description and deterministic route enumeration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use super::BenchError;
use crate::simworld::route::{from_lane_path, RouteSpec};
use crate::simworld::{LaneId, LaneKind, SimParams, TownId, TownMap, TurnKind};
use crate::simworld::weather::{TESTING_WEATHERS, TRAINING_WEATHERS};

/// Timeout convention: allowed time = route length at this reference speed.
pub const TIMEOUT_SPEED_KMH: f64 = 10.0;

pub fn allowed_time(route_length: f64) -> f64 {
    route_length / (TIMEOUT_SPEED_KMH / 3.6)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchStyle {
    Corl2017,
    Nocrash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Straight,
    OneTurn,
    Navigation,
    NavDynamic,
    Empty,
    Regular,
    Dense,
}

/// Shape constraint on a task's routes, measured in turn commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteProfile {
    /// No left/right turns (straight-through crossings allowed).
    NoTurns,
    /// Exactly one turn.
    SingleTurn,
    /// At least two turns.
    MultiTurn,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Straight => "straight",
            Task::OneTurn => "one_turn",
            Task::Navigation => "navigation",
            Task::NavDynamic => "nav_dynamic",
            Task::Empty => "empty",
            Task::Regular => "regular",
            Task::Dense => "dense",
        }
    }

    pub fn style(self) -> BenchStyle {
        match self {
            Task::Straight | Task::OneTurn | Task::Navigation | Task::NavDynamic => {
                BenchStyle::Corl2017
            }
            Task::Empty | Task::Regular | Task::Dense => BenchStyle::Nocrash,
        }
    }

    pub fn profile(self) -> RouteProfile {
        match self {
            Task::Straight => RouteProfile::NoTurns,
            Task::OneTurn => RouteProfile::SingleTurn,
            _ => RouteProfile::MultiTurn,
        }
    }

    /// (vehicles, pedestrians) placed for this task.
    pub fn traffic(self) -> (usize, usize) {
        match self {
            Task::Straight | Task::OneTurn | Task::Navigation | Task::Empty => (0, 0),
            Task::NavDynamic | Task::Regular => (10, 5),
            Task::Dense => (25, 15),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub style: BenchStyle,
    pub town: TownId,
    pub tasks: Vec<Task>,
    /// Weather names; every route runs under every listed weather.
    pub weathers: Vec<String>,
    pub repetitions: usize,
    /// One base seed per repetition.
    pub seeds: Vec<u64>,
    pub routes_per_task: usize,
    /// Seed for route enumeration (shared by all repetitions).
    pub route_seed: u64,
    /// Equal-time samples per trajectory for the RMSE metric.
    pub trajectory_samples: usize,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec::corl2017(TownId::TrainTown)
    }
}

/// The four driving-condition weathers seen during training.
pub fn training_weathers() -> Vec<String> {
    TRAINING_WEATHERS.iter().map(|s| s.to_string()).collect()
}

/// Two held-out weathers for generalization runs.
pub fn testing_weathers() -> Vec<String> {
    TESTING_WEATHERS[..2].iter().map(|s| s.to_string()).collect()
}

impl BenchmarkSpec {
    pub fn corl2017(town: TownId) -> Self {
        BenchmarkSpec {
            style: BenchStyle::Corl2017,
            town,
            tasks: vec![Task::Straight, Task::OneTurn, Task::Navigation, Task::NavDynamic],
            weathers: training_weathers(),
            repetitions: 3,
            seeds: vec![11, 22, 33],
            routes_per_task: 25,
            route_seed: 17,
            trajectory_samples: 100,
        }
    }

    pub fn nocrash(town: TownId) -> Self {
        BenchmarkSpec {
            style: BenchStyle::Nocrash,
            tasks: vec![Task::Empty, Task::Regular, Task::Dense],
            ..BenchmarkSpec::corl2017(town)
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.tasks.is_empty() {
            return Err(BenchError::InvalidSpec("no tasks".into()));
        }
        for t in &self.tasks {
            if t.style() != self.style {
                return Err(BenchError::InvalidSpec(format!(
                    "task {t} does not belong to the {:?} protocol",
                    self.style
                )));
            }
        }
        if self.weathers.is_empty() {
            return Err(BenchError::InvalidSpec("no weathers".into()));
        }
        for w in &self.weathers {
            if crate::simworld::WeatherParams::by_name(w).is_none() {
                return Err(BenchError::UnknownWeather(w.clone()));
            }
        }
        if self.repetitions == 0 || self.seeds.len() != self.repetitions {
            return Err(BenchError::InvalidSpec(format!(
                "need one seed per repetition ({} seeds, {} repetitions)",
                self.seeds.len(),
                self.repetitions
            )));
        }
        if self.routes_per_task == 0 || self.trajectory_samples < 2 {
            return Err(BenchError::InvalidSpec(
                "routes_per_task and trajectory_samples must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Bounds for enumerated benchmark routes, meters.
const MIN_ROUTE_LEN: f64 = 30.0;
const MAX_ROUTE_LANES: usize = 24;

/// Enumerate `n` distinct routes matching `profile` by seeded random walks
/// over the lane graph. Deterministic in `seed`.
pub fn generate_routes(
    map: &TownMap,
    params: &SimParams,
    profile: RouteProfile,
    n: usize,
    seed: u64,
) -> Result<Vec<RouteSpec>, BenchError> {
    let road_ids: Vec<LaneId> = map.road_lane_ids().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<LaneId>> = HashSet::new();
    let mut routes = Vec::with_capacity(n);
    let max_attempts = 600 * n;
    for _ in 0..max_attempts {
        if routes.len() == n {
            break;
        }
        let Some(path) = walk(map, &road_ids, profile, &mut rng) else {
            continue;
        };
        if seen.contains(&path) {
            continue;
        }
        let route = from_lane_path(map, params, path.clone())?;
        if route.length < MIN_ROUTE_LEN {
            continue;
        }
        let ok = match profile {
            RouteProfile::NoTurns => route.turn_count() == 0,
            RouteProfile::SingleTurn => route.turn_count() == 1,
            RouteProfile::MultiTurn => route.turn_count() >= 2,
        };
        if !ok {
            continue;
        }
        seen.insert(path);
        routes.push(route);
    }
    if routes.len() < n {
        return Err(BenchError::RouteGeneration(format!(
            "found only {} of {} routes for {:?} in {}",
            routes.len(),
            n,
            profile,
            map.town_id
        )));
    }
    Ok(routes)
}

/// One random walk: road lane, then alternate connector/road hops, steering
/// the turn budget toward the profile. Returns None when the walk dead-ends.
fn walk(
    map: &TownMap,
    road_ids: &[LaneId],
    profile: RouteProfile,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<LaneId>> {
    let want_turns = match profile {
        RouteProfile::NoTurns => 0,
        RouteProfile::SingleTurn => 1,
        RouteProfile::MultiTurn => 2 + rng.random_range(0..2),
    };
    let mut path = vec![road_ids[rng.random_range(0..road_ids.len())]];
    let mut turns = 0usize;
    while path.len() < MAX_ROUTE_LANES {
        let lane = *path.last().unwrap();
        if turns >= want_turns && rng.random_range(0..3) == 0 {
            break;
        }
        // Split this road lane's outgoing connectors by turn kind.
        let mut straight = Vec::new();
        let mut turning = Vec::new();
        for &c in &map.lanes[lane].successors {
            if let LaneKind::Connector { turn } = map.lanes[c].kind {
                match turn {
                    TurnKind::Straight => straight.push(c),
                    TurnKind::Left | TurnKind::Right => turning.push(c),
                }
            }
        }
        let pool = if turns < want_turns {
            // Still owe turns: take one when available, half the time.
            if !turning.is_empty() && (straight.is_empty() || rng.random_range(0..2) == 0) {
                &turning
            } else {
                &straight
            }
        } else {
            &straight
        };
        if pool.is_empty() {
            break;
        }
        let connector = pool[rng.random_range(0..pool.len())];
        if let LaneKind::Connector { turn } = map.lanes[connector].kind {
            if turn != TurnKind::Straight {
                turns += 1;
            }
        }
        let next_road = *map.lanes[connector]
            .successors
            .iter()
            .find(|&&r| matches!(map.lanes[r].kind, LaneKind::Road))?;
        path.push(connector);
        path.push(next_road);
    }
    (turns == want_turns || (profile == RouteProfile::MultiTurn && turns >= 2)).then_some(path)
}
