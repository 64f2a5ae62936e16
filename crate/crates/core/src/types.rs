//! Shared domain types used across the world, data pipeline, network and
//! benchmark harness.

use serde::{Deserialize, Serialize};

/// High-level navigational command issued by the route planner. Acts as the
/// branch switch of the conditional driving policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavCommand {
    Straight,
    LaneFollow,
    TurnRight,
    TurnLeft,
}

impl NavCommand {
    pub const ALL: [NavCommand; 4] = [
        NavCommand::Straight,
        NavCommand::LaneFollow,
        NavCommand::TurnRight,
        NavCommand::TurnLeft,
    ];

    /// Stable branch index: straight=0, lane_follow=1, turn_right=2, turn_left=3.
    pub fn branch_index(self) -> usize {
        match self {
            NavCommand::Straight => 0,
            NavCommand::LaneFollow => 1,
            NavCommand::TurnRight => 2,
            NavCommand::TurnLeft => 3,
        }
    }

    pub fn from_branch_index(i: usize) -> Option<Self> {
        NavCommand::ALL.get(i).copied().filter(|c| c.branch_index() == i)
    }

    pub fn name(self) -> &'static str {
        match self {
            NavCommand::Straight => "straight",
            NavCommand::LaneFollow => "lane_follow",
            NavCommand::TurnRight => "turn_right",
            NavCommand::TurnLeft => "turn_left",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        NavCommand::ALL.iter().copied().find(|c| c.name() == s)
    }
}

impl std::fmt::Display for NavCommand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Low-level action pair produced by the expert or the policy network.
/// `steer` is normalized to [-1, 1] (positive steers right); `speed` is the
/// desired speed normalized to [0, 1] (multiply by `v_max` for m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub steer: f64,
    pub speed: f64,
}

impl ControlCommand {
    pub fn new(steer: f64, speed: f64) -> Self {
        Self {
            steer: steer.clamp(-1.0, 1.0),
            speed: speed.clamp(0.0, 1.0),
        }
    }
}

/// Semantic classes produced by the renderer and predicted by the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticClass {
    Lane,
    RoadLine,
    Sidewalk,
    VehicleOrPedestrian,
    Other,
}

pub const N_SEMANTIC_CLASSES: usize = 5;

impl SemanticClass {
    pub const ALL: [SemanticClass; N_SEMANTIC_CLASSES] = [
        SemanticClass::Lane,
        SemanticClass::RoadLine,
        SemanticClass::Sidewalk,
        SemanticClass::VehicleOrPedestrian,
        SemanticClass::Other,
    ];

    pub fn id(self) -> u8 {
        match self {
            SemanticClass::Lane => 0,
            SemanticClass::RoadLine => 1,
            SemanticClass::Sidewalk => 2,
            SemanticClass::VehicleOrPedestrian => 3,
            SemanticClass::Other => 4,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        SemanticClass::ALL.get(id as usize).copied()
    }

    /// Base albedo used by the renderer before weather tinting.
    pub fn base_color(self) -> [f64; 3] {
        match self {
            SemanticClass::Lane => [0.26, 0.26, 0.29],
            SemanticClass::RoadLine => [0.92, 0.92, 0.86],
            SemanticClass::Sidewalk => [0.56, 0.52, 0.46],
            SemanticClass::VehicleOrPedestrian => [0.62, 0.18, 0.16],
            SemanticClass::Other => [0.22, 0.48, 0.26],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_indices_are_stable() {
        assert_eq!(NavCommand::Straight.branch_index(), 0);
        assert_eq!(NavCommand::LaneFollow.branch_index(), 1);
        assert_eq!(NavCommand::TurnRight.branch_index(), 2);
        assert_eq!(NavCommand::TurnLeft.branch_index(), 3);
        for c in NavCommand::ALL {
            assert_eq!(NavCommand::from_branch_index(c.branch_index()), Some(c));
            assert_eq!(NavCommand::parse(c.name()), Some(c));
        }
    }

    #[test]
    fn semantic_ids_cover_0_to_4() {
        for (i, c) in SemanticClass::ALL.iter().enumerate() {
            assert_eq!(c.id() as usize, i);
            assert_eq!(SemanticClass::from_id(c.id()), Some(*c));
        }
    }

    #[test]
    fn control_command_clamps() {
        let c = ControlCommand::new(-3.0, 7.0);
        assert_eq!(c.steer, -1.0);
        assert_eq!(c.speed, 1.0);
    }
}
