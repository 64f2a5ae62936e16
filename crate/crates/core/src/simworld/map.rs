//! Town maps: a lane graph over a block grid with intersection connectors.
//!
//! Towns are generated procedurally from a fixed seed. Roads run between
//! grid nodes; every road carries one lane per direction, offset to the
//! right of travel. Inside each intersection, connector lanes (straight
//! segments or quarter arcs) join incoming lanes to outgoing ones, labelled
//! with the turn geometry.

use crate::geom::{
    point_polyline_distance, point_segment_distance, wrap_angle, Vec2,
};
use crate::types::SemanticClass;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TownId {
    TrainTown,
    TestTown,
}

impl TownId {
    pub fn name(self) -> &'static str {
        match self {
            TownId::TrainTown => "train_town",
            TownId::TestTown => "test_town",
        }
    }
}

impl std::fmt::Display for TownId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Geometric turn relation between an entry and exit road at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Straight,
    Right,
    Left,
}

pub type LaneId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneKind {
    /// Lane along a road between two intersections.
    Road,
    /// Connector inside an intersection.
    Connector { turn: TurnKind },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lane {
    pub id: LaneId,
    pub kind: LaneKind,
    pub polyline: Vec<Vec2>,
    pub length: f64,
    /// Node the lane leads into (road lanes) or sits inside (connectors).
    pub node: usize,
    pub successors: Vec<LaneId>,
}

impl Lane {
    pub fn start(&self) -> Vec2 {
        self.polyline[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.polyline.last().unwrap()
    }

    pub fn heading_at_start(&self) -> f64 {
        (self.polyline[1] - self.polyline[0]).heading()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Intersection {
    pub node: usize,
    pub center: Vec2,
    /// Number of roads meeting at this node.
    pub n_exits: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TownMap {
    pub town_id: TownId,
    pub lane_width: f64,
    /// Paved margin beyond the outer lane edge, still on-road.
    pub shoulder_width: f64,
    /// Sidewalk band measured from the lane edge: `(from, to)` offsets.
    pub sidewalk_band: (f64, f64),
    /// Half-size of the square paved apron around each node.
    pub node_half: f64,
    pub node_centers: Vec<Vec2>,
    /// Road axes as node index pairs (undirected).
    pub roads: Vec<(usize, usize)>,
    pub lanes: Vec<Lane>,
    pub intersections: Vec<Intersection>,
}

impl TownMap {
    /// Full road width from the axis to the outer lane edge.
    pub fn road_half_width(&self) -> f64 {
        self.lane_width
    }

    pub fn road_lane_ids(&self) -> impl Iterator<Item = LaneId> + '_ {
        self.lanes
            .iter()
            .filter(|l| l.kind == LaneKind::Road)
            .map(|l| l.id)
    }

    pub fn total_road_lane_length(&self) -> f64 {
        self.lanes
            .iter()
            .filter(|l| l.kind == LaneKind::Road)
            .map(|l| l.length)
            .sum()
    }

    /// Distance from a point to the nearest road axis, ignoring node aprons.
    fn distance_to_road_axis(&self, p: Vec2) -> f64 {
        let mut best = f64::INFINITY;
        for &(a, b) in &self.roads {
            let (d, _) = point_segment_distance(p, self.node_centers[a], self.node_centers[b]);
            best = best.min(d);
        }
        best
    }

    fn in_node_apron(&self, p: Vec2, margin: f64) -> bool {
        self.node_centers.iter().any(|c| {
            (p.x - c.x).abs() <= self.node_half + margin && (p.y - c.y).abs() <= self.node_half + margin
        })
    }

    /// Whether a point is on the paved region (road, apron or shoulder).
    pub fn on_road(&self, p: Vec2) -> bool {
        self.in_node_apron(p, self.shoulder_width)
            || self.distance_to_road_axis(p) <= self.road_half_width() + self.shoulder_width
    }

    /// Ground-truth class of a ground point. Order matters: node aprons
    /// suppress lane markings, then road stripes, then sidewalk bands.
    pub fn classify_ground(&self, p: Vec2) -> SemanticClass {
        if self.in_node_apron(p, 0.0) {
            return SemanticClass::Lane;
        }
        let d = self.distance_to_road_axis(p);
        let w = self.road_half_width();
        const CENTER_LINE_HW: f64 = 0.15;
        const EDGE_LINE_W: f64 = 0.24;
        if d <= w {
            if d <= CENTER_LINE_HW || d >= w - EDGE_LINE_W {
                return SemanticClass::RoadLine;
            }
            return SemanticClass::Lane;
        }
        if d <= w + self.shoulder_width {
            return SemanticClass::Lane;
        }
        let (from, to) = self.sidewalk_band;
        if d > w + from && d <= w + to {
            return SemanticClass::Sidewalk;
        }
        // Sidewalk also wraps the intersection corners.
        if self.in_node_apron(p, to) {
            return SemanticClass::Sidewalk;
        }
        SemanticClass::Other
    }

    /// Nearest road lane to a point, with its arc position, filtered by an
    /// optional heading tolerance.
    pub fn nearest_road_lane(&self, p: Vec2, heading: Option<f64>) -> Option<(LaneId, f64, f64)> {
        let mut best: Option<(LaneId, f64, f64)> = None;
        for lane in &self.lanes {
            if lane.kind != LaneKind::Road {
                continue;
            }
            let (d, seg, s) = point_polyline_distance(p, &lane.polyline);
            if let Some(h) = heading {
                let seg_h = (lane.polyline[seg + 1] - lane.polyline[seg]).heading();
                if wrap_angle(seg_h - h).abs() > std::f64::consts::FRAC_PI_2 {
                    continue;
                }
            }
            if best.map_or(true, |(_, bd, _)| d < bd) {
                best = Some((lane.id, d, s));
            }
        }
        best
    }
}

/// Layout parameters for the procedural generator.
struct GridSpec {
    town_id: TownId,
    cols: usize,
    rows: usize,
    block_x: f64,
    block_y: f64,
    /// Road (node pairs, by grid coordinate) removed to break the full grid.
    removed: Vec<((usize, usize), (usize, usize))>,
}

pub fn build_town(town_id: TownId) -> TownMap {
    // Layouts are fixed by hand per town so segment and intersection counts
    // differ between the two.
    let spec = match town_id {
        TownId::TrainTown => GridSpec {
            town_id,
            cols: 4,
            rows: 4,
            block_x: 60.0,
            block_y: 52.0,
            removed: vec![((1, 1), (2, 1)), ((2, 2), (2, 3))],
        },
        TownId::TestTown => GridSpec {
            town_id,
            cols: 4,
            rows: 3,
            block_x: 48.0,
            block_y: 66.0,
            removed: vec![((1, 0), (1, 1))],
        },
    };
    build_from_grid(&spec)
}

fn build_from_grid(spec: &GridSpec) -> TownMap {
    let lane_width = 3.5;
    let node_half = 6.0;
    let node_index = |c: usize, r: usize| r * spec.cols + c;

    let mut node_centers = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            node_centers.push(Vec2::new(c as f64 * spec.block_x, r as f64 * spec.block_y));
        }
    }

    let removed: Vec<(usize, usize)> = spec
        .removed
        .iter()
        .map(|&((c0, r0), (c1, r1))| (node_index(c0, r0), node_index(c1, r1)))
        .collect();
    let is_removed = |a: usize, b: usize| {
        removed
            .iter()
            .any(|&(x, y)| (x, y) == (a, b) || (y, x) == (a, b))
    };

    let mut roads = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let a = node_index(c, r);
            if c + 1 < spec.cols {
                let b = node_index(c + 1, r);
                if !is_removed(a, b) {
                    roads.push((a, b));
                }
            }
            if r + 1 < spec.rows {
                let b = node_index(c, r + 1);
                if !is_removed(a, b) {
                    roads.push((a, b));
                }
            }
        }
    }

    let mut map = TownMap {
        town_id: spec.town_id,
        lane_width,
        shoulder_width: 0.3,
        sidewalk_band: (0.3, 2.3),
        node_half,
        node_centers,
        roads,
        lanes: Vec::new(),
        intersections: Vec::new(),
    };
    build_lanes(&mut map);
    map
}

/// One directed road lane: from the apron edge of `from` to the apron edge
/// of `to`, offset half a lane to the right of travel.
fn road_lane_polyline(map: &TownMap, from: usize, to: usize) -> Vec<Vec2> {
    let a = map.node_centers[from];
    let b = map.node_centers[to];
    let dir = (b - a).normalized();
    let right = dir.right_normal();
    let offset = right.scale(map.lane_width / 2.0);
    let start = a + dir.scale(map.node_half) + offset;
    let end = b + dir.scale(-map.node_half) + offset;
    vec![start, end]
}

/// Connector polyline inside a node, from the end of the incoming lane to
/// the start of the outgoing one. Straight crossings get a line; turns get
/// a quarter arc.
fn connector_polyline(entry: Vec2, entry_h: f64, exit: Vec2, exit_h: f64) -> Vec<Vec2> {
    let dh = wrap_angle(exit_h - entry_h);
    if dh.abs() < 1e-6 {
        return vec![entry, exit];
    }
    // Arc center: intersection of the normals at entry and exit.
    let n_entry = Vec2::from_heading(entry_h).right_normal();
    // Solve entry + t * n_entry = center with |center-exit| = |t|.
    // For 90-degree grid turns the center is where entry/exit tangent lines
    // cross their perpendiculars; derive it from line intersection.
    let d_exit = Vec2::from_heading(exit_h);
    // Center lies on entry normal line and exit normal line.
    // entry + s*n_entry = exit + u*n_exit  => solve 2x2.
    let n_exit = d_exit.right_normal();
    let det = n_entry.x * (-n_exit.y) - (-n_exit.x) * n_entry.y;
    if det.abs() < 1e-9 {
        return vec![entry, exit];
    }
    let rhs = exit - entry;
    let s = (rhs.x * (-n_exit.y) - (-n_exit.x) * rhs.y) / det;
    let center = entry + n_entry.scale(s);
    let r = s; // signed: positive = center to the right = right turn
    let a0 = (entry - center).heading();
    let a1 = (exit - center).heading();
    let mut sweep = wrap_angle(a1 - a0);
    // The sweep direction must match the turn direction.
    if r > 0.0 && sweep < 0.0 {
        sweep += crate::geom::TAU;
    } else if r < 0.0 && sweep > 0.0 {
        sweep -= crate::geom::TAU;
    }
    let n_pts = 8;
    let mut pts = Vec::with_capacity(n_pts + 1);
    let radius = r.abs();
    for i in 0..=n_pts {
        let a = a0 + sweep * i as f64 / n_pts as f64;
        pts.push(center + Vec2::from_heading(a).scale(radius));
    }
    // Snap the end points exactly.
    pts[0] = entry;
    *pts.last_mut().unwrap() = exit;
    pts
}

fn build_lanes(map: &mut TownMap) {
    #[derive(Clone, Copy)]
    struct DirectedRoad {
        from: usize,
        to: usize,
    }

    let mut directed = Vec::new();
    for &(a, b) in &map.roads {
        directed.push(DirectedRoad { from: a, to: b });
        directed.push(DirectedRoad { from: b, to: a });
    }

    // Road lanes first; remember, per directed road, its lane id.
    let mut lanes: Vec<Lane> = Vec::new();
    let mut lane_of_directed = Vec::new();
    for d in &directed {
        let polyline = road_lane_polyline(map, d.from, d.to);
        let length = crate::geom::polyline_length(&polyline);
        let id = lanes.len();
        lanes.push(Lane {
            id,
            kind: LaneKind::Road,
            polyline,
            length,
            node: d.to,
            successors: Vec::new(),
        });
        lane_of_directed.push(id);
    }

    // Node degree = number of roads touching the node.
    let mut degree = vec![0usize; map.node_centers.len()];
    for &(a, b) in &map.roads {
        degree[a] += 1;
        degree[b] += 1;
    }

    // Connectors: for each pair (incoming directed road at node, outgoing
    // directed road at node) excluding U-turns.
    for (i, d_in) in directed.iter().enumerate() {
        let node = d_in.to;
        let in_lane = lane_of_directed[i];
        let entry = lanes[in_lane].end();
        let entry_h = {
            let pl = &lanes[in_lane].polyline;
            (pl[pl.len() - 1] - pl[pl.len() - 2]).heading()
        };
        for (j, d_out) in directed.iter().enumerate() {
            if d_out.from != node || d_out.to == d_in.from {
                continue;
            }
            let out_lane = lane_of_directed[j];
            let exit = lanes[out_lane].start();
            let exit_h = lanes[out_lane].heading_at_start();
            let dh = wrap_angle(exit_h - entry_h);
            let turn = if dh.abs() < 0.3 {
                TurnKind::Straight
            } else if dh > 0.0 {
                TurnKind::Right
            } else {
                TurnKind::Left
            };
            let polyline = connector_polyline(entry, entry_h, exit, exit_h);
            let length = crate::geom::polyline_length(&polyline);
            let id = lanes.len();
            lanes.push(Lane {
                id,
                kind: LaneKind::Connector { turn },
                polyline,
                length,
                node,
                successors: vec![out_lane],
            });
            lanes[in_lane].successors.push(id);
        }
    }

    map.intersections = degree
        .iter()
        .enumerate()
        .filter(|&(_, &d)| d >= 2)
        .map(|(node, &d)| Intersection {
            node,
            center: map.node_centers[node],
            n_exits: d,
        })
        .collect();
    map.lanes = lanes;
}

/// Effective navigational label of a connector crossing: geometric straights
/// at 2-road nodes are plain lane following (there is no route decision),
/// everything else maps to its turn geometry.
pub fn crossing_command(map: &TownMap, lane: &Lane) -> crate::types::NavCommand {
    use crate::types::NavCommand;
    match lane.kind {
        LaneKind::Road => NavCommand::LaneFollow,
        LaneKind::Connector { turn } => {
            let degree = map
                .intersections
                .iter()
                .find(|i| i.node == lane.node)
                .map(|i| i.n_exits)
                .unwrap_or(0);
            match turn {
                TurnKind::Straight if degree <= 2 => NavCommand::LaneFollow,
                TurnKind::Straight => NavCommand::Straight,
                TurnKind::Right => NavCommand::TurnRight,
                TurnKind::Left => NavCommand::TurnLeft,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn towns_differ_in_layout() {
        let train = build_town(TownId::TrainTown);
        let test = build_town(TownId::TestTown);
        assert_ne!(train.roads.len(), test.roads.len());
        assert_ne!(train.intersections.len(), test.intersections.len());
        assert_ne!(train.lanes.len(), test.lanes.len());
    }

    #[test]
    fn every_intersection_has_two_or_more_exits() {
        for town in [TownId::TrainTown, TownId::TestTown] {
            let map = build_town(town);
            for i in &map.intersections {
                assert!(i.n_exits >= 2, "node {} has {} exits", i.node, i.n_exits);
            }
            // All grid nodes should remain proper intersections.
            assert_eq!(map.intersections.len(), map.node_centers.len());
        }
    }

    #[test]
    fn lanes_connect_end_to_start() {
        let map = build_town(TownId::TrainTown);
        for lane in &map.lanes {
            for &succ in &lane.successors {
                let next = &map.lanes[succ];
                let gap = lane.end().dist(next.start());
                assert!(gap < 1e-9, "lane {} -> {} gap {}", lane.id, succ, gap);
            }
            assert!(lane.length > 0.0);
            if lane.kind == LaneKind::Road {
                assert!(!lane.successors.is_empty(), "road lane {} dead-ends", lane.id);
            }
        }
    }

    #[test]
    fn ground_classification_bands() {
        let map = build_town(TownId::TrainTown);
        // Mid-block on the horizontal road from node 0 to node 1 (y = 0).
        let x = 30.0;
        assert_eq!(map.classify_ground(Vec2::new(x, 0.0)), SemanticClass::RoadLine); // center line
        assert_eq!(map.classify_ground(Vec2::new(x, 1.75)), SemanticClass::Lane);
        assert_eq!(map.classify_ground(Vec2::new(x, 3.45)), SemanticClass::RoadLine); // edge line
        assert_eq!(map.classify_ground(Vec2::new(x, 4.5)), SemanticClass::Sidewalk);
        assert_eq!(map.classify_ground(Vec2::new(x, 9.0)), SemanticClass::Other);
        assert!(map.on_road(Vec2::new(x, 3.7)));
        assert!(!map.on_road(Vec2::new(x, 4.5)));
    }

    #[test]
    fn connectors_are_labelled_by_geometry() {
        let map = build_town(TownId::TrainTown);
        let mut saw = std::collections::HashSet::new();
        for lane in &map.lanes {
            if let LaneKind::Connector { turn } = lane.kind {
                saw.insert(turn);
                let h_in = lane.heading_at_start();
                let pl = &lane.polyline;
                let h_out = (pl[pl.len() - 1] - pl[pl.len() - 2]).heading();
                let dh = wrap_angle(h_out - h_in);
                match turn {
                    TurnKind::Straight => assert!(dh.abs() < 0.3),
                    TurnKind::Right => assert!(dh > 0.0),
                    TurnKind::Left => assert!(dh < 0.0),
                }
            }
        }
        assert!(saw.contains(&TurnKind::Straight));
        assert!(saw.contains(&TurnKind::Right));
        assert!(saw.contains(&TurnKind::Left));
    }
}
