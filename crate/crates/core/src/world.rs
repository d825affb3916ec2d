//! The simulated world: fixed-step clock, lane graph, agents, static
//! obstacles, traffic controls, weather and the kinematic motion model.

use crate::geometry::{rect_distance, rects_overlap, Aabb, OrientedRect, Polyline, Pose2D, Vec2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_V_MAX: f64 = 25.0;
pub const DEFAULT_MAX_STEER: f64 = 0.6;
pub const DEFAULT_HALF_EXTENTS: (f64, f64) = (2.4, 1.0);
pub const DEFAULT_WHEELBASE: f64 = 2.5;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("spawn footprint overlaps agent {0}")]
    Overlap(AgentId),
    #[error("could not place {requested} agents after {attempts} attempts")]
    PlacementExhausted { requested: usize, attempts: usize },
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ego,
    Spectator,
    Rsu,
    Background,
    Pedestrian,
}

impl Role {
    /// Things a detector reports: vehicles and pedestrians. RSUs are poles.
    pub fn is_detectable(self) -> bool {
        !matches!(self, Role::Rsu)
    }

    pub fn occludes(self) -> bool {
        !matches!(self, Role::Rsu)
    }
}

/// Height class shared by sensor mounts and occluders. An elevated sensor
/// sees over ground-height occluders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Height {
    #[default]
    Ground,
    Elevated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub role: Role,
    pub pose: Pose2D,
    pub speed: f64,
    /// (half-length, half-width)
    pub half_extents: (f64, f64),
    pub mount_height: Height,
    pub wheelbase: f64,
}

impl AgentState {
    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::from_pose(&self.pose, self.half_extents)
    }
}

/// What to spawn at an explicit location.
#[derive(Debug, Clone, PartialEq)]
pub struct SpawnRequest {
    pub role: Role,
    pub pose: Pose2D,
    pub half_extents: (f64, f64),
    pub speed: f64,
    pub wheelbase: f64,
}

impl SpawnRequest {
    pub fn vehicle(role: Role, pose: Pose2D) -> Self {
        let half_extents = if role == Role::Rsu {
            (0.5, 0.5)
        } else {
            DEFAULT_HALF_EXTENTS
        };
        Self {
            role,
            pose,
            half_extents,
            speed: 0.0,
            wheelbase: DEFAULT_WHEELBASE,
        }
    }

    pub fn with_half_extents(mut self, half_extents: (f64, f64)) -> Self {
        self.half_extents = half_extents;
        self
    }

    pub fn with_speed(mut self, speed: f64) -> Self {
        self.speed = speed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub length: f64,
    pub lane: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: String,
    pub nodes: Vec<usize>,
    pub left: Option<String>,
    pub right: Option<String>,
}

/// Directed waypoint graph. Lanes own chains of nodes; extra connector
/// edges join lanes at junctions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaneGraph {
    nodes: Vec<Vec2>,
    edges: Vec<Edge>,
    lanes: Vec<Lane>,
    outgoing: Vec<Vec<usize>>,
}

impl LaneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, p: Vec2) -> usize {
        self.nodes.push(p);
        self.outgoing.push(Vec::new());
        self.nodes.len() - 1
    }

    /// Adds an edge whose length is the Euclidean node distance.
    pub fn add_edge(&mut self, from: usize, to: usize, lane: &str) -> usize {
        let length = self.nodes[from].distance(self.nodes[to]);
        self.edges.push(Edge {
            from,
            to,
            length,
            lane: lane.to_string(),
        });
        self.outgoing[from].push(self.edges.len() - 1);
        self.edges.len() - 1
    }

    /// Adds a lane as a chain of fresh nodes joined by forward edges.
    pub fn add_lane(&mut self, id: &str, points: &[Vec2]) -> Vec<usize> {
        let nodes: Vec<usize> = points.iter().map(|p| self.add_node(*p)).collect();
        for w in nodes.windows(2) {
            self.add_edge(w[0], w[1], id);
        }
        self.lanes.push(Lane {
            id: id.to_string(),
            nodes: nodes.clone(),
            left: None,
            right: None,
        });
        nodes
    }

    pub fn set_neighbors(&mut self, id: &str, left: Option<&str>, right: Option<&str>) {
        if let Some(lane) = self.lanes.iter_mut().find(|l| l.id == id) {
            lane.left = left.map(str::to_string);
            lane.right = right.map(str::to_string);
        }
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn node(&self, i: usize) -> Option<Vec2> {
        self.nodes.get(i).copied()
    }

    pub fn outgoing(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.outgoing
            .get(node)
            .into_iter()
            .flatten()
            .map(|&e| &self.edges[e])
    }

    pub fn lane(&self, id: &str) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id == id)
    }

    pub fn lane_polyline(&self, id: &str) -> Option<Polyline> {
        self.lane(id)
            .map(|l| Polyline::new(l.nodes.iter().map(|&n| self.nodes[n]).collect()))
    }

    /// Node index of point `index` along lane `id`.
    pub fn lane_node(&self, id: &str, index: usize) -> Option<usize> {
        self.lane(id).and_then(|l| l.nodes.get(index).copied())
    }

    /// Lane whose centerline passes closest to `p`, with its projection.
    pub fn nearest_lane(&self, p: Vec2) -> Option<(&Lane, crate::geometry::Projection)> {
        self.lanes
            .iter()
            .filter(|l| l.nodes.len() >= 2)
            .map(|l| {
                let line = Polyline::new(l.nodes.iter().map(|&n| self.nodes[n]).collect());
                let mut proj = line.project(p);
                // Clamp so points past the ends are measured to the end node.
                proj.station = proj.station.clamp(0.0, line.length());
                let foot = line.point_at(proj.station);
                (l, proj, foot.distance(p))
            })
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .map(|(l, proj, _)| (l, proj))
    }

    /// Checks edge references, edge lengths and lane simplicity.
    pub fn validate(&self) -> Result<(), String> {
        for (i, e) in self.edges.iter().enumerate() {
            let (Some(a), Some(b)) = (self.node(e.from), self.node(e.to)) else {
                return Err(format!("edge {i} references a missing node"));
            };
            if (a.distance(b) - e.length).abs() > 1e-9 {
                return Err(format!("edge {i} length does not match node distance"));
            }
            if e.length <= 0.0 {
                return Err(format!("edge {i} has zero length"));
            }
        }
        for lane in &self.lanes {
            let pts: Vec<Vec2> = lane.nodes.iter().map(|&n| self.nodes[n]).collect();
            for i in 0..pts.len().saturating_sub(1) {
                for j in (i + 2)..pts.len().saturating_sub(1) {
                    let d = crate::geometry::segment_segment_distance(
                        pts[i],
                        pts[i + 1],
                        pts[j],
                        pts[j + 1],
                    );
                    if d == 0.0 {
                        return Err(format!("lane {} self-intersects", lane.id));
                    }
                }
            }
            for n in [&lane.left, &lane.right].into_iter().flatten() {
                if self.lane(n).is_none() {
                    return Err(format!("lane {} names missing neighbor {n}", lane.id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightState {
    Red,
    Yellow,
    Green,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightPhase {
    pub state: LightState,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ControlKind {
    StopSign,
    /// Phases play once in order; the last phase holds afterwards.
    TrafficLight {
        phases: Vec<LightPhase>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlPoint {
    pub id: usize,
    pub lane: String,
    pub position: Vec2,
    pub kind: ControlKind,
}

impl ControlPoint {
    pub fn light_state(&self, time: f64) -> Option<LightState> {
        let ControlKind::TrafficLight { phases } = &self.kind else {
            return None;
        };
        let mut t = 0.0;
        for phase in phases {
            t += phase.duration;
            if time < t {
                return Some(phase.state);
            }
        }
        phases.last().map(|p| p.state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub pose: Pose2D,
    pub half_extents: (f64, f64),
    pub height: Height,
}

impl Obstacle {
    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::from_pose(&self.pose, self.half_extents)
    }
}

/// Actuation limits of the motion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleLimits {
    pub v_max: f64,
    pub max_steer: f64,
}

impl Default for VehicleLimits {
    fn default() -> Self {
        Self {
            v_max: DEFAULT_V_MAX,
            max_steer: DEFAULT_MAX_STEER,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub tick: u64,
    pub dt: f64,
    pub agents: BTreeMap<AgentId, AgentState>,
    pub static_obstacles: Vec<Obstacle>,
    pub controls: Vec<ControlPoint>,
    weather_factor: f64,
    lane_graph: Arc<LaneGraph>,
    next_id: u32,
}

impl WorldState {
    pub fn new(lane_graph: LaneGraph, dt: f64) -> Result<Self, WorldError> {
        if dt.is_nan() || dt <= 0.0 {
            return Err(WorldError::Domain {
                name: "dt",
                value: dt,
                domain: "(0, inf)",
            });
        }
        Ok(Self {
            tick: 0,
            dt,
            agents: BTreeMap::new(),
            static_obstacles: Vec::new(),
            controls: Vec::new(),
            weather_factor: 1.0,
            lane_graph: Arc::new(lane_graph),
            next_id: 0,
        })
    }

    /// Seconds since episode start, always `tick × dt`.
    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn advance_clock(&mut self) {
        self.tick += 1;
    }

    pub fn lane_graph(&self) -> &LaneGraph {
        &self.lane_graph
    }

    pub fn weather_factor(&self) -> f64 {
        self.weather_factor
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentState> {
        self.agents.get(&id)
    }

    pub fn set_weather(&mut self, factor: f64) -> Result<(), WorldError> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(WorldError::Domain {
                name: "weather_factor",
                value: factor,
                domain: "(0, 1]",
            });
        }
        self.weather_factor = factor;
        Ok(())
    }

    fn overlapping_agent(&self, footprint: &OrientedRect) -> Option<AgentId> {
        self.agents
            .values()
            .find(|a| rects_overlap(&a.footprint(), footprint))
            .map(|a| a.id)
    }

    pub fn spawn_by_location(&mut self, req: SpawnRequest) -> Result<AgentId, WorldError> {
        let (hl, hw) = req.half_extents;
        if !(hl > 0.0 && hw > 0.0) {
            return Err(WorldError::Domain {
                name: "half_extents",
                value: hl.min(hw),
                domain: "(0, inf)",
            });
        }
        let footprint = OrientedRect::from_pose(&req.pose, req.half_extents);
        if let Some(other) = self.overlapping_agent(&footprint) {
            return Err(WorldError::Overlap(other));
        }
        let id = AgentId(self.next_id);
        self.next_id += 1;
        let rsu = req.role == Role::Rsu;
        self.agents.insert(
            id,
            AgentState {
                id,
                role: req.role,
                pose: req.pose,
                speed: if rsu { 0.0 } else { req.speed.max(0.0) },
                half_extents: req.half_extents,
                mount_height: if rsu {
                    Height::Elevated
                } else {
                    Height::Ground
                },
                wheelbase: req.wheelbase,
            },
        );
        Ok(id)
    }

    /// Rejection-samples `count` lane-snapped background vehicles inside
    /// `region`, keeping every footprint gap ≥ `min_gap`. All-or-nothing: the
    /// world is unchanged on error.
    pub fn spawn_by_range<R: Rng + ?Sized>(
        &mut self,
        region: Aabb,
        count: usize,
        min_gap: f64,
        rng: &mut R,
    ) -> Result<Vec<AgentId>, WorldError> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let budget = 100 * count;
        let lanes: Vec<Polyline> = self
            .lane_graph
            .lanes()
            .iter()
            .filter(|l| l.nodes.len() >= 2)
            .filter_map(|l| self.lane_graph.lane_polyline(&l.id))
            .collect();
        let mut placed: Vec<OrientedRect> = Vec::with_capacity(count);
        let mut attempts = 0;
        while placed.len() < count {
            if attempts >= budget {
                return Err(WorldError::PlacementExhausted {
                    requested: count,
                    attempts,
                });
            }
            attempts += 1;
            let sample = Vec2::new(
                rng.random_range(region.min.x..=region.max.x),
                rng.random_range(region.min.y..=region.max.y),
            );
            let Some(pose) = snap_to_lanes(&lanes, sample) else {
                continue;
            };
            if !region.contains(pose.position()) {
                continue;
            }
            let footprint = OrientedRect::from_pose(&pose, DEFAULT_HALF_EXTENTS);
            if self.overlapping_agent(&footprint).is_some() {
                continue;
            }
            if placed
                .iter()
                .any(|p| rect_distance(p, &footprint) < min_gap)
            {
                continue;
            }
            placed.push(footprint);
        }
        let ids = placed
            .into_iter()
            .map(|fp| {
                let pose = Pose2D::new(fp.center.x, fp.center.y, fp.yaw);
                self.spawn_by_location(SpawnRequest::vehicle(Role::Background, pose))
                    .expect("placement was checked against existing agents")
            })
            .collect();
        Ok(ids)
    }
}

fn snap_to_lanes(lanes: &[Polyline], p: Vec2) -> Option<Pose2D> {
    lanes
        .iter()
        .filter_map(|line| {
            let proj = line.project(p);
            if proj.station < 0.0 || proj.station > line.length() {
                return None;
            }
            let foot = line.point_at(proj.station);
            Some((foot, line.heading_at(proj.station), foot.distance(p)))
        })
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .map(|(foot, yaw, _)| Pose2D::new(foot.x, foot.y, yaw))
}

/// Signed longitudinal acceleration (m/s²) and front-wheel steer (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub accel: f64,
    pub steer: f64,
}

/// Kinematic bicycle update. Speed never goes negative and RSUs never move.
pub fn step_kinematics(
    state: &AgentState,
    control: Control,
    dt: f64,
    limits: &VehicleLimits,
) -> AgentState {
    if state.role == Role::Rsu {
        return state.clone();
    }
    let steer = control.steer.clamp(-limits.max_steer, limits.max_steer);
    let speed = state.speed;
    let new_speed = (speed + control.accel * dt).clamp(0.0, limits.v_max);
    let yaw_rate = if state.wheelbase > 0.0 {
        speed / state.wheelbase * steer.tan()
    } else {
        0.0
    };
    let (s, c) = state.pose.yaw.sin_cos();
    let mut next = state.clone();
    next.pose = Pose2D::new(
        state.pose.x + speed * c * dt,
        state.pose.y + speed * s * dt,
        state.pose.yaw + yaw_rate * dt,
    );
    next.speed = new_speed;
    next
}
