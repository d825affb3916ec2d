//! Declarative scenario documents: map, agents, sensors, channel, trigger
//! zones and termination rules, stored as TOML. Twelve scenarios ship with
//! the crate; see `scenarios/SCHEMA.md` for the document format.

use crate::control::ControllerConfig;
use crate::edge_ai::{ChannelConfig, FusionConfig, LatencyModel};
use crate::geometry::{Aabb, Polyline, Pose2D, Vec2};
use crate::perception::{PerceptionConfig, PerceptionMode};
use crate::planning::{plan_global, PlannerConfig, Route, TriggerZone};
use crate::sensing::SensorConfig;
use crate::world::{ControlKind, ControlPoint, Height, LaneGraph, LightPhase, Obstacle, Role};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    /// Dotted path of the offending field, e.g. `agents[2].placement.lane`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario document: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Validation(ValidationError),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(ValidationError {
        path: path.into(),
        message: message.into(),
    })
}

/// Which non-ego sources feed the ego's fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Participants {
    EgoOnly,
    Vehicle,
    Rsu,
    #[default]
    Both,
}

impl Participants {
    pub fn includes(self, role: Role) -> bool {
        matches!(
            (self, role),
            (_, Role::Ego)
                | (Participants::Vehicle | Participants::Both, Role::Spectator)
                | (Participants::Rsu | Participants::Both, Role::Rsu)
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Participants::EgoOnly => "ego_only",
            Participants::Vehicle => "vehicle",
            Participants::Rsu => "rsu",
            Participants::Both => "both",
        }
    }
}

impl FromStr for Participants {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ego_only" | "ego" | "none" => Ok(Participants::EgoOnly),
            "vehicle" | "spectator" => Ok(Participants::Vehicle),
            "rsu" => Ok(Participants::Rsu),
            "both" | "vehicle+rsu" | "all" => Ok(Participants::Both),
            other => Err(format!(
                "unknown participant set {other:?} (expected ego-only, vehicle, rsu or both)"
            )),
        }
    }
}

impl fmt::Display for Participants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneSpec {
    pub id: String,
    pub points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<String>,
}

/// A lane node by lane id and point index; negative indices count from the
/// end, so `-1` is the last point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRef {
    pub lane: String,
    pub index: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    pub from: NodeRef,
    pub to: NodeRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    StopSign {
        lane: String,
        position: Vec2,
    },
    TrafficLight {
        lane: String,
        position: Vec2,
        phases: Vec<LightPhase>,
    },
}

impl ControlSpec {
    fn lane(&self) -> &str {
        match self {
            ControlSpec::StopSign { lane, .. } | ControlSpec::TrafficLight { lane, .. } => lane,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub lanes: Vec<LaneSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub connections: Vec<ConnectionSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controls: Vec<ControlSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<Obstacle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Placement {
    /// At `station` meters along a lane centerline, facing along the lane.
    Lane {
        lane: String,
        station: f64,
    },
    Pose {
        x: f64,
        y: f64,
        yaw: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedChange {
    /// Episode time from which `speed` applies.
    pub t: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionSpec {
    #[default]
    Static,
    /// Follows its placement lane with a piecewise-constant speed schedule;
    /// before the first entry it keeps its initial speed.
    Scripted { schedule: Vec<SpeedChange> },
    /// Route-following ego driven by the planner and controller.
    Planner { goal: NodeRef },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    pub role: Role,
    pub placement: Placement,
    #[serde(default)]
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_extents: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor: Option<SensorConfig>,
    /// Overrides the detector settings implied by the ego's perception mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perception: Option<PerceptionConfig>,
    #[serde(default)]
    pub motion: MotionSpec,
}

/// The ego's processing pipeline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpec {
    #[serde(default)]
    pub participants: Participants,
    #[serde(default)]
    pub perception: PerceptionMode,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    /// Name of the sending agent.
    pub source: String,
    #[serde(default)]
    pub latency: LatencyModel,
    #[serde(default)]
    pub drop_rate: f64,
}

impl LinkSpec {
    pub fn config(&self) -> ChannelConfig {
        ChannelConfig {
            latency: self.latency,
            drop_rate: self.drop_rate,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default)]
    pub default: ChannelConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkSpec>,
}

impl ChannelSpec {
    pub fn for_source(&self, name: &str) -> ChannelConfig {
        self.links
            .iter()
            .find(|l| l.source == name)
            .map_or(self.default, LinkSpec::config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Termination {
    pub timeout: f64,
    #[serde(default = "yes")]
    pub collision: bool,
    #[serde(default = "yes")]
    pub goal: bool,
}

fn yes() -> bool {
    true
}

/// Lane-snapped background vehicles placed by rejection sampling; they
/// follow their lane at `speed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpec {
    pub min: Vec2,
    pub max: Vec2,
    pub count: usize,
    #[serde(default = "one")]
    pub min_gap: f64,
    #[serde(default)]
    pub speed: f64,
}

fn one() -> f64 {
    1.0
}

impl BackgroundSpec {
    pub fn region(&self) -> Aabb {
        Aabb::new(self.min, self.max)
    }
}

fn default_dt() -> f64 {
    crate::world::DEFAULT_DT
}

fn is_default_dt(dt: &f64) -> bool {
    *dt == default_dt()
}

fn clear_sky() -> f64 {
    1.0
}

fn is_clear_sky(w: &f64) -> bool {
    *w == 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default = "default_dt", skip_serializing_if = "is_default_dt")]
    pub dt: f64,
    /// Sensor range multiplier in (0, 1].
    #[serde(default = "clear_sky", skip_serializing_if = "is_clear_sky")]
    pub weather: f64,
    /// Agent whose gap to the ego is reported as the episode's min distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<String>,
    pub termination: Termination,
    pub map: MapSpec,
    #[serde(default)]
    pub ego: EgoSpec,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trigger_zones: Vec<TriggerZone>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub background: Vec<BackgroundSpec>,
    pub agents: Vec<AgentSpec>,
}

pub const BUILTIN_NAMES: [&str; 12] = [
    "pipeline1",
    "pipeline2",
    "pipeline3",
    "pipeline4",
    "coop1",
    "coop2",
    "coop3",
    "coop4",
    "coop5",
    "coop6",
    "coop7",
    "coop8",
];

/// Raw document text of a built-in scenario.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "pipeline1" => include_str!("../scenarios/pipeline1.toml"),
        "pipeline2" => include_str!("../scenarios/pipeline2.toml"),
        "pipeline3" => include_str!("../scenarios/pipeline3.toml"),
        "pipeline4" => include_str!("../scenarios/pipeline4.toml"),
        "coop1" => include_str!("../scenarios/coop1.toml"),
        "coop2" => include_str!("../scenarios/coop2.toml"),
        "coop3" => include_str!("../scenarios/coop3.toml"),
        "coop4" => include_str!("../scenarios/coop4.toml"),
        "coop5" => include_str!("../scenarios/coop5.toml"),
        "coop6" => include_str!("../scenarios/coop6.toml"),
        "coop7" => include_str!("../scenarios/coop7.toml"),
        "coop8" => include_str!("../scenarios/coop8.toml"),
        _ => return None,
    })
}

pub fn builtin(name: &str) -> Result<ScenarioSpec, ScenarioError> {
    let text = builtin_source(name).ok_or_else(|| ScenarioError::UnknownScenario(name.into()))?;
    load_scenario(text)
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let spec: ScenarioSpec =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario(&text)
}

/// A built-in name, or else a path to a document.
pub fn resolve(name_or_path: &str) -> Result<ScenarioSpec, ScenarioError> {
    if builtin_source(name_or_path).is_some() {
        return builtin(name_or_path);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return load_scenario_file(path);
    }
    Err(ScenarioError::UnknownScenario(name_or_path.into()))
}

impl ScenarioSpec {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario specs always serialize")
    }

    pub fn ego_index(&self) -> Option<usize> {
        self.agents.iter().position(|a| a.role == Role::Ego)
    }

    pub fn agent_index(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.name == name)
    }

    /// Lane graph with lanes in document order followed by connections.
    pub fn lane_graph(&self) -> LaneGraph {
        let mut g = LaneGraph::new();
        for lane in &self.map.lanes {
            let pts: Vec<Vec2> = lane.points.iter().map(|p| Vec2::new(p[0], p[1])).collect();
            g.add_lane(&lane.id, &pts);
        }
        for lane in &self.map.lanes {
            g.set_neighbors(&lane.id, lane.left.as_deref(), lane.right.as_deref());
        }
        for c in &self.map.connections {
            if let (Some(a), Some(b)) = (self.node(&g, &c.from), self.node(&g, &c.to)) {
                g.add_edge(a, b, &c.to.lane);
            }
        }
        g
    }

    fn node(&self, g: &LaneGraph, r: &NodeRef) -> Option<usize> {
        let lane = g.lane(&r.lane)?;
        let n = lane.nodes.len() as i64;
        let i = if r.index < 0 { n + r.index } else { r.index };
        (0..n).contains(&i).then(|| lane.nodes[i as usize])
    }

    pub fn controls(&self) -> Vec<ControlPoint> {
        self.map
            .controls
            .iter()
            .enumerate()
            .map(|(id, c)| match c {
                ControlSpec::StopSign { lane, position } => ControlPoint {
                    id,
                    lane: lane.clone(),
                    position: *position,
                    kind: ControlKind::StopSign,
                },
                ControlSpec::TrafficLight {
                    lane,
                    position,
                    phases,
                } => ControlPoint {
                    id,
                    lane: lane.clone(),
                    position: *position,
                    kind: ControlKind::TrafficLight {
                        phases: phases.clone(),
                    },
                },
            })
            .collect()
    }

    /// Initial pose of an agent.
    pub fn pose_of(&self, graph: &LaneGraph, agent: &AgentSpec) -> Option<Pose2D> {
        match &agent.placement {
            Placement::Pose { x, y, yaw } => Some(Pose2D::new(*x, *y, *yaw)),
            Placement::Lane { lane, station } => {
                let line = graph.lane_polyline(lane)?;
                let p = line.point_at(*station);
                Some(Pose2D::new(p.x, p.y, line.heading_at(*station)))
            }
        }
    }

    /// Route of the planner-driven ego: from the last node of its placement
    /// lane at or behind the placement station to its goal node.
    pub fn ego_route(&self, graph: &LaneGraph) -> Option<Route> {
        let ego = &self.agents[self.ego_index()?];
        let (Placement::Lane { lane, station }, MotionSpec::Planner { goal }) =
            (&ego.placement, &ego.motion)
        else {
            return None;
        };
        let nodes = &graph.lane(lane)?.nodes;
        let line: Polyline = graph.lane_polyline(lane)?;
        let start = nodes
            .iter()
            .rev()
            .find(|&&n| line.project(graph.nodes()[n]).station <= *station + 1e-9)
            .copied()
            .unwrap_or(nodes[0]);
        let goal = self.node(graph, goal)?;
        plan_global(graph, start, goal).ok()
    }

    /// Full structural validation; the first problem found is reported with
    /// its field path.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if self.dt.is_nan() || self.dt <= 0.0 {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.weather > 0.0 && self.weather <= 1.0) {
            return Err(invalid("weather", "must lie in (0, 1]"));
        }
        if self.termination.timeout.is_nan() || self.termination.timeout <= 0.0 {
            return Err(invalid("termination.timeout", "must be > 0"));
        }

        let mut lane_ids = BTreeSet::new();
        for (i, lane) in self.map.lanes.iter().enumerate() {
            if !lane_ids.insert(lane.id.as_str()) {
                return Err(invalid(
                    format!("map.lanes[{i}].id"),
                    format!("duplicate lane {:?}", lane.id),
                ));
            }
            if lane.points.len() < 2 {
                return Err(invalid(
                    format!("map.lanes[{i}].points"),
                    "needs at least two points",
                ));
            }
        }
        let lane_exists = |path: String, id: &str| {
            if lane_ids.contains(id) {
                Ok(())
            } else {
                Err(invalid(path, format!("unknown lane {id:?}")))
            }
        };
        for (i, lane) in self.map.lanes.iter().enumerate() {
            if let Some(l) = &lane.left {
                lane_exists(format!("map.lanes[{i}].left"), l)?;
            }
            if let Some(r) = &lane.right {
                lane_exists(format!("map.lanes[{i}].right"), r)?;
            }
        }
        let graph = {
            let mut g = LaneGraph::new();
            for lane in &self.map.lanes {
                let pts: Vec<Vec2> = lane.points.iter().map(|p| Vec2::new(p[0], p[1])).collect();
                g.add_lane(&lane.id, &pts);
            }
            g
        };
        let node_ok = |path: String, r: &NodeRef| {
            lane_exists(format!("{path}.lane"), &r.lane)?;
            self.node(&graph, r).map(|_| ()).ok_or_else(|| {
                invalid(
                    format!("{path}.index"),
                    format!("no point {} on lane {:?}", r.index, r.lane),
                )
            })
        };
        for (i, c) in self.map.connections.iter().enumerate() {
            node_ok(format!("map.connections[{i}].from"), &c.from)?;
            node_ok(format!("map.connections[{i}].to"), &c.to)?;
        }
        let full = self.lane_graph();
        full.validate().map_err(|m| invalid("map", m))?;
        for (i, c) in self.map.controls.iter().enumerate() {
            lane_exists(format!("map.controls[{i}].lane"), c.lane())?;
            if let ControlSpec::TrafficLight { phases, .. } = c {
                if phases.is_empty() {
                    return Err(invalid(
                        format!("map.controls[{i}].phases"),
                        "needs at least one phase",
                    ));
                }
                if let Some(j) = phases
                    .iter()
                    .position(|p| p.duration.is_nan() || p.duration <= 0.0)
                {
                    return Err(invalid(
                        format!("map.controls[{i}].phases[{j}].duration"),
                        "must be > 0",
                    ));
                }
            }
        }
        for (i, o) in self.map.obstacles.iter().enumerate() {
            if !(o.half_extents.0 > 0.0 && o.half_extents.1 > 0.0) {
                return Err(invalid(
                    format!("map.obstacles[{i}].half_extents"),
                    "must be > 0",
                ));
            }
        }

        let mut names = BTreeSet::new();
        let mut egos = 0;
        for (i, a) in self.agents.iter().enumerate() {
            let path = format!("agents[{i}]");
            if !names.insert(a.name.as_str()) {
                return Err(invalid(
                    format!("{path}.name"),
                    format!("duplicate agent {:?}", a.name),
                ));
            }
            if a.role == Role::Ego {
                egos += 1;
            }
            if let Placement::Lane { lane, .. } = &a.placement {
                lane_exists(format!("{path}.placement.lane"), lane)?;
            }
            if a.speed.is_nan() || a.speed < 0.0 {
                return Err(invalid(format!("{path}.speed"), "must be ≥ 0"));
            }
            if let Some((hl, hw)) = a.half_extents {
                if !(hl > 0.0 && hw > 0.0) {
                    return Err(invalid(format!("{path}.half_extents"), "must be > 0"));
                }
            }
            if let Some(s) = &a.sensor {
                if !s.is_valid() {
                    return Err(invalid(
                        format!("{path}.sensor"),
                        "fov must lie in (0, 360] and range be > 0",
                    ));
                }
                if a.role == Role::Rsu && s.mount_height != Height::Elevated {
                    return Err(invalid(
                        format!("{path}.sensor.mount_height"),
                        "road side units mount elevated sensors",
                    ));
                }
            }
            if let Some(p) = &a.perception {
                if !p.is_valid() {
                    return Err(invalid(
                        format!("{path}.perception"),
                        "parameters out of range",
                    ));
                }
            }
            match &a.motion {
                MotionSpec::Static => {
                    if a.role == Role::Ego {
                        return Err(invalid(
                            format!("{path}.motion"),
                            "the ego must use planner motion",
                        ));
                    }
                }
                MotionSpec::Scripted { schedule } => {
                    if a.role == Role::Ego {
                        return Err(invalid(
                            format!("{path}.motion"),
                            "the ego must use planner motion",
                        ));
                    }
                    if !matches!(a.placement, Placement::Lane { .. }) {
                        return Err(invalid(
                            format!("{path}.placement"),
                            "scripted motion needs a lane placement",
                        ));
                    }
                    if schedule.windows(2).any(|w| w[1].t < w[0].t) {
                        return Err(invalid(
                            format!("{path}.motion.schedule"),
                            "times must be non-decreasing",
                        ));
                    }
                    if let Some(j) = schedule
                        .iter()
                        .position(|c| c.speed.is_nan() || c.speed < 0.0)
                    {
                        return Err(invalid(
                            format!("{path}.motion.schedule[{j}].speed"),
                            "must be ≥ 0",
                        ));
                    }
                }
                MotionSpec::Planner { goal } => {
                    if a.role != Role::Ego {
                        return Err(invalid(
                            format!("{path}.motion"),
                            "only the ego runs the planner",
                        ));
                    }
                    if !matches!(a.placement, Placement::Lane { .. }) {
                        return Err(invalid(
                            format!("{path}.placement"),
                            "the ego needs a lane placement",
                        ));
                    }
                    node_ok(format!("{path}.motion.goal"), goal)?;
                }
            }
        }
        match egos {
            1 => {}
            0 => return Err(invalid("agents", "no agent has role \"ego\"")),
            n => {
                return Err(invalid(
                    "agents",
                    format!("{n} agents have role \"ego\"; exactly one is allowed"),
                ))
            }
        }
        let ego = &self.agents[self.ego_index().unwrap()];
        if ego.sensor.is_none() {
            return Err(invalid(
                format!("agents[{}].sensor", self.ego_index().unwrap()),
                "the ego needs a sensor",
            ));
        }
        if self.ego_route(&full).is_none() {
            return Err(invalid(
                format!("agents[{}].motion.goal", self.ego_index().unwrap()),
                "goal is not reachable from the ego's placement",
            ));
        }
        if let Some(adv) = &self.adversary {
            if self.agent_index(adv).is_none() {
                return Err(invalid("adversary", format!("unknown agent {adv:?}")));
            }
        }

        if !self.ego.fusion.is_valid() {
            return Err(invalid(
                "ego.fusion",
                "iou_threshold must lie in (0, 1] and stale_horizon be ≥ 0",
            ));
        }
        if !self.ego.planner.is_valid() {
            return Err(invalid(
                "ego.planner",
                "thresholds must be non-negative, spacing in (0, 2]",
            ));
        }
        let c = &self.ego.controller;
        if !(c.a_max > 0.0 && c.s_max > 0.0 && c.lookahead_min > 0.0 && c.lookahead_time >= 0.0) {
            return Err(invalid("ego.controller", "limits must be > 0"));
        }
        if !self.channel.default.is_valid() {
            return Err(invalid(
                "channel.default",
                "latency must satisfy 0 ≤ lo ≤ hi and drop_rate lie in [0, 1]",
            ));
        }
        for (i, l) in self.channel.links.iter().enumerate() {
            if self.agent_index(&l.source).is_none() {
                return Err(invalid(
                    format!("channel.links[{i}].source"),
                    format!("unknown agent {:?}", l.source),
                ));
            }
            if !l.config().is_valid() {
                return Err(invalid(
                    format!("channel.links[{i}]"),
                    "latency must satisfy 0 ≤ lo ≤ hi and drop_rate lie in [0, 1]",
                ));
            }
        }
        for (i, z) in self.trigger_zones.iter().enumerate() {
            if !z.area().is_valid() {
                return Err(invalid(
                    format!("trigger_zones[{i}]"),
                    "min must not exceed max",
                ));
            }
            if z.t_on.partial_cmp(&z.t_off).is_none_or(|o| o.is_gt()) {
                return Err(invalid(
                    format!("trigger_zones[{i}].t_off"),
                    "must not precede t_on",
                ));
            }
        }
        for (i, b) in self.background.iter().enumerate() {
            if !b.region().is_valid() {
                return Err(invalid(
                    format!("background[{i}]"),
                    "min must not exceed max",
                ));
            }
            if b.min_gap.is_nan() || b.min_gap < 0.0 || b.speed.is_nan() || b.speed < 0.0 {
                return Err(invalid(
                    format!("background[{i}]"),
                    "min_gap and speed must be ≥ 0",
                ));
            }
        }
        Ok(())
    }
}
