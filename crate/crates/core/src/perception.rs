//! Detection frames from visibility: the oracle detector and a parametric
//! noisy detector, plus traffic light / stop sign sensing.

use crate::geometry::{normalize_angle, OrientedRect, Vec2};
use crate::sensing::{
    line_of_sight_excluding, visible_targets_with, world_occluders, SensorConfig,
};
use crate::world::{AgentId, AgentState, ControlKind, LightState, WorldState};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

const MIN_HALF_EXTENT: f64 = 0.2;

/// Oriented 2D box in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox2D {
    pub center: Vec2,
    /// (half-length, half-width)
    pub half_extents: (f64, f64),
    pub yaw: f64,
}

impl BoundingBox2D {
    pub fn new(center: Vec2, half_extents: (f64, f64), yaw: f64) -> Self {
        Self {
            center,
            half_extents,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn rect(&self) -> OrientedRect {
        OrientedRect::new(
            self.center,
            self.half_extents.0,
            self.half_extents.1,
            self.yaw,
        )
    }

    pub fn from_agent(agent: &AgentState) -> Self {
        Self::new(agent.pose.position(), agent.half_extents, agent.pose.yaw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox2D,
    pub confidence: f64,
    /// Ground-truth agent, only filled in oracle mode.
    pub truth_id: Option<AgentId>,
}

/// Everything one source perceived at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub source_id: AgentId,
    /// World time at sensing.
    pub stamp: f64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptionMode {
    #[default]
    Oracle,
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionConfig {
    pub mode: PerceptionMode,
    pub p_detect: f64,
    pub sigma_pos: f64,
    pub sigma_ext: f64,
}

impl PerceptionConfig {
    pub fn oracle() -> Self {
        Self {
            mode: PerceptionMode::Oracle,
            p_detect: 1.0,
            sigma_pos: 0.0,
            sigma_ext: 0.0,
        }
    }

    /// Stand-in for a learned detector: misses 10% and jitters boxes.
    pub fn noisy() -> Self {
        Self {
            mode: PerceptionMode::Noisy,
            p_detect: 0.9,
            sigma_pos: 0.3,
            sigma_ext: 0.1,
        }
    }

    pub fn for_mode(mode: PerceptionMode) -> Self {
        match mode {
            PerceptionMode::Oracle => Self::oracle(),
            PerceptionMode::Noisy => Self::noisy(),
        }
    }

    pub fn is_valid(&self) -> bool {
        let ranges =
            (0.0..=1.0).contains(&self.p_detect) && self.sigma_pos >= 0.0 && self.sigma_ext >= 0.0;
        let oracle_exact = self.mode != PerceptionMode::Oracle
            || (self.p_detect == 1.0 && self.sigma_pos == 0.0 && self.sigma_ext == 0.0);
        ranges && oracle_exact
    }
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self::oracle()
    }
}

/// Runs the detector for `observer`. Oracle mode never touches `rng`.
pub fn perceive<R: Rng + ?Sized>(
    observer: &AgentState,
    sensor: &SensorConfig,
    cfg: &PerceptionConfig,
    world: &WorldState,
    rng: &mut R,
) -> DetectionFrame {
    let occluders = world_occluders(world);
    let visible = visible_targets_with(observer, sensor, world, &occluders);
    let mut detections = Vec::with_capacity(visible.len());
    for id in visible {
        let target = &world.agents[&id];
        let truth = BoundingBox2D::from_agent(target);
        let detection = match cfg.mode {
            PerceptionMode::Oracle => Detection {
                bbox: truth,
                confidence: 1.0,
                truth_id: Some(id),
            },
            PerceptionMode::Noisy => {
                if !rng.random_bool(cfg.p_detect) {
                    continue;
                }
                let jitter = |rng: &mut R, sigma: f64| {
                    if sigma > 0.0 {
                        Normal::new(0.0, sigma).unwrap().sample(rng)
                    } else {
                        0.0
                    }
                };
                let center = Vec2::new(
                    truth.center.x + jitter(rng, cfg.sigma_pos),
                    truth.center.y + jitter(rng, cfg.sigma_pos),
                );
                let half_extents = (
                    (truth.half_extents.0 + jitter(rng, cfg.sigma_ext)).max(MIN_HALF_EXTENT),
                    (truth.half_extents.1 + jitter(rng, cfg.sigma_ext)).max(MIN_HALF_EXTENT),
                );
                Detection {
                    bbox: BoundingBox2D::new(center, half_extents, truth.yaw),
                    confidence: rng.random_range(0.5..=1.0),
                    truth_id: None,
                }
            }
        };
        detections.push(detection);
    }
    DetectionFrame {
        source_id: observer.id,
        stamp: world.time(),
        detections,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSignal {
    Light(LightState),
    StopSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSighting {
    pub control_id: usize,
    pub signal: ControlSignal,
    /// Center-to-control-point distance in meters.
    pub distance: f64,
}

/// Nearest traffic control ahead of `observer` on its current lane that is
/// within sensor range and in line of sight.
pub fn sense_traffic_control(
    observer: &AgentState,
    sensor: &SensorConfig,
    world: &WorldState,
) -> Option<ControlSighting> {
    let graph = world.lane_graph();
    let position = observer.pose.position();
    let (lane, _) = graph.nearest_lane(position)?;
    let sensor_pose = sensor.pose(observer);
    let origin = sensor_pose.position();
    let reach = sensor.range * world.weather_factor();
    let heading = observer.pose.heading();
    let occluders = world_occluders(world);
    world
        .controls
        .iter()
        .filter(|c| c.lane == lane.id)
        .filter_map(|c| {
            let ahead = (c.position - position).dot(heading);
            if ahead <= 0.0 {
                return None;
            }
            if origin.distance(c.position) > reach {
                return None;
            }
            if !line_of_sight_excluding(
                origin,
                c.position,
                &occluders,
                sensor.mount_height,
                &[observer.id],
            ) {
                return None;
            }
            let signal = match &c.kind {
                ControlKind::StopSign => ControlSignal::StopSign,
                ControlKind::TrafficLight { .. } => {
                    ControlSignal::Light(c.light_state(world.time())?)
                }
            };
            Some(ControlSighting {
                control_id: c.id,
                signal,
                distance: position.distance(c.position),
            })
        })
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
}
