use super::HarnessError;
use crate::control::{Controller, Override};
use crate::edge_ai::{fuse, Channel, ChannelConfig, ChannelEventKind, LatencyModel};
use crate::geometry::{rect_distance, rects_overlap, OrientedRect, Polyline, Pose2D};
use crate::perception::{
    perceive, sense_traffic_control, DetectionFrame, PerceptionConfig, PerceptionMode,
};
use crate::planning::{BehaviorPlanner, PlanningInput};
use crate::scenarios::{MotionSpec, Participants, ScenarioSpec};
use crate::sensing::SensorConfig;
use crate::world::{step_kinematics, AgentId, Role, SpawnRequest, VehicleLimits, WorldState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const PURPOSE_PERCEPTION: u64 = 1;
const PURPOSE_CHANNEL: u64 = 2;
const PURPOSE_BACKGROUND: u64 = 3;

/// Remote detections whose center falls this close to the ego's own
/// footprint (at the frame's stamp) are the ego itself and are dropped.
const SELF_MARGIN: f64 = 1.0;

/// Distance short of the route end that counts as arriving.
const GOAL_TOLERANCE: f64 = 1.0;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the random stream owned by `(seed, agent, purpose)`.
pub fn substream_seed(seed: u64, agent: u32, purpose: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ u64::from(agent)) ^ purpose)
}

fn substream(seed: u64, agent: u32, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, agent, purpose))
}

/// Command-line style overrides applied on top of a scenario document.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunOverrides {
    pub latency: Option<LatencyModel>,
    pub drop: Option<f64>,
    pub participants: Option<Participants>,
    pub perception: Option<PerceptionMode>,
}

impl RunOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    /// Copy of `spec` with the overrides written in; latency and drop apply
    /// to the default link and every per-source link.
    pub fn apply(&self, spec: &ScenarioSpec) -> Result<ScenarioSpec, HarnessError> {
        let mut out = spec.clone();
        if let Some(latency) = self.latency {
            if !latency.is_valid() {
                return Err(HarnessError::InvalidOverride(format!("latency {latency}")));
            }
            out.channel.default.latency = latency;
            for link in &mut out.channel.links {
                link.latency = latency;
            }
        }
        if let Some(drop) = self.drop {
            if !(0.0..=1.0).contains(&drop) {
                return Err(HarnessError::InvalidOverride(format!(
                    "drop rate {drop} outside [0, 1]"
                )));
            }
            out.channel.default.drop_rate = drop;
            for link in &mut out.channel.links {
                link.drop_rate = drop;
            }
        }
        if let Some(p) = self.participants {
            out.ego.participants = p;
        }
        if let Some(mode) = self.perception {
            out.ego.perception = mode;
            for agent in &mut out.agents {
                agent.perception = None;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Collision,
    Goal,
    Timeout,
}

/// One CSV row. Column order is the field order below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRow {
    pub tick: u64,
    pub time: f64,
    pub ego_x: f64,
    pub ego_y: f64,
    pub ego_yaw: f64,
    pub ego_speed: f64,
    pub behavior: String,
    /// Unique objects after fusing the ego's frame with delivered frames.
    pub fused_count: usize,
    /// Detections in the ego's own frame.
    pub ego_only_count: usize,
    /// Footprint gap to the adversary (or nearest agent) at this tick.
    pub adversary_gap: Option<f64>,
    /// Whether the ego's own sensor reported the adversary.
    pub adversary_seen_by_ego: bool,
    /// Detections per fused source as `id:n|id:n`, ego first.
    pub source_counts: String,
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
}

pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub seed: u64,
    pub collision: bool,
    pub collided_with: Option<AgentId>,
    /// Smallest footprint gap to the adversary over the episode; infinite
    /// when there was never anything to measure against.
    pub min_distance: f64,
    pub ticks: u64,
    pub termination: TerminationReason,
    pub rows: Vec<TickRow>,
}

impl EpisodeResult {
    pub fn first_tick_where(&self, pred: impl Fn(&TickRow) -> bool) -> Option<u64> {
        self.rows.iter().find(|r| pred(r)).map(|r| r.tick)
    }

    pub fn mean_fused_count(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.fused_count as f64).sum::<f64>() / self.rows.len() as f64
    }
}

/// Footprint gap between two agents, 0 when they overlap.
pub fn min_distance_update(ego: &OrientedRect, other: &OrientedRect) -> f64 {
    if rects_overlap(ego, other) {
        0.0
    } else {
        rect_distance(ego, other)
    }
}

struct Scripted {
    id: AgentId,
    line: Polyline,
    station: f64,
    initial_speed: f64,
    schedule: Vec<(f64, f64)>,
}

impl Scripted {
    fn speed_at(&self, t: f64) -> f64 {
        self.schedule
            .iter()
            .take_while(|(at, _)| *at <= t + 1e-9)
            .last()
            .map_or(self.initial_speed, |(_, v)| *v)
    }

    fn pose(&self) -> Pose2D {
        let p = self.line.point_at(self.station);
        Pose2D::new(p.x, p.y, self.line.heading_at(self.station))
    }
}

struct Source {
    id: AgentId,
    sensor: SensorConfig,
    perception: PerceptionConfig,
    rng: ChaCha8Rng,
    channel: Option<Channel>,
}

/// The synchronized state at the top of a tick, before anyone acts.
pub struct TickView<'a> {
    pub world: &'a WorldState,
    /// Agent ids in the scenario's agent order.
    pub agent_ids: &'a [AgentId],
}

/// Runs one seeded episode of a validated scenario.
pub fn run_episode(spec: &ScenarioSpec, seed: u64) -> Result<EpisodeResult, HarnessError> {
    run_episode_observed(spec, seed, |_| {})
}

/// [`run_episode`], calling `observe` once per tick on the state the
/// metrics are taken from.
pub fn run_episode_observed(
    spec: &ScenarioSpec,
    seed: u64,
    mut observe: impl FnMut(&TickView),
) -> Result<EpisodeResult, HarnessError> {
    spec.validate()?;
    let graph = spec.lane_graph();
    let route = spec
        .ego_route(&graph)
        .expect("validated scenarios have an ego route");
    let mut world = WorldState::new(graph.clone(), spec.dt)?;
    world.set_weather(spec.weather)?;
    world.static_obstacles = spec.map.obstacles.clone();
    world.controls = spec.controls();

    // The ego spawns first so it always has the smallest id.
    let ego_index = spec.ego_index().expect("validated");
    let mut order: Vec<usize> = vec![ego_index];
    order.extend((0..spec.agents.len()).filter(|&i| i != ego_index));
    let mut ids = vec![AgentId(0); spec.agents.len()];
    let mut scripted = Vec::new();
    for &i in &order {
        let a = &spec.agents[i];
        let pose = spec.pose_of(&graph, a).expect("validated placement");
        let mut req = SpawnRequest::vehicle(a.role, pose).with_speed(a.speed);
        if let Some(he) = a.half_extents {
            req = req.with_half_extents(he);
        }
        let id = world.spawn_by_location(req)?;
        ids[i] = id;
        if let MotionSpec::Scripted { schedule } = &a.motion {
            let crate::scenarios::Placement::Lane { lane, station } = &a.placement else {
                unreachable!("validated: scripted agents are lane placed");
            };
            scripted.push(Scripted {
                id,
                line: graph.lane_polyline(lane).expect("validated lane"),
                station: *station,
                initial_speed: a.speed,
                schedule: schedule.iter().map(|c| (c.t, c.speed)).collect(),
            });
        }
    }
    let ego_id = ids[ego_index];
    let mut bg_rng = substream(seed, u32::MAX, PURPOSE_BACKGROUND);
    for bg in &spec.background {
        let spawned = world.spawn_by_range(bg.region(), bg.count, bg.min_gap, &mut bg_rng)?;
        for id in spawned {
            let agent = world.agents.get_mut(&id).expect("just spawned");
            agent.speed = bg.speed;
            if bg.speed > 0.0 {
                let (lane, proj) = graph
                    .nearest_lane(agent.pose.position())
                    .expect("spawned on a lane");
                scripted.push(Scripted {
                    id,
                    line: graph.lane_polyline(&lane.id).expect("lane exists"),
                    station: proj.station,
                    initial_speed: bg.speed,
                    schedule: Vec::new(),
                });
            }
        }
    }

    let adversary = spec
        .adversary
        .as_ref()
        .map(|name| ids[spec.agent_index(name).expect("validated adversary")]);

    // Perceiving agents: the ego plus participating helpers with sensors.
    let mode = spec.ego.perception;
    let mut sources: Vec<Source> = Vec::new();
    for &i in &order {
        let a = &spec.agents[i];
        let Some(sensor) = &a.sensor else { continue };
        if a.role != Role::Ego
            && !(matches!(a.role, Role::Spectator | Role::Rsu)
                && spec.ego.participants.includes(a.role))
        {
            continue;
        }
        let id = ids[i];
        let channel = (a.role != Role::Ego).then(|| {
            let cfg = spec.channel.for_source(&a.name);
            Channel::new(ChannelConfig {
                seed: substream_seed(seed, id.0, PURPOSE_CHANNEL) ^ cfg.seed,
                ..cfg
            })
        });
        sources.push(Source {
            id,
            sensor: sensor.clone(),
            perception: a
                .perception
                .unwrap_or_else(|| PerceptionConfig::for_mode(mode)),
            rng: substream(seed, id.0, PURPOSE_PERCEPTION),
            channel,
        });
    }
    let ego_sensor = sources[0].sensor.clone();
    debug_assert_eq!(sources[0].id, ego_id);

    let mut planner = BehaviorPlanner::for_route(spec.ego.planner, &graph, &route);
    let mut controller = Controller::new(spec.ego.controller);
    let limits = VehicleLimits::default();
    let route_length = planner.route().length();

    let mut ego_history: Vec<OrientedRect> = Vec::new();
    let mut latest: BTreeMap<AgentId, DetectionFrame> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut min_distance = f64::INFINITY;
    let mut collided_with = None;
    let dt = spec.dt;

    let termination = loop {
        observe(&TickView {
            world: &world,
            agent_ids: &ids,
        });
        let now = world.time();
        let ego = world.agents[&ego_id].clone();
        let ego_rect = ego.footprint();
        ego_history.push(ego_rect);

        // Metrics on the synchronized state at t_k.
        let mut gap = None;
        for other in world.agents.values() {
            if other.id == ego_id || other.role == Role::Rsu {
                continue;
            }
            let d = min_distance_update(&ego_rect, &other.footprint());
            if d == 0.0 && collided_with.is_none() {
                collided_with = Some(other.id);
            }
            if adversary.is_none_or(|a| a == other.id) {
                gap = Some(gap.map_or(d, |g: f64| g.min(d)));
            }
        }
        let hit_static = world
            .static_obstacles
            .iter()
            .any(|o| rects_overlap(&ego_rect, &o.footprint()));
        if hit_static && collided_with.is_none() {
            collided_with = Some(ego_id);
        }
        if let Some(g) = gap {
            min_distance = min_distance.min(g);
        }
        if collided_with.is_some() {
            min_distance = 0.0;
            if spec.termination.collision {
                break TerminationReason::Collision;
            }
        }
        if spec.termination.goal
            && planner.station(ego.pose.position()) >= route_length - GOAL_TOLERANCE
        {
            break TerminationReason::Goal;
        }
        if now >= spec.termination.timeout - 1e-9 {
            break TerminationReason::Timeout;
        }

        // Perception and transmission.
        let mut own = None;
        for src in &mut sources {
            let observer = &world.agents[&src.id];
            let frame = perceive(observer, &src.sensor, &src.perception, &world, &mut src.rng);
            match &mut src.channel {
                None => own = Some(frame),
                Some(ch) => ch.send(frame, now),
            }
        }
        let own = own.expect("the ego always perceives");
        let (mut sent, mut dropped, mut delivered) = (0, 0, 0);
        for src in &mut sources {
            let Some(ch) = &mut src.channel else { continue };
            for frame in ch.poll(now)? {
                let keep = latest
                    .get(&frame.source_id)
                    .is_none_or(|prev| frame.stamp >= prev.stamp);
                if keep {
                    latest.insert(frame.source_id, frame);
                }
            }
            for ev in ch.drain_events() {
                match ev.kind {
                    ChannelEventKind::Sent => sent += 1,
                    ChannelEventKind::Dropped => dropped += 1,
                    ChannelEventKind::Delivered => delivered += 1,
                }
            }
        }

        let mut frames = vec![own.clone()];
        for frame in latest.values() {
            let tick = ((frame.stamp / dt).round() as usize).min(ego_history.len() - 1);
            let me = ego_history[tick].inflate(SELF_MARGIN);
            let mut f = frame.clone();
            f.detections.retain(|d| !me.contains(d.bbox.center));
            frames.push(f);
        }
        let fused = fuse(&frames, &spec.ego.fusion, now);
        let source_counts = frames
            .iter()
            .filter(|f| f.stamp >= now - spec.ego.fusion.stale_horizon)
            .map(|f| format!("{}:{}", f.source_id.0, f.detections.len()))
            .collect::<Vec<_>>()
            .join("|");
        let adversary_seen_by_ego = adversary.is_some_and(|a| {
            let rect = world.agents[&a].footprint().inflate(SELF_MARGIN);
            own.detections.iter().any(|d| rect.contains(d.bbox.center))
        });

        // Planning and control.
        let sighting = sense_traffic_control(&ego, &ego_sensor, &world);
        let behavior = planner.plan_behavior(&PlanningInput {
            ego: &ego,
            fused: &fused,
            sighting,
            zones: &spec.trigger_zones,
            now,
        });
        let trajectory = planner.plan_trajectory(&behavior, &ego);
        let ov = if behavior.is_hard_stop() {
            Override::StopMode
        } else {
            Override::None
        };
        let u = controller.control_step(&ego, &trajectory, ov, dt);

        rows.push(TickRow {
            tick: world.tick,
            time: now,
            ego_x: ego.pose.x,
            ego_y: ego.pose.y,
            ego_yaw: ego.pose.yaw,
            ego_speed: ego.speed,
            behavior: behavior.label().to_string(),
            fused_count: fused.len(),
            ego_only_count: own.detections.len(),
            adversary_gap: gap,
            adversary_seen_by_ego,
            source_counts,
            sent,
            dropped,
            delivered,
        });

        // Motion to t_{k+1}.
        let next = step_kinematics(&ego, u, dt, &limits);
        world.agents.insert(ego_id, next);
        for s in &mut scripted {
            let v = s.speed_at(now);
            s.station += v * dt;
            let agent = world.agents.get_mut(&s.id).expect("scripted agent exists");
            agent.pose = s.pose();
            agent.speed = v;
        }
        world.advance_clock();
    };

    Ok(EpisodeResult {
        seed,
        collision: collided_with.is_some(),
        collided_with,
        min_distance,
        ticks: rows.len() as u64,
        termination,
        rows,
    })
}
