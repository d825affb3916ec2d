//! Route search on the lane graph, rule-based behavior selection and
//! trajectory generation with target speeds.

use crate::geometry::{Aabb, Polyline, Vec2};
use crate::perception::{BoundingBox2D, ControlSighting, ControlSignal};
use crate::world::{AgentState, LaneGraph, LightState};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlanningError {
    #[error("node {0} is not in the lane graph")]
    UnknownNode(usize),
    #[error("no route from node {start} to node {goal}")]
    NoRoute { start: usize, goal: usize },
}

/// Node sequence with the arc length accumulated at each node.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub nodes: Vec<usize>,
    pub cumulative: Vec<f64>,
}

impl Route {
    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn polyline(&self, graph: &LaneGraph) -> Polyline {
        Polyline::new(self.nodes.iter().map(|&n| graph.nodes()[n]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Reversed for a min-heap: lowest f first, then lowest node id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest route by A* with a straight-line heuristic. Equal-cost frontier
/// entries are expanded in node id order.
pub fn plan_global(graph: &LaneGraph, start: usize, goal: usize) -> Result<Route, PlanningError> {
    let n = graph.nodes().len();
    for node in [start, goal] {
        if node >= n {
            return Err(PlanningError::UnknownNode(node));
        }
    }
    let target = graph.nodes()[goal];
    let h = |i: usize| graph.nodes()[i].distance(target);
    let mut g = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    g[start] = 0.0;
    heap.push(Open {
        f: h(start),
        g: 0.0,
        node: start,
    });
    while let Some(Open { g: cost, node, .. }) = heap.pop() {
        if cost > g[node] {
            continue;
        }
        if node == goal {
            break;
        }
        for e in graph.outgoing(node) {
            let next = cost + e.length;
            let better =
                next < g[e.to] || (next == g[e.to] && parent[e.to].is_some_and(|p| node < p));
            if better {
                g[e.to] = next;
                parent[e.to] = Some(node);
                heap.push(Open {
                    f: next + h(e.to),
                    g: next,
                    node: e.to,
                });
            }
        }
    }
    if !g[goal].is_finite() {
        return Err(PlanningError::NoRoute { start, goal });
    }
    let mut nodes = vec![goal];
    let mut at = goal;
    while at != start {
        at = parent[at].expect("every settled node but the start has a parent");
        nodes.push(at);
    }
    nodes.reverse();
    let cumulative = nodes.iter().map(|&i| g[i]).collect();
    Ok(Route { nodes, cumulative })
}

/// Axis-aligned region that forces a stop while armed and occupied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerZone {
    pub min: Vec2,
    pub max: Vec2,
    #[serde(default)]
    pub t_on: f64,
    #[serde(default = "forever")]
    pub t_off: f64,
}

fn forever() -> f64 {
    f64::INFINITY
}

impl TriggerZone {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self {
            min,
            max,
            t_on: 0.0,
            t_off: f64::INFINITY,
        }
    }

    pub fn area(&self) -> Aabb {
        Aabb::new(self.min, self.max)
    }

    pub fn armed(&self, time: f64) -> bool {
        self.t_on <= time && time <= self.t_off
    }

    pub fn contains(&self, p: Vec2, time: f64) -> bool {
        self.armed(time) && self.area().contains(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Cruise speed.
    pub v_des: f64,
    pub d_emergency: f64,
    pub d_follow: f64,
    pub d_overtake: f64,
    /// A lead slower than `v_des - delta_v` is worth overtaking.
    pub delta_v: f64,
    pub d_control: f64,
    pub tau_headway: f64,
    pub d_min: f64,
    pub lane_width: f64,
    /// Comfortable deceleration used for stop ramps and the follow cap.
    pub a_stop: f64,
    /// Hard braking used to place trigger stops.
    pub a_max: f64,
    /// Front bumper clearance kept before a stop line.
    pub stop_margin: f64,
    /// Standstill time needed to clear a stop sign.
    pub stop_dwell: f64,
    pub waypoint_spacing: f64,
    pub horizon: f64,
    /// Clearance behind an overtaken vehicle before shifting back in.
    pub pass_margin: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            v_des: 8.0,
            d_emergency: 6.0,
            d_follow: 25.0,
            d_overtake: 20.0,
            delta_v: 2.0,
            d_control: 30.0,
            tau_headway: 1.5,
            d_min: 5.0,
            lane_width: 3.5,
            a_stop: 2.5,
            a_max: 4.0,
            stop_margin: 1.0,
            stop_dwell: 1.0,
            waypoint_spacing: 1.0,
            horizon: 30.0,
            pass_margin: 6.0,
        }
    }
}

impl PlannerConfig {
    pub fn is_valid(&self) -> bool {
        let positive = [
            self.v_des,
            self.d_follow,
            self.lane_width,
            self.a_stop,
            self.a_max,
            self.horizon,
        ];
        let non_negative = [
            self.d_emergency,
            self.d_overtake,
            self.delta_v,
            self.d_control,
            self.tau_headway,
            self.d_min,
            self.stop_margin,
            self.stop_dwell,
            self.pass_margin,
        ];
        positive.iter().all(|v| *v > 0.0)
            && non_negative.iter().all(|v| *v >= 0.0)
            && self.waypoint_spacing > 0.0
            && self.waypoint_spacing <= 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OvertakePhase {
    ShiftOut,
    Pass,
    ShiftIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    LaneFollow,
    CarFollow { lead: u32, gap: f64 },
    Overtake { phase: OvertakePhase },
    StopAtControl { distance: f64 },
    TriggerStop,
    EmergencyBrake,
}

impl Behavior {
    pub fn label(&self) -> &'static str {
        match self {
            Behavior::LaneFollow => "lane_follow",
            Behavior::CarFollow { .. } => "car_follow",
            Behavior::Overtake {
                phase: OvertakePhase::ShiftOut,
            } => "overtake_shift_out",
            Behavior::Overtake {
                phase: OvertakePhase::Pass,
            } => "overtake_pass",
            Behavior::Overtake {
                phase: OvertakePhase::ShiftIn,
            } => "overtake_shift_in",
            Behavior::StopAtControl { .. } => "stop_at_control",
            Behavior::TriggerStop => "trigger_stop",
            Behavior::EmergencyBrake => "emergency_brake",
        }
    }

    /// Behaviors under which the harness hands control to the stop override.
    pub fn is_hard_stop(&self) -> bool {
        matches!(self, Behavior::TriggerStop | Behavior::EmergencyBrake)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Vec2,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn polyline(&self) -> Polyline {
        Polyline::new(self.waypoints.iter().map(|w| w.position).collect())
    }
}

/// Speed target of the car-following gap law.
pub fn follow_speed(cfg: &PlannerConfig, ego_speed: f64, lead_speed: f64, gap: f64) -> f64 {
    let desired = cfg.d_min.max(cfg.tau_headway * ego_speed);
    let law = if gap < cfg.d_min {
        lead_speed - 0.5 * (cfg.d_min - gap)
    } else if gap < desired {
        lead_speed
    } else {
        cfg.v_des.min(lead_speed + 0.5 * (gap - desired))
    };
    // Never faster than what still allows braking down to the lead's speed
    // before the gap shrinks to d_min.
    let cap = (lead_speed * lead_speed + 2.0 * cfg.a_stop * (gap - cfg.d_min).max(0.0)).sqrt();
    law.min(cap).clamp(0.0, cfg.v_des)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Track {
    id: u32,
    position: Vec2,
    velocity: Vec2,
    last_seen: f64,
    hits: u32,
}

/// Nearest-neighbour tracker with an alpha-beta filter, used only to
/// estimate the speed of fused boxes.
#[derive(Debug, Clone, Default)]
struct Tracker {
    tracks: Vec<Track>,
    next_id: u32,
}

const TRACK_GATE: f64 = 3.0;
const TRACK_TIMEOUT: f64 = 1.0;
const ALPHA: f64 = 0.6;
const BETA: f64 = 0.3;

impl Tracker {
    /// Returns the track index of every box.
    fn update(&mut self, boxes: &[BoundingBox2D], now: f64) -> Vec<usize> {
        self.tracks.retain(|t| now - t.last_seen <= TRACK_TIMEOUT);
        let predicted: Vec<Vec2> = self
            .tracks
            .iter()
            .map(|t| t.position + t.velocity * (now - t.last_seen))
            .collect();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, b) in boxes.iter().enumerate() {
            for (j, p) in predicted.iter().enumerate() {
                let d = b.center.distance(*p);
                if d <= TRACK_GATE {
                    pairs.push((d, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut assigned = vec![usize::MAX; boxes.len()];
        let mut used = vec![false; self.tracks.len()];
        for (_, i, j) in pairs {
            if assigned[i] != usize::MAX || used[j] {
                continue;
            }
            assigned[i] = j;
            used[j] = true;
            let t = &mut self.tracks[j];
            let dt = now - t.last_seen;
            let z = boxes[i].center;
            if dt > 0.0 {
                if t.hits == 1 {
                    t.velocity = (z - t.position) * (1.0 / dt);
                    t.position = z;
                } else {
                    let r = z - predicted[j];
                    t.position = predicted[j] + r * ALPHA;
                    t.velocity = t.velocity + r * (BETA / dt);
                }
                t.last_seen = now;
                t.hits += 1;
            }
        }
        for (i, slot) in assigned.iter_mut().enumerate() {
            if *slot == usize::MAX {
                self.tracks.push(Track {
                    id: self.next_id,
                    position: boxes[i].center,
                    velocity: Vec2::default(),
                    last_seen: now,
                    hits: 1,
                });
                self.next_id += 1;
                *slot = self.tracks.len() - 1;
            }
        }
        assigned
    }
}

/// Box extent in route coordinates.
#[derive(Debug, Clone, Copy)]
struct Footprint {
    station: (f64, f64),
    offset: (f64, f64),
    center_station: f64,
    center_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Lead {
    track: u32,
    gap: f64,
    speed: f64,
    /// Route station of the lead's front bumper when last seen, and when.
    front: f64,
    seen_at: f64,
}

impl Lead {
    /// Front station dead-reckoned to `now` at the last tracked speed.
    fn front_at(&self, now: f64) -> f64 {
        let v = if self.speed.is_finite() {
            self.speed
        } else {
            0.0
        };
        self.front + v * (now - self.seen_at).max(0.0)
    }
}

/// Everything the behavior layer looks at in one tick.
#[derive(Debug, Clone, Copy)]
pub struct PlanningInput<'a> {
    pub ego: &'a AgentState,
    pub fused: &'a [BoundingBox2D],
    pub sighting: Option<ControlSighting>,
    pub zones: &'a [TriggerZone],
    pub now: f64,
}

/// Behavior and trajectory planner for one vehicle along a fixed route.
/// Keeps the memory that single-tick rules cannot: overtake phase, cleared
/// stop signs and box tracks.
#[derive(Debug, Clone)]
pub struct BehaviorPlanner {
    cfg: PlannerConfig,
    route: Polyline,
    /// Lateral offset of the left neighbour lane, if the route has one.
    adjacent: Option<f64>,
    tracker: Tracker,
    overtake: Option<OvertakePhase>,
    lead: Option<Lead>,
    cleared: BTreeSet<usize>,
    dwell: f64,
    last_time: Option<f64>,
}

impl BehaviorPlanner {
    /// `adjacent` is the centerline of the lane used for overtaking.
    pub fn new(cfg: PlannerConfig, route: Polyline, adjacent: Option<&Polyline>) -> Self {
        let adjacent = adjacent.map(|line| route.project(line.point_at(0.0)).offset);
        Self {
            cfg,
            route,
            adjacent,
            tracker: Tracker::default(),
            overtake: None,
            lead: None,
            cleared: BTreeSet::new(),
            dwell: 0.0,
            last_time: None,
        }
    }

    /// Route plus the left neighbour of the first lane the route uses.
    pub fn for_route(cfg: PlannerConfig, graph: &LaneGraph, route: &Route) -> Self {
        let line = route.polyline(graph);
        let adjacent = route
            .nodes
            .windows(2)
            .next()
            .and_then(|w| {
                graph
                    .edges()
                    .iter()
                    .find(|e| e.from == w[0] && e.to == w[1])
            })
            .and_then(|e| graph.lane(&e.lane))
            .and_then(|lane| lane.left.as_deref())
            .and_then(|left| graph.lane_polyline(left));
        Self::new(cfg, line, adjacent.as_ref())
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn route(&self) -> &Polyline {
        &self.route
    }

    /// Station of `p` along the route.
    pub fn station(&self, p: Vec2) -> f64 {
        self.route.project(p).station
    }

    fn footprint(&self, b: &BoundingBox2D) -> Footprint {
        let mut s = (f64::INFINITY, f64::NEG_INFINITY);
        let mut o = (f64::INFINITY, f64::NEG_INFINITY);
        for c in b.rect().corners() {
            let p = self.route.project(c);
            s = (s.0.min(p.station), s.1.max(p.station));
            o = (o.0.min(p.offset), o.1.max(p.offset));
        }
        let center = self.route.project(b.center);
        Footprint {
            station: s,
            offset: o,
            center_station: center.station,
            center_offset: center.offset,
        }
    }

    fn in_lane(&self, fp: &Footprint, lane_offset: f64) -> bool {
        (fp.center_offset - lane_offset).abs() <= 0.5 * self.cfg.lane_width
    }

    fn window_occupied(&self, fps: &[Footprint], lane_offset: f64, from: f64, to: f64) -> bool {
        fps.iter()
            .any(|fp| self.in_lane(fp, lane_offset) && fp.station.1 >= from && fp.station.0 <= to)
    }

    fn find_lead(
        &self,
        fps: &[Footprint],
        tracks: &[usize],
        ego_front: f64,
        lane_offset: f64,
        now: f64,
    ) -> Option<Lead> {
        fps.iter()
            .zip(tracks)
            .filter(|(fp, _)| self.in_lane(fp, lane_offset) && fp.center_station > ego_front)
            .map(|(fp, &t)| {
                let track = &self.tracker.tracks[t];
                let heading = Vec2::from_angle(self.route.heading_at(fp.center_station));
                let speed = if track.hits >= 2 {
                    track.velocity.dot(heading).max(0.0)
                } else {
                    f64::NAN
                };
                Lead {
                    track: track.id,
                    gap: fp.station.0 - ego_front,
                    speed,
                    front: fp.station.1,
                    seen_at: now,
                }
            })
            .min_by(|a, b| a.gap.total_cmp(&b.gap))
    }

    /// Picks this tick's behavior, highest priority first: emergency brake,
    /// trigger stop, traffic control, overtake, car follow, lane follow.
    pub fn plan_behavior(&mut self, input: &PlanningInput) -> Behavior {
        let cfg = self.cfg;
        let dt = self.last_time.map_or(0.0, |t| (input.now - t).max(0.0));
        self.last_time = Some(input.now);
        let ego = input.ego;
        let proj = self.route.project(ego.pose.position());
        let (s_e, o_e) = (proj.station, proj.offset);
        let hl = ego.half_extents.0;
        let ego_front = s_e + hl;

        let tracks = self.tracker.update(input.fused, input.now);
        let fps: Vec<Footprint> = input.fused.iter().map(|b| self.footprint(b)).collect();

        let corridor = (o_e - 0.5 * cfg.lane_width, o_e + 0.5 * cfg.lane_width);
        let emergency = fps.iter().any(|fp| {
            fp.offset.1 > corridor.0
                && fp.offset.0 < corridor.1
                && fp.station.1 > s_e
                && fp.station.0 - ego_front <= cfg.d_emergency
        });
        if emergency {
            self.overtake = None;
            return Behavior::EmergencyBrake;
        }

        if input
            .fused
            .iter()
            .any(|b| input.zones.iter().any(|z| z.contains(b.center, input.now)))
        {
            self.overtake = None;
            return Behavior::TriggerStop;
        }

        if let Some(sighting) = input.sighting {
            let must_stop = match sighting.signal {
                ControlSignal::Light(LightState::Green) => false,
                ControlSignal::Light(_) => true,
                ControlSignal::StopSign => !self.cleared.contains(&sighting.control_id),
            };
            if must_stop && sighting.distance <= cfg.d_control {
                if sighting.signal == ControlSignal::StopSign && ego.speed < 0.05 {
                    self.dwell += dt;
                    if self.dwell >= cfg.stop_dwell {
                        self.cleared.insert(sighting.control_id);
                        self.dwell = 0.0;
                    }
                } else {
                    self.dwell = 0.0;
                }
                if !self.cleared.contains(&sighting.control_id)
                    || sighting.signal != ControlSignal::StopSign
                {
                    self.overtake = None;
                    return Behavior::StopAtControl {
                        distance: sighting.distance,
                    };
                }
            }
        }

        let own_lead = self.find_lead(&fps, &tracks, ego_front, 0.0, input.now);
        if let Some(lead) = &mut self.lead {
            let seen = fps
                .iter()
                .zip(&tracks)
                .find(|(_, &t)| self.tracker.tracks[t].id == lead.track);
            if let Some((fp, _)) = seen {
                lead.front = fp.station.1;
                lead.seen_at = input.now;
            }
        }

        if let (Some(phase), Some(adj)) = (self.overtake, self.adjacent) {
            let back = s_e - hl - cfg.pass_margin;
            let adjacent_busy = self.window_occupied(&fps, adj, back, ego_front + cfg.d_overtake);
            match phase {
                OvertakePhase::ShiftOut | OvertakePhase::Pass if adjacent_busy => {
                    self.overtake = None;
                    let lead = own_lead.or(self.lead).unwrap_or(Lead {
                        track: u32::MAX,
                        gap: 0.0,
                        speed: 0.0,
                        front: ego_front,
                        seen_at: input.now,
                    });
                    self.lead = Some(lead);
                    return Behavior::CarFollow {
                        lead: lead.track,
                        gap: lead.gap,
                    };
                }
                OvertakePhase::ShiftOut => {
                    if (o_e - adj).abs() < 0.3 {
                        self.overtake = Some(OvertakePhase::Pass);
                    }
                    return Behavior::Overtake {
                        phase: self.overtake.unwrap(),
                    };
                }
                OvertakePhase::Pass => {
                    // The overtaken vehicle may be out of view beside or
                    // behind the ego, so its position is also dead-reckoned.
                    let cleared = self.lead.is_none_or(|l| back >= l.front_at(input.now));
                    let merge_free =
                        !self.window_occupied(&fps, 0.0, back, ego_front + 2.0 * cfg.pass_margin);
                    if cleared && merge_free {
                        self.overtake = Some(OvertakePhase::ShiftIn);
                    }
                    return Behavior::Overtake {
                        phase: self.overtake.unwrap(),
                    };
                }
                OvertakePhase::ShiftIn => {
                    if o_e.abs() < 0.3 {
                        self.overtake = None;
                    } else {
                        return Behavior::Overtake {
                            phase: OvertakePhase::ShiftIn,
                        };
                    }
                }
            }
        }

        if let Some(lead) = own_lead {
            if let Some(adj) = self.adjacent {
                let slow = lead.speed < cfg.v_des - cfg.delta_v;
                let back = s_e - hl - cfg.pass_margin;
                if slow
                    && lead.gap <= cfg.d_overtake
                    && !self.window_occupied(&fps, adj, back, ego_front + cfg.d_overtake)
                {
                    self.overtake = Some(OvertakePhase::ShiftOut);
                    self.lead = Some(lead);
                    return Behavior::Overtake {
                        phase: OvertakePhase::ShiftOut,
                    };
                }
            }
            if lead.gap <= cfg.d_follow {
                self.lead = Some(lead);
                return Behavior::CarFollow {
                    lead: lead.track,
                    gap: lead.gap,
                };
            }
        }
        self.lead = None;
        Behavior::LaneFollow
    }

    /// Waypoints every `waypoint_spacing` meters from the ego's projection,
    /// laterally blended toward the lane the behavior wants.
    pub fn plan_trajectory(&self, behavior: &Behavior, ego: &AgentState) -> Trajectory {
        let cfg = &self.cfg;
        let proj = self.route.project(ego.pose.position());
        let (s_e, o_e) = (proj.station, proj.offset);
        let speed = ego.speed;
        let target_offset = match behavior {
            Behavior::Overtake {
                phase: OvertakePhase::ShiftOut | OvertakePhase::Pass,
            } => self.adjacent.unwrap_or(0.0),
            _ => 0.0,
        };
        let blend = (1.5 * speed).max(10.0);
        let offset_at = |ds: f64| o_e + (target_offset - o_e) * (ds / blend).min(1.0);
        let point = |ds: f64| self.route.offset_point(s_e + ds, offset_at(ds));

        let stop_at = match *behavior {
            Behavior::StopAtControl { distance } => {
                Some(distance - ego.half_extents.0 - cfg.stop_margin)
            }
            Behavior::TriggerStop => Some(speed * speed / (2.0 * cfg.a_max)),
            Behavior::EmergencyBrake => Some(0.0),
            _ => None,
        };

        if let Some(stop) = stop_at {
            let decel = if matches!(behavior, Behavior::StopAtControl { .. }) {
                cfg.a_stop
            } else {
                cfg.a_max
            };
            let ramp = |ds: f64| {
                let remaining = stop - ds;
                if matches!(behavior, Behavior::EmergencyBrake) || remaining <= 0.5 {
                    0.0
                } else {
                    cfg.v_des.min((2.0 * decel * remaining).sqrt())
                }
            };
            let mut waypoints = Vec::new();
            if stop <= cfg.waypoint_spacing {
                let end = if stop > 1e-6 {
                    stop
                } else {
                    cfg.waypoint_spacing
                };
                for ds in [0.0, end] {
                    waypoints.push(Waypoint {
                        position: point(ds),
                        speed: if stop > 1e-6 { ramp(ds) } else { 0.0 },
                    });
                }
                waypoints.last_mut().unwrap().speed = 0.0;
            } else {
                let n = (stop / cfg.waypoint_spacing).ceil() as usize;
                for i in 0..=n {
                    let ds = (i as f64 * cfg.waypoint_spacing).min(stop);
                    waypoints.push(Waypoint {
                        position: point(ds),
                        speed: if i == n { 0.0 } else { ramp(ds) },
                    });
                }
            }
            return Trajectory { waypoints };
        }

        let target_speed = match behavior {
            Behavior::CarFollow { gap, .. } => {
                let lead_speed = self
                    .lead
                    .map(|l| l.speed)
                    .filter(|v| v.is_finite())
                    .unwrap_or(speed);
                follow_speed(cfg, speed, lead_speed, *gap)
            }
            _ => cfg.v_des,
        };
        let length = cfg.horizon.max(2.0 * speed);
        let n = (length / cfg.waypoint_spacing).ceil() as usize;
        let waypoints = (0..=n)
            .map(|i| {
                let ds = i as f64 * cfg.waypoint_spacing;
                Waypoint {
                    position: point(ds),
                    speed: target_speed,
                }
            })
            .collect();
        Trajectory { waypoints }
    }
}
