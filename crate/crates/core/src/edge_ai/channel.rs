use crate::perception::DetectionFrame;
use crate::world::AgentId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Slack on `deliver_time ≤ now`, absorbing float error of `tick × dt` clocks.
pub const DELIVERY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum LatencyModel {
    #[default]
    None,
    Deterministic {
        delay: f64,
    },
    UniformRandom {
        lo: f64,
        hi: f64,
    },
}

impl LatencyModel {
    pub fn is_valid(&self) -> bool {
        match *self {
            LatencyModel::None => true,
            LatencyModel::Deterministic { delay } => delay >= 0.0 && delay.is_finite(),
            LatencyModel::UniformRandom { lo, hi } => 0.0 <= lo && lo <= hi && hi.is_finite(),
        }
    }

    /// Mean delay in seconds.
    pub fn mean(&self) -> f64 {
        match *self {
            LatencyModel::None => 0.0,
            LatencyModel::Deterministic { delay } => delay,
            LatencyModel::UniformRandom { lo, hi } => 0.5 * (lo + hi),
        }
    }
}

/// `none`, `det:<seconds>` or `uni:<lo>:<hi>`.
impl FromStr for LatencyModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| format!("bad number {t:?} in latency spec {s:?}"))
        };
        let model = match parts.as_slice() {
            ["none"] => LatencyModel::None,
            ["det", d] => LatencyModel::Deterministic { delay: num(d)? },
            ["uni", lo, hi] => LatencyModel::UniformRandom {
                lo: num(lo)?,
                hi: num(hi)?,
            },
            _ => return Err(format!("unrecognized latency spec {s:?}")),
        };
        if !model.is_valid() {
            return Err(format!("latency spec {s:?} out of range"));
        }
        Ok(model)
    }
}

impl fmt::Display for LatencyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatencyModel::None => write!(f, "none"),
            LatencyModel::Deterministic { delay } => write!(f, "det:{delay}"),
            LatencyModel::UniformRandom { lo, hi } => write!(f, "uni:{lo}:{hi}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub latency: LatencyModel,
    #[serde(default)]
    pub drop_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ChannelConfig {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn is_valid(&self) -> bool {
        self.latency.is_valid() && (0.0..=1.0).contains(&self.drop_rate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InFlightFrame {
    pub frame: DetectionFrame,
    pub send_time: f64,
    pub deliver_time: f64,
    /// Decided at send time; dropped frames are never delivered.
    pub dropped: bool,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelEventKind {
    Sent,
    Dropped,
    Delivered,
}

/// Audit record of one channel transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEvent {
    pub kind: ChannelEventKind,
    pub seq: u64,
    pub source: AgentId,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChannelStats {
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("poll time {now} is earlier than previous poll at {last}")]
    ClockRegression { now: f64, last: f64 },
}

/// One directed link into a receiver. Latency and loss are sampled when a
/// frame is sent, from the channel's own random stream, in send order.
#[derive(Debug, Clone)]
pub struct Channel {
    config: ChannelConfig,
    rng: ChaCha8Rng,
    queue: Vec<InFlightFrame>,
    next_seq: u64,
    last_poll: Option<f64>,
    stats: ChannelStats,
    events: Vec<ChannelEvent>,
}

impl Channel {
    pub fn new(config: ChannelConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            queue: Vec::new(),
            next_seq: 0,
            last_poll: None,
            stats: ChannelStats::default(),
            events: Vec::new(),
        }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn stats(&self) -> ChannelStats {
        self.stats
    }

    /// Frames sent, not dropped and not yet delivered.
    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn send(&mut self, frame: DetectionFrame, now: f64) {
        let dropped = self.rng.random_bool(self.config.drop_rate);
        let latency = match self.config.latency {
            LatencyModel::None => 0.0,
            LatencyModel::Deterministic { delay } => delay,
            LatencyModel::UniformRandom { lo, hi } => {
                if hi > lo {
                    self.rng.random_range(lo..=hi)
                } else {
                    lo
                }
            }
        };
        self.enqueue(frame, now, latency, dropped);
    }

    /// Sends with an explicit latency and no loss, bypassing the random
    /// stream. Meant for tests and replay tooling.
    pub fn send_with_latency(&mut self, frame: DetectionFrame, now: f64, latency: f64) {
        self.enqueue(frame, now, latency.max(0.0), false);
    }

    fn enqueue(&mut self, frame: DetectionFrame, now: f64, latency: f64, dropped: bool) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.stats.sent += 1;
        let source = frame.source_id;
        self.events.push(ChannelEvent {
            kind: ChannelEventKind::Sent,
            seq,
            source,
            time: now,
        });
        if dropped {
            self.stats.dropped += 1;
            self.events.push(ChannelEvent {
                kind: ChannelEventKind::Dropped,
                seq,
                source,
                time: now,
            });
            return;
        }
        self.queue.push(InFlightFrame {
            frame,
            send_time: now,
            deliver_time: now + latency,
            dropped,
            seq,
        });
    }

    /// Every frame due by `now`, ordered by delivery time then send order.
    pub fn poll(&mut self, now: f64) -> Result<Vec<DetectionFrame>, ChannelError> {
        if let Some(last) = self.last_poll {
            if now < last {
                return Err(ChannelError::ClockRegression { now, last });
            }
        }
        self.last_poll = Some(now);
        let (mut due, pending): (Vec<InFlightFrame>, Vec<InFlightFrame>) = self
            .queue
            .drain(..)
            .partition(|f| f.deliver_time <= now + DELIVERY_TOLERANCE);
        self.queue = pending;
        due.sort_by(|a, b| {
            a.deliver_time
                .total_cmp(&b.deliver_time)
                .then(a.seq.cmp(&b.seq))
        });
        self.stats.delivered += due.len() as u64;
        for f in &due {
            self.events.push(ChannelEvent {
                kind: ChannelEventKind::Delivered,
                seq: f.seq,
                source: f.frame.source_id,
                time: now,
            });
        }
        Ok(due.into_iter().map(|f| f.frame).collect())
    }

    /// Takes the audit events recorded since the last call.
    pub fn drain_events(&mut self) -> Vec<ChannelEvent> {
        std::mem::take(&mut self.events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(source: u32, stamp: f64) -> DetectionFrame {
        DetectionFrame {
            source_id: AgentId(source),
            stamp,
            detections: Vec::new(),
        }
    }

    #[test]
    fn identity_channel_delivers_immediately() {
        let mut ch = Channel::new(ChannelConfig::ideal());
        ch.send(frame(1, 0.5), 0.5);
        let out = ch.poll(0.5).unwrap();
        assert_eq!(out, vec![frame(1, 0.5)]);
        assert_eq!(ch.stats().dropped, 0);
    }

    #[test]
    fn fixed_latency_lands_six_ticks_later() {
        let dt = 0.05;
        let mut ch = Channel::new(ChannelConfig {
            latency: LatencyModel::Deterministic { delay: 0.3 },
            ..ChannelConfig::ideal()
        });
        let mut arrivals = Vec::new();
        for tick in 0..400u64 {
            let now = tick as f64 * dt;
            ch.send(frame(1, now), now);
            for f in ch.poll(now).unwrap() {
                let sent_tick = (f.stamp / dt).round() as u64;
                arrivals.push(tick - sent_tick);
            }
        }
        assert_eq!(arrivals.len(), 394);
        assert!(arrivals.iter().all(|&d| d == 6));
    }

    #[test]
    fn polling_early_returns_nothing() {
        let mut ch = Channel::new(ChannelConfig {
            latency: LatencyModel::Deterministic { delay: 1.0 },
            ..ChannelConfig::ideal()
        });
        ch.send(frame(1, 0.0), 0.0);
        assert!(ch.poll(0.5).unwrap().is_empty());
        assert_eq!(ch.in_flight(), 1);
        assert_eq!(ch.poll(1.0).unwrap().len(), 1);
    }

    #[test]
    fn shorter_latency_overtakes() {
        let mut ch = Channel::new(ChannelConfig::ideal());
        ch.send_with_latency(frame(1, 0.0), 0.0, 0.4);
        ch.send_with_latency(frame(2, 0.0), 0.0, 0.1);
        let out = ch.poll(0.2).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].source_id, AgentId(2));
        assert_eq!(ch.poll(0.4).unwrap()[0].source_id, AgentId(1));
    }

    #[test]
    fn dropped_frames_never_arrive() {
        let mut ch = Channel::new(ChannelConfig {
            drop_rate: 1.0,
            ..ChannelConfig::ideal()
        });
        for i in 0..10 {
            ch.send(frame(1, i as f64), i as f64);
        }
        assert!(ch.poll(100.0).unwrap().is_empty());
        assert_eq!(ch.stats().dropped, 10);
    }

    #[test]
    fn clock_regression_is_an_error() {
        let mut ch = Channel::new(ChannelConfig::ideal());
        ch.poll(1.0).unwrap();
        assert_eq!(
            ch.poll(0.9),
            Err(ChannelError::ClockRegression {
                now: 0.9,
                last: 1.0
            })
        );
    }

    #[test]
    fn drop_frequency_within_binomial_band() {
        let mut ch = Channel::new(ChannelConfig {
            drop_rate: 0.3,
            seed: 2024,
            ..ChannelConfig::ideal()
        });
        for i in 0..10_000 {
            ch.send(frame(1, 0.0), i as f64 * 0.05);
        }
        let dropped = ch.stats().dropped as i64;
        // 2σ for Binomial(10⁴, 0.3) is 2·√2100 ≈ 91.7.
        assert!((dropped - 3000).abs() <= 90, "dropped {dropped}");
    }

    #[test]
    fn latency_spec_parsing() {
        assert_eq!("none".parse::<LatencyModel>().unwrap(), LatencyModel::None);
        assert_eq!(
            "det:0.3".parse::<LatencyModel>().unwrap(),
            LatencyModel::Deterministic { delay: 0.3 }
        );
        assert_eq!(
            "uni:0.1:0.4".parse::<LatencyModel>().unwrap(),
            LatencyModel::UniformRandom { lo: 0.1, hi: 0.4 }
        );
        assert!("uni:0.4:0.1".parse::<LatencyModel>().is_err());
        assert!("fast".parse::<LatencyModel>().is_err());
        let m = LatencyModel::UniformRandom { lo: 0.1, hi: 0.4 };
        assert_eq!(m.to_string().parse::<LatencyModel>().unwrap(), m);
    }

    proptest::proptest! {
        #[test]
        fn sends_are_conserved(
            drop_rate in 0.0f64..1.0,
            lo in 0.0f64..0.5,
            width in 0.0f64..0.5,
            seed in proptest::prelude::any::<u64>(),
        ) {
            let mut ch = Channel::new(ChannelConfig {
                latency: LatencyModel::UniformRandom { lo, hi: lo + width },
                drop_rate,
                seed,
            });
            for tick in 0..100 {
                let now = tick as f64 * 0.05;
                ch.send(frame(1, now), now);
                ch.poll(now).unwrap();
                let s = ch.stats();
                proptest::prop_assert_eq!(s.sent, s.delivered + s.dropped + ch.in_flight() as u64);
            }
        }

        #[test]
        fn fixed_latency_keeps_send_order(delay in 0.0f64..1.0, seed in proptest::prelude::any::<u64>()) {
            let mut ch = Channel::new(ChannelConfig {
                latency: LatencyModel::Deterministic { delay },
                drop_rate: 0.2,
                seed,
            });
            let mut stamps = Vec::new();
            for tick in 0..100 {
                let now = tick as f64 * 0.05;
                ch.send(frame(1, now), now);
                stamps.extend(ch.poll(now).unwrap().into_iter().map(|f| f.stamp));
            }
            stamps.extend(ch.poll(10.0).unwrap().into_iter().map(|f| f.stamp));
            proptest::prop_assert!(stamps.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
