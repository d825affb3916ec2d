//! Push frames through a lossy, delayed link and watch when they arrive.

use coopsim::edge_ai::{Channel, ChannelConfig, LatencyModel};
use coopsim::perception::DetectionFrame;
use coopsim::world::AgentId;

fn main() {
    let dt = 0.05;
    let mut channel = Channel::new(ChannelConfig {
        latency: "det:0.3".parse::<LatencyModel>().unwrap(),
        drop_rate: 0.3,
        seed: 7,
    });

    for tick in 0..40u64 {
        let now = tick as f64 * dt;
        channel.send(
            DetectionFrame {
                source_id: AgentId(1),
                stamp: now,
                detections: Vec::new(),
            },
            now,
        );
        for frame in channel.poll(now).unwrap() {
            let age = ((now - frame.stamp) / dt).round();
            println!(
                "t={now:.2}s  got frame stamped {:.2}s ({age} ticks old)",
                frame.stamp
            );
        }
    }

    let s = channel.stats();
    println!(
        "sent {}  delivered {}  dropped {}  in flight {}",
        s.sent,
        s.delivered,
        s.dropped,
        channel.in_flight()
    );
}
