//! The hidden-car junction, with and without shared detections.

use coopsim::harness::{run_episode, RunOverrides};
use coopsim::scenarios::{builtin, Participants};

fn main() {
    let spec = builtin("coop1").unwrap();
    for participants in [Participants::EgoOnly, Participants::Both] {
        let effective = RunOverrides {
            participants: Some(participants),
            ..Default::default()
        }
        .apply(&spec)
        .unwrap();
        let ep = run_episode(&effective, 0).unwrap();
        let first_seen = ep
            .first_tick_where(|r| r.adversary_seen_by_ego)
            .map(|t| format!("{:.2}s", t as f64 * spec.dt));
        let first_stop = ep
            .first_tick_where(|r| r.behavior == "trigger_stop")
            .map(|t| format!("{:.2}s", t as f64 * spec.dt));
        println!(
            "{:<9} collision={:<5} min distance={:.2} m  ego first sees car at {:?}, stops for it at {:?}",
            participants.label(),
            ep.collision,
            ep.min_distance,
            first_seen,
            first_stop,
        );
    }
}
