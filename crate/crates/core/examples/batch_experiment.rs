//! Success rate of the dense junction under each cooperation setting, and the
//! output files a batch writes.

use coopsim::harness::{emit_outputs, run_batch, RunOverrides};
use coopsim::scenarios::{builtin, Participants};

fn main() {
    let spec = builtin("coop5").unwrap();
    let n = 10;
    for participants in [
        Participants::EgoOnly,
        Participants::Vehicle,
        Participants::Rsu,
        Participants::Both,
    ] {
        let ov = RunOverrides {
            participants: Some(participants),
            ..Default::default()
        };
        let run = run_batch(&spec, n, 0, &ov).unwrap();
        println!(
            "{:<9} success {:5.1}%  min distance {:.2} ± {:.2} m",
            participants.label(),
            run.stats.success_rate,
            run.stats.min_distance_mean.unwrap_or(f64::NAN),
            run.stats.min_distance_std.unwrap_or(f64::NAN),
        );
        if participants == Participants::Both {
            let dir = std::env::temp_dir().join("coopsim-batch-example");
            for path in emit_outputs(&run, &dir).unwrap().iter().rev().take(3) {
                println!("wrote {}", path.display());
            }
        }
    }
}
