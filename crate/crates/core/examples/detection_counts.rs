//! Objects known to the ego per tick at a busy junction, helped by spectator
//! vehicles or by road side units, drawn as an SVG.

use coopsim::harness::{run_episode, write_detection_svg};
use coopsim::scenarios::builtin;

fn main() {
    let mut series = Vec::new();
    let mut dt = 0.05;
    for name in ["coop3", "coop4"] {
        let spec = builtin(name).unwrap();
        dt = spec.dt;
        let ep = run_episode(&spec, 0).unwrap();
        let ego_only: Vec<f64> = ep.rows.iter().map(|r| r.ego_only_count as f64).collect();
        let fused: Vec<f64> = ep.rows.iter().map(|r| r.fused_count as f64).collect();
        println!(
            "{name}: mean objects per tick, ego alone {:.2}, fused {:.2}",
            ego_only.iter().sum::<f64>() / ego_only.len() as f64,
            ep.mean_fused_count()
        );
        if series.is_empty() {
            series.push(("ego only".to_string(), ego_only));
        }
        series.push((format!("fused ({name})"), fused));
    }
    let path = std::env::temp_dir().join("coopsim-detections.svg");
    write_detection_svg(&series, dt, &path).unwrap();
    println!("wrote {}", path.display());
}
