//! Three agents report overlapping boxes; fusion merges them per object.

use coopsim::edge_ai::{fuse, oriented_iou, FusionConfig};
use coopsim::geometry::Vec2;
use coopsim::perception::{BoundingBox2D, Detection, DetectionFrame};
use coopsim::world::AgentId;

fn det(x: f64, y: f64, yaw: f64) -> Detection {
    Detection {
        bbox: BoundingBox2D::new(Vec2::new(x, y), (2.4, 0.9), yaw),
        confidence: 1.0,
        truth_id: None,
    }
}

fn frame(source: u32, detections: Vec<Detection>) -> DetectionFrame {
    DetectionFrame {
        source_id: AgentId(source),
        stamp: 0.0,
        detections,
    }
}

fn main() {
    let frames = vec![
        // The ego only sees the car ahead.
        frame(0, vec![det(20.0, 0.0, 0.0)]),
        // A spectator sees it slightly offset, plus the car behind the truck.
        frame(1, vec![det(20.3, 0.1, 0.02), det(-1.75, 40.0, -1.57)]),
        // The road side unit sees both.
        frame(2, vec![det(19.8, -0.1, -0.01), det(-1.6, 39.7, -1.55)]),
    ];
    let a = &frames[0].detections[0].bbox;
    let b = &frames[1].detections[0].bbox;
    println!(
        "IoU of the ego's and spectator's view of the lead: {:.3}",
        oriented_iou(a, b)
    );

    let fused = fuse(&frames, &FusionConfig::default(), 0.0);
    println!("{} detections in, {} objects out", 5, fused.len());
    for b in &fused {
        println!(
            "  center ({:.2}, {:.2}) yaw {:.3} extents {:?}",
            b.center.x, b.center.y, b.yaw, b.half_extents
        );
    }
}
