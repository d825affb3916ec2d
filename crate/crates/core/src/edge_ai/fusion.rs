use crate::geometry::{normalize_angle, rect_intersection_area, Vec2};
use crate::perception::{BoundingBox2D, DetectionFrame};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub iou_threshold: f64,
    /// Frames stamped earlier than `now - stale_horizon` are ignored.
    pub stale_horizon: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.3,
            stale_horizon: 1.0,
        }
    }
}

impl FusionConfig {
    pub fn is_valid(&self) -> bool {
        self.iou_threshold > 0.0 && self.iou_threshold <= 1.0 && self.stale_horizon >= 0.0
    }
}

/// Intersection over union of two oriented boxes.
pub fn oriented_iou(a: &BoundingBox2D, b: &BoundingBox2D) -> f64 {
    let (ra, rb) = (a.rect(), b.rect());
    let inter = rect_intersection_area(&ra, &rb);
    let union = ra.area() + rb.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Late fusion: greedy seed-first clustering over every fresh detection,
/// one averaged box per cluster.
pub fn fuse(frames: &[DetectionFrame], cfg: &FusionConfig, now: f64) -> Vec<BoundingBox2D> {
    let mut fresh: Vec<&DetectionFrame> = frames
        .iter()
        .filter(|f| f.stamp >= now - cfg.stale_horizon)
        .collect();
    fresh.sort_by_key(|f| f.source_id);
    let pool: Vec<BoundingBox2D> = fresh
        .iter()
        .flat_map(|f| f.detections.iter().map(|d| d.bbox))
        .collect();

    let mut taken = vec![false; pool.len()];
    let mut out = Vec::new();
    for i in 0..pool.len() {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let seed = pool[i];
        let mut members = vec![seed];
        for j in i + 1..pool.len() {
            if !taken[j] && oriented_iou(&seed, &pool[j]) >= cfg.iou_threshold {
                taken[j] = true;
                members.push(pool[j]);
            }
        }
        out.push(average(&members));
    }
    out
}

// Averages are taken as offsets from the first member so that a cluster of
// identical boxes reproduces its input bit for bit.
fn average(members: &[BoundingBox2D]) -> BoundingBox2D {
    let first = members[0];
    let k = members.len() as f64;
    let (mut dc, mut dh) = (Vec2::new(0.0, 0.0), (0.0, 0.0));
    let (mut s, mut c) = (0.0, 0.0);
    for m in members {
        dc = dc + (m.center - first.center);
        dh.0 += m.half_extents.0 - first.half_extents.0;
        dh.1 += m.half_extents.1 - first.half_extents.1;
        let dyaw = m.yaw - first.yaw;
        s += dyaw.sin();
        c += dyaw.cos();
    }
    BoundingBox2D {
        center: first.center + dc * (1.0 / k),
        half_extents: (
            first.half_extents.0 + dh.0 / k,
            first.half_extents.1 + dh.1 / k,
        ),
        yaw: normalize_angle(first.yaw + s.atan2(c)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::Detection;
    use crate::world::AgentId;
    use proptest::prelude::*;

    fn bx(x: f64, y: f64, hl: f64, hw: f64, yaw: f64) -> BoundingBox2D {
        BoundingBox2D::new(Vec2::new(x, y), (hl, hw), yaw)
    }

    fn frame(source: u32, stamp: f64, boxes: &[BoundingBox2D]) -> DetectionFrame {
        DetectionFrame {
            source_id: AgentId(source),
            stamp,
            detections: boxes
                .iter()
                .map(|&bbox| Detection {
                    bbox,
                    confidence: 1.0,
                    truth_id: None,
                })
                .collect(),
        }
    }

    /// Grid-sampled IoU at 1e-3 resolution, independent of polygon clipping.
    fn sampled_iou(a: &BoundingBox2D, b: &BoundingBox2D) -> f64 {
        let (ra, rb) = (a.rect(), b.rect());
        let r = 1e-3;
        let xs = [ra.corners(), rb.corners()].concat();
        let (x0, x1) = xs
            .iter()
            .fold((f64::MAX, f64::MIN), |(l, h), p| (l.min(p.x), h.max(p.x)));
        let (y0, y1) = xs
            .iter()
            .fold((f64::MAX, f64::MIN), |(l, h), p| (l.min(p.y), h.max(p.y)));
        let (mut inter, mut union) = (0u64, 0u64);
        let mut y = y0 + r / 2.0;
        while y < y1 {
            let mut x = x0 + r / 2.0;
            while x < x1 {
                let p = Vec2::new(x, y);
                let (ia, ib) = (ra.contains(p), rb.contains(p));
                inter += (ia && ib) as u64;
                union += (ia || ib) as u64;
                x += r;
            }
            y += r;
        }
        inter as f64 / union as f64
    }

    #[test]
    fn iou_identity_and_disjoint() {
        let a = bx(1.0, 2.0, 2.4, 1.0, 0.3);
        assert!((oriented_iou(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(oriented_iou(&a, &bx(20.0, 2.0, 2.4, 1.0, 0.3)), 0.0);
    }

    #[test]
    fn iou_of_offset_squares_is_one_third() {
        let a = bx(0.0, 0.0, 1.0, 1.0, 0.0);
        let b = bx(1.0, 0.0, 1.0, 1.0, 0.0);
        let expected = (1.0 * 2.0) / (2.0 * 2.0 + 2.0 * 2.0 - 2.0);
        assert!((oriented_iou(&a, &b) - expected).abs() < 1e-12);
        assert!((sampled_iou(&a, &b) - expected).abs() < 1e-3);
    }

    #[test]
    fn iou_matches_sampling_for_rotated_boxes() {
        let a = bx(0.0, 0.0, 1.5, 0.8, 0.4);
        let b = bx(0.7, 0.3, 1.2, 0.9, -0.5);
        assert!((oriented_iou(&a, &b) - sampled_iou(&a, &b)).abs() < 2e-3);
    }

    #[test]
    fn separated_boxes_pass_through() {
        let boxes = [
            bx(0.0, 0.0, 2.4, 1.0, 0.0),
            bx(10.0, 0.0, 2.4, 1.0, 0.0),
            bx(0.0, 10.0, 1.0, 1.0, 1.0),
        ];
        let out = fuse(&[frame(1, 0.0, &boxes)], &FusionConfig::default(), 0.0);
        assert_eq!(out, boxes.to_vec());
    }

    #[test]
    fn identical_reports_merge_exactly() {
        let b = bx(3.1, -7.3, 2.4, 1.0, 0.7);
        let frames = [
            frame(2, 0.0, &[b]),
            frame(5, 0.0, &[b]),
            frame(9, 0.0, &[b]),
        ];
        assert_eq!(fuse(&frames, &FusionConfig::default(), 0.0), vec![b]);
    }

    #[test]
    fn two_offset_boxes_average_center() {
        let a = bx(0.0, 0.0, 2.4, 1.0, 0.0);
        let b = bx(0.4, 0.0, 2.4, 1.0, 0.0);
        assert!(sampled_iou(&a, &b) >= 0.3);
        let out = fuse(
            &[frame(1, 0.0, &[a]), frame(2, 0.0, &[b])],
            &FusionConfig::default(),
            0.0,
        );
        assert_eq!(out.len(), 1);
        assert!((out[0].center.x - 0.2).abs() < 1e-12);
        assert!(out[0].center.y.abs() < 1e-12);
    }

    #[test]
    fn stale_frames_are_discarded() {
        let cfg = FusionConfig::default();
        let f = frame(1, 0.0, &[bx(0.0, 0.0, 1.0, 1.0, 0.0)]);
        assert_eq!(fuse(std::slice::from_ref(&f), &cfg, 1.0).len(), 1);
        assert!(fuse(&[f], &cfg, 1.05).is_empty());
    }

    #[test]
    fn yaw_mean_wraps_around_pi() {
        let a = bx(0.0, 0.0, 2.0, 1.0, 3.1);
        let b = bx(0.0, 0.0, 2.0, 1.0, -3.1);
        let out = fuse(&[frame(1, 0.0, &[a, b])], &FusionConfig::default(), 0.0);
        assert_eq!(out.len(), 1);
        assert!((out[0].yaw.abs() - std::f64::consts::PI).abs() < 1e-9);
    }

    /// Objects sit on a 20 m grid; every source sees each one with small jitter,
    /// so same-object reports overlap heavily and different objects never touch.
    fn scene() -> impl Strategy<Value = (Vec<DetectionFrame>, usize)> {
        (1usize..6, 1usize..5).prop_flat_map(|(objects, sources)| {
            let obs = (
                any::<bool>(),
                -0.1f64..0.1,
                -0.1f64..0.1,
                -0.05f64..0.05,
                -0.03f64..0.03,
            );
            (
                prop::collection::vec((-3.1f64..3.1, 0.8f64..2.5, 0.5f64..1.2), objects),
                prop::collection::vec(prop::collection::vec(obs, objects), sources),
            )
                .prop_map(move |(truth, seen)| {
                    let frames: Vec<DetectionFrame> = seen
                        .iter()
                        .enumerate()
                        .map(|(s, row)| {
                            let boxes: Vec<BoundingBox2D> = row
                                .iter()
                                .zip(&truth)
                                .enumerate()
                                .filter(|(_, ((keep, ..), _))| *keep || s == 0)
                                .map(|(o, ((_, dx, dy, de, dyaw), (yaw, hl, hw)))| {
                                    bx(20.0 * o as f64 + dx, *dy, hl + de, hw + de, yaw + dyaw)
                                })
                                .collect();
                            frame(s as u32 + 1, 0.0, &boxes)
                        })
                        .collect();
                    (frames, objects)
                })
        })
    }

    fn same_set(a: &[BoundingBox2D], b: &[BoundingBox2D]) -> bool {
        a.len() == b.len()
            && a.iter().all(|p| {
                b.iter().any(|q| {
                    (p.center - q.center).norm() < 1e-9
                        && (p.half_extents.0 - q.half_extents.0).abs() < 1e-9
                        && (p.half_extents.1 - q.half_extents.1).abs() < 1e-9
                        && normalize_angle(p.yaw - q.yaw).abs() < 1e-9
                })
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn fusion_is_idempotent((frames, _) in scene()) {
            let cfg = FusionConfig::default();
            let once = fuse(&frames, &cfg, 0.0);
            let twice = fuse(&[frame(0, 0.0, &once)], &cfg, 0.0);
            prop_assert!(same_set(&once, &twice));
        }

        #[test]
        fn fusion_ignores_source_order((frames, _) in scene(), rot in 0usize..4) {
            let cfg = FusionConfig::default();
            let mut shuffled = frames.clone();
            let n = shuffled.len();
            shuffled.rotate_left(rot % n);
            for (i, f) in shuffled.iter_mut().enumerate() {
                f.source_id = AgentId((i + 1) as u32);
            }
            prop_assert!(same_set(&fuse(&frames, &cfg, 0.0), &fuse(&shuffled, &cfg, 0.0)));
        }

        #[test]
        fn fused_count_is_bounded((frames, objects) in scene()) {
            let pooled: usize = frames.iter().map(|f| f.detections.len()).sum();
            let out = fuse(&frames, &FusionConfig::default(), 0.0);
            prop_assert!(out.len() <= pooled);
            prop_assert_eq!(out.len(), objects);
        }
    }
}
