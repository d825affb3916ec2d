//! Planar geometry shared by every subsystem: poses, oriented rectangles,
//! convex polygon clipping, segment/rectangle tests and polylines.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Position in meters plus heading in radians, yaw kept in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.yaw)
    }

    /// Applies `offset` expressed in this pose's frame.
    pub fn compose(&self, offset: &Pose2D) -> Pose2D {
        let p = self.position() + Vec2::new(offset.x, offset.y).rotate(self.yaw);
        Pose2D::new(p.x, p.y, self.yaw + offset.yaw)
    }

    /// Expresses a world point in this pose's frame.
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.position()).rotate(-self.yaw)
    }
}

/// Rectangle with arbitrary orientation, described by its center,
/// half-length along the heading and half-width across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect {
    pub center: Vec2,
    pub half_length: f64,
    pub half_width: f64,
    pub yaw: f64,
}

impl OrientedRect {
    pub fn new(center: Vec2, half_length: f64, half_width: f64, yaw: f64) -> Self {
        Self {
            center,
            half_length,
            half_width,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn from_pose(pose: &Pose2D, half_extents: (f64, f64)) -> Self {
        Self::new(pose.position(), half_extents.0, half_extents.1, pose.yaw)
    }

    pub fn axes(&self) -> (Vec2, Vec2) {
        let u = Vec2::from_angle(self.yaw);
        (u, u.perp())
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let a = u * self.half_length;
        let b = v * self.half_width;
        let c = self.center;
        [c + a + b, c - a + b, c - a - b, c + a - b]
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_length * self.half_width
    }

    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotate(-self.yaw)
    }

    /// Closed containment.
    pub fn contains(&self, p: Vec2) -> bool {
        let q = self.to_local(p);
        q.x.abs() <= self.half_length && q.y.abs() <= self.half_width
    }

    /// Containment in the open interior, shrunk by `eps`.
    pub fn contains_strict(&self, p: Vec2, eps: f64) -> bool {
        let q = self.to_local(p);
        q.x.abs() < self.half_length - eps && q.y.abs() < self.half_width - eps
    }

    /// Grows both half-extents by `margin`.
    pub fn inflate(&self, margin: f64) -> Self {
        Self::new(
            self.center,
            self.half_length + margin,
            self.half_width + margin,
            self.yaw,
        )
    }
}

/// True when the two rectangles share interior area (touching edges do not count).
pub fn rects_overlap(a: &OrientedRect, b: &OrientedRect) -> bool {
    const EPS: f64 = 1e-12;
    let ca = a.corners();
    let cb = b.corners();
    let (au, av) = a.axes();
    let (bu, bv) = b.axes();
    for axis in [au, av, bu, bv] {
        let (amin, amax) = project(&ca, axis);
        let (bmin, bmax) = project(&cb, axis);
        if amax <= bmin + EPS || bmax <= amin + EPS {
            return false;
        }
    }
    true
}

fn project(points: &[Vec2], axis: Vec2) -> (f64, f64) {
    points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let d = p.dot(axis);
            (lo.min(d), hi.max(d))
        })
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn segments_intersect(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let d1 = (a1 - a0).cross(b0 - a0);
    let d2 = (a1 - a0).cross(b1 - a0);
    let d3 = (b1 - b0).cross(a0 - b0);
    let d4 = (b1 - b0).cross(a1 - b0);
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0 && !(d1 == 0.0 && d2 == 0.0 && d3 == 0.0 && d4 == 0.0)
}

pub fn segment_segment_distance(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

/// Euclidean gap between two rectangles, zero when they touch or overlap.
pub fn rect_distance(a: &OrientedRect, b: &OrientedRect) -> f64 {
    if rects_overlap(a, b) {
        return 0.0;
    }
    let ca = a.corners();
    let cb = b.corners();
    let mut best = f64::INFINITY;
    for i in 0..4 {
        for j in 0..4 {
            let d = segment_segment_distance(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4]);
            best = best.min(d);
        }
    }
    best
}

/// Shoelace area; positive for counter-clockwise polygons.
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        acc += poly[i].cross(poly[(i + 1) % poly.len()]);
    }
    0.5 * acc
}

/// Sutherland-Hodgman clip of `subject` by a convex counter-clockwise `clip` polygon.
pub fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let e0 = clip[i];
        let e1 = clip[(i + 1) % clip.len()];
        let edge = e1 - e0;
        let inside = |p: Vec2| edge.cross(p - e0) >= 0.0;
        let input = std::mem::take(&mut output);
        for k in 0..input.len() {
            let cur = input[k];
            let prev = input[(k + input.len() - 1) % input.len()];
            let cur_in = inside(cur);
            let prev_in = inside(prev);
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, e0, e1));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, e0, e1));
            }
        }
    }
    output
}

fn line_intersection(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> Vec2 {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = r.cross(s);
    if denom == 0.0 {
        return p1;
    }
    let t = (q0 - p0).cross(s) / denom;
    p0 + r * t
}

pub fn rect_intersection_area(a: &OrientedRect, b: &OrientedRect) -> f64 {
    let clipped = clip_convex(&a.corners(), &b.corners());
    polygon_area(&clipped).max(0.0)
}

/// Parameter interval `[t0, t1]` of `p0 + t (p1 - p0)`, `t ∈ [0, 1]`,
/// lying inside the closed rectangle, if any (Liang-Barsky in the box frame).
pub fn clip_segment_to_rect(p0: Vec2, p1: Vec2, rect: &OrientedRect) -> Option<(f64, f64)> {
    let a = rect.to_local(p0);
    let b = rect.to_local(p1);
    let d = b - a;
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    let checks = [
        (-d.x, a.x + rect.half_length),
        (d.x, rect.half_length - a.x),
        (-d.y, a.y + rect.half_width),
        (d.y, rect.half_width - a.y),
    ];
    for (p, q) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

/// True when the open segment `(p0, p1)` passes through the open interior of
/// `rect`. Grazing a corner or sliding along an edge does not count.
pub fn segment_enters_interior(p0: Vec2, p1: Vec2, rect: &OrientedRect) -> bool {
    const EPS: f64 = 1e-9;
    let Some((t0, t1)) = clip_segment_to_rect(p0, p1, rect) else {
        return false;
    };
    let len = p0.distance(p1);
    if (t1 - t0) * len <= EPS {
        return false;
    }
    let mid = p0 + (p1 - p0) * (0.5 * (t0 + t1));
    rect.contains_strict(mid, EPS)
}

/// Axis-aligned box, used for spawn regions and trigger zones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn is_valid(&self) -> bool {
        self.min.x <= self.max.x && self.min.y <= self.max.y
    }
}

/// Piecewise-linear path with cumulative arc length, used for lane
/// centerlines, routes and trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the foot point.
    pub station: f64,
    /// Signed lateral offset, positive to the left of the direction of travel.
    pub offset: f64,
    pub segment: usize,
}

impl Polyline {
    /// Needs at least one point; repeated consecutive points are dropped.
    pub fn new(points: Vec<Vec2>) -> Self {
        assert!(!points.is_empty(), "polyline needs at least one point");
        let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().is_none_or(|q| q.distance(p) > 0.0) {
                pts.push(p);
            }
        }
        let mut cumulative = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in pts.windows(2) {
            acc += w[0].distance(w[1]);
            cumulative.push(acc);
        }
        Self {
            points: pts,
            cumulative,
        }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn segment_direction(&self, i: usize) -> Vec2 {
        if self.points.len() < 2 {
            return Vec2::new(1.0, 0.0);
        }
        let i = i.min(self.points.len() - 2);
        let d = self.points[i + 1] - self.points[i];
        d * (1.0 / d.norm())
    }

    fn segment_at(&self, station: f64) -> usize {
        if self.points.len() < 2 {
            return 0;
        }
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&station).unwrap())
        {
            Ok(i) => i.min(self.points.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.points.len() - 2),
        }
    }

    /// Point at arc length `station`; extrapolates linearly past either end.
    pub fn point_at(&self, station: f64) -> Vec2 {
        let i = self.segment_at(station);
        self.points[i] + self.segment_direction(i) * (station - self.cumulative[i])
    }

    pub fn heading_at(&self, station: f64) -> f64 {
        let d = self.segment_direction(self.segment_at(station));
        d.y.atan2(d.x)
    }

    /// Point at `station` displaced laterally by `offset` (left positive).
    pub fn offset_point(&self, station: f64, offset: f64) -> Vec2 {
        let d = self.segment_direction(self.segment_at(station));
        self.point_at(station) + d.perp() * offset
    }

    /// Nearest foot point; stations beyond the ends extrapolate along the
    /// first and last segments.
    pub fn project(&self, p: Vec2) -> Projection {
        if self.points.len() < 2 {
            let d = p - self.points[0];
            return Projection {
                station: d.x,
                offset: d.y,
                segment: 0,
            };
        }
        let last = self.points.len() - 2;
        let mut best = Projection {
            station: 0.0,
            offset: 0.0,
            segment: 0,
        };
        let mut best_dist = f64::INFINITY;
        for i in 0..=last {
            let a = self.points[i];
            let dir = self.segment_direction(i);
            let seg_len = self.cumulative[i + 1] - self.cumulative[i];
            let along = (p - a).dot(dir);
            let lo = if i == 0 { f64::NEG_INFINITY } else { 0.0 };
            let hi = if i == last { f64::INFINITY } else { seg_len };
            let t = along.clamp(lo, hi);
            let foot = a + dir * t;
            let dist = p.distance(foot);
            if dist < best_dist {
                best_dist = dist;
                best = Projection {
                    station: self.cumulative[i] + t,
                    offset: dir.cross(p - a),
                    segment: i,
                };
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn angle_wraps_into_half_open_interval() {
        assert_abs_diff_eq!(normalize_angle(-PI), PI);
        assert_abs_diff_eq!(normalize_angle(PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(0.5), 0.5);
        assert_abs_diff_eq!(normalize_angle(-7.0), -7.0 + 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn touching_rectangles_do_not_overlap() {
        let a = OrientedRect::new(Vec2::new(0.0, 0.0), 1.0, 1.0, 0.0);
        let b = OrientedRect::new(Vec2::new(2.0, 0.0), 1.0, 1.0, 0.0);
        assert!(!rects_overlap(&a, &b));
        assert_eq!(rect_distance(&a, &b), 0.0);
        let c = OrientedRect::new(Vec2::new(1.9, 0.0), 1.0, 1.0, 0.3);
        assert!(rects_overlap(&a, &c));
    }

    #[test]
    fn gap_between_unit_boxes() {
        let a = OrientedRect::new(Vec2::new(0.0, 0.0), 1.0, 1.0, 0.0);
        let b = OrientedRect::new(Vec2::new(5.0, 0.0), 1.0, 1.0, 0.0);
        assert_abs_diff_eq!(rect_distance(&a, &b), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn grazing_a_corner_is_not_interior() {
        let r = OrientedRect::new(Vec2::new(0.0, 0.0), 1.0, 1.0, 0.0);
        assert!(!segment_enters_interior(
            Vec2::new(-2.0, 0.0),
            Vec2::new(0.0, 2.0),
            &r
        ));
        assert!(!segment_enters_interior(
            Vec2::new(-3.0, 1.0),
            Vec2::new(3.0, 1.0),
            &r
        ));
        assert!(segment_enters_interior(
            Vec2::new(-3.0, 0.5),
            Vec2::new(3.0, 0.5),
            &r
        ));
    }

    #[test]
    fn projection_reports_signed_offset() {
        let line = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)]);
        let p = line.project(Vec2::new(4.0, 1.5));
        assert_abs_diff_eq!(p.station, 4.0);
        assert_abs_diff_eq!(p.offset, 1.5);
        let behind = line.project(Vec2::new(-3.0, -1.0));
        assert_abs_diff_eq!(behind.station, -3.0);
        assert_abs_diff_eq!(behind.offset, -1.0);
        assert_eq!(line.point_at(12.0), Vec2::new(12.0, 0.0));
    }

    #[test]
    fn clipping_two_offset_squares() {
        let a = OrientedRect::new(Vec2::new(0.0, 0.0), 1.0, 1.0, 0.0);
        let b = OrientedRect::new(Vec2::new(1.0, 0.0), 1.0, 1.0, 0.0);
        assert_abs_diff_eq!(rect_intersection_area(&a, &b), 2.0, epsilon = 1e-12);
    }
}
