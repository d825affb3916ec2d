//! Physical sensing: field of view, range, line-of-sight occlusion and
//! GPS localization through a constant-velocity Kalman filter.

use crate::geometry::{segment_enters_interior, OrientedRect, Pose2D, Vec2};
use crate::world::{AgentId, AgentState, Height, WorldState};
use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_PROCESS_NOISE: f64 = 0.1;
pub const DEFAULT_GPS_SIGMA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    /// Full opening angle in degrees, `(0, 360]`.
    pub fov: f64,
    pub range: f64,
    #[serde(default)]
    pub mount_offset: Pose2D,
    #[serde(default)]
    pub mount_height: Height,
}

impl SensorConfig {
    pub fn new(fov: f64, range: f64, mount_height: Height) -> Self {
        Self {
            fov,
            range,
            mount_offset: Pose2D::default(),
            mount_height,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.fov > 0.0 && self.fov <= 360.0 && self.range > 0.0
    }

    pub fn pose(&self, agent: &AgentState) -> Pose2D {
        agent.pose.compose(&self.mount_offset)
    }

    fn in_fov(&self, sensor_pose: &Pose2D, target: Vec2) -> bool {
        if self.fov >= 360.0 {
            return true;
        }
        let local = sensor_pose.to_local(target);
        let bearing = local.y.atan2(local.x).abs();
        bearing <= (self.fov * 0.5).to_radians() + 1e-12
    }
}

/// An occluding footprint. `owner` identifies the agent it belongs to, so
/// observer and target can be skipped without rebuilding the list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occluder {
    pub rect: OrientedRect,
    pub height: Height,
    pub owner: Option<AgentId>,
}

impl Occluder {
    pub fn blocks(&self, sensor_height: Height) -> bool {
        !(sensor_height == Height::Elevated && self.height == Height::Ground)
    }
}

/// Static obstacles plus every occluding agent footprint in the world.
pub fn world_occluders(world: &WorldState) -> Vec<Occluder> {
    let statics = world.static_obstacles.iter().map(|o| Occluder {
        rect: o.footprint(),
        height: o.height,
        owner: None,
    });
    let agents = world
        .agents
        .values()
        .filter(|a| a.role.occludes())
        .map(|a| Occluder {
            rect: a.footprint(),
            height: Height::Ground,
            owner: Some(a.id),
        });
    statics.chain(agents).collect()
}

/// True iff the open segment `(p0, p1)` crosses the interior of no occluder
/// that blocks a sensor at `sensor_height`.
pub fn line_of_sight(p0: Vec2, p1: Vec2, occluders: &[Occluder], sensor_height: Height) -> bool {
    line_of_sight_excluding(p0, p1, occluders, sensor_height, &[])
}

pub(crate) fn line_of_sight_excluding(
    p0: Vec2,
    p1: Vec2,
    occluders: &[Occluder],
    sensor_height: Height,
    skip: &[AgentId],
) -> bool {
    occluders
        .iter()
        .filter(|o| o.blocks(sensor_height))
        .filter(|o| o.owner.is_none_or(|id| !skip.contains(&id)))
        .all(|o| !segment_enters_interior(p0, p1, &o.rect))
}

/// Ids of agents whose centers are within weather-scaled range, inside the
/// FOV cone and in line of sight. Sorted by distance, ties by id.
pub fn visible_targets(
    observer: &AgentState,
    sensor: &SensorConfig,
    world: &WorldState,
) -> Vec<AgentId> {
    let occluders = world_occluders(world);
    visible_targets_with(observer, sensor, world, &occluders)
}

pub(crate) fn visible_targets_with(
    observer: &AgentState,
    sensor: &SensorConfig,
    world: &WorldState,
    occluders: &[Occluder],
) -> Vec<AgentId> {
    let pose = sensor.pose(observer);
    let origin = pose.position();
    let reach = sensor.range * world.weather_factor();
    let mut hits: Vec<(f64, AgentId)> = world
        .agents
        .values()
        .filter(|t| t.id != observer.id && t.role.is_detectable())
        .filter_map(|t| {
            let c = t.pose.position();
            let d = origin.distance(c);
            (d <= reach).then_some((d, t, c))
        })
        .filter(|(_, _, c)| sensor.in_fov(&pose, *c))
        .filter(|(_, t, c)| {
            *c == origin
                || line_of_sight_excluding(
                    origin,
                    *c,
                    occluders,
                    sensor.mount_height,
                    &[observer.id, t.id],
                )
        })
        .map(|(d, t, _)| (d, t.id))
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    hits.into_iter().map(|(_, id)| id).collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum SensingError {
    #[error("innovation covariance is not invertible")]
    SingularInnovation,
}

/// State estimate `[x, y, vx, vy]` with its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationEstimate {
    pub position: Vec2,
    pub velocity: Vec2,
    pub covariance: Matrix4<f64>,
}

impl LocalizationEstimate {
    pub fn new(position: Vec2, velocity: Vec2, covariance: Matrix4<f64>) -> Self {
        Self {
            position,
            velocity,
            covariance,
        }
    }

    fn state(&self) -> Vector4<f64> {
        Vector4::new(
            self.position.x,
            self.position.y,
            self.velocity.x,
            self.velocity.y,
        )
    }

    pub fn position_trace(&self) -> f64 {
        self.covariance[(0, 0)] + self.covariance[(1, 1)]
    }
}

/// One predict + GPS update cycle. `process_noise` is the white-acceleration
/// spectral density q; the discretized Q follows the usual CV-model form.
pub fn kalman_update(
    est: &LocalizationEstimate,
    measurement: Vec2,
    gps_sigma: f64,
    process_noise: f64,
    dt: f64,
) -> Result<LocalizationEstimate, SensingError> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    let q = process_noise;
    let (d3, d2) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0);
    #[rustfmt::skip]
    let qm = Matrix4::new(
        d3 * q, 0.0,    d2 * q, 0.0,
        0.0,    d3 * q, 0.0,    d2 * q,
        d2 * q, 0.0,    dt * q, 0.0,
        0.0,    d2 * q, 0.0,    dt * q,
    );
    let x_pred = f * est.state();
    let p_pred = f * est.covariance * f.transpose() + qm;

    #[rustfmt::skip]
    let h = Matrix2x4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
    );
    let r = Matrix2::identity() * (gps_sigma * gps_sigma);
    let s = h * p_pred * h.transpose() + r;
    let s_inv = s
        .try_inverse()
        .filter(|_| s.determinant().abs() > 1e-300)
        .ok_or(SensingError::SingularInnovation)?;
    let k = p_pred * h.transpose() * s_inv;
    let innovation = Vector2::new(measurement.x, measurement.y) - h * x_pred;
    let x_new = x_pred + k * innovation;
    // Joseph form keeps the covariance positive semidefinite.
    let i_kh = Matrix4::identity() - k * h;
    let p_joseph = i_kh * p_pred * i_kh.transpose() + k * r * k.transpose();
    let p_new = (p_joseph + p_joseph.transpose()) * 0.5;

    Ok(LocalizationEstimate {
        position: Vec2::new(x_new[0], x_new[1]),
        velocity: Vec2::new(x_new[2], x_new[3]),
        covariance: p_new,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::world::{LaneGraph, Obstacle, Role, SpawnRequest};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn empty_world() -> WorldState {
        WorldState::new(LaneGraph::new(), 0.05).unwrap()
    }

    fn occluder(x: f64, y: f64, hl: f64, hw: f64, height: Height) -> Occluder {
        Occluder {
            rect: OrientedRect::new(Vec2::new(x, y), hl, hw, 0.0),
            height,
            owner: None,
        }
    }

    #[test]
    fn empty_scene_is_clear() {
        assert!(line_of_sight(
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 3.0),
            &[],
            Height::Ground
        ));
    }

    #[test]
    fn full_blockage() {
        let occ = [occluder(5.0, 0.0, 1.0, 4.0, Height::Ground)];
        assert!(!line_of_sight(
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            &occ,
            Height::Ground
        ));
        assert!(line_of_sight(
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            &occ,
            Height::Elevated
        ));
        let tall = [occluder(5.0, 0.0, 1.0, 4.0, Height::Elevated)];
        assert!(!line_of_sight(
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            &tall,
            Height::Elevated
        ));
    }

    /// Samples the open segment every millimetre and reports whether any
    /// sample falls strictly inside the rectangle.
    fn sampled_blocked(p0: Vec2, p1: Vec2, rect: &OrientedRect) -> bool {
        let len = p0.distance(p1);
        let n = (len / 1e-3).ceil() as usize;
        (1..n).any(|i| {
            let t = i as f64 / n as f64;
            rect.contains_strict(p0 + (p1 - p0) * t, 0.0)
        })
    }

    #[test]
    fn corner_graze_agrees_with_sampling() {
        let occ = occluder(0.0, 0.0, 1.0, 1.0, Height::Ground);
        let (p0, p1) = (Vec2::new(-3.0, -1.0), Vec2::new(1.0, 3.0));
        assert!(!sampled_blocked(p0, p1, &occ.rect));
        assert!(line_of_sight(p0, p1, &[occ], Height::Ground));
        assert!(line_of_sight(p1, p0, &[occ], Height::Ground));
    }

    #[test]
    fn lone_observer_sees_nothing() {
        let mut w = empty_world();
        let id = w
            .spawn_by_location(SpawnRequest::vehicle(Role::Ego, Pose2D::new(0.0, 0.0, 0.0)))
            .unwrap();
        let sensor = SensorConfig::new(90.0, 50.0, Height::Ground);
        assert!(visible_targets(w.agent(id).unwrap(), &sensor, &w).is_empty());
    }

    #[test]
    fn range_boundary_is_closed_and_scaled_by_weather() {
        let mut w = empty_world();
        let ego = w
            .spawn_by_location(SpawnRequest::vehicle(Role::Ego, Pose2D::new(0.0, 0.0, 0.0)))
            .unwrap();
        let t = w
            .spawn_by_location(SpawnRequest::vehicle(
                Role::Background,
                Pose2D::new(20.0, 0.0, 0.0),
            ))
            .unwrap();
        let sensor = SensorConfig::new(90.0, 40.0, Height::Ground);
        w.set_weather(0.5).unwrap();
        assert_eq!(visible_targets(w.agent(ego).unwrap(), &sensor, &w), vec![t]);
        w.set_weather(0.49).unwrap();
        assert!(visible_targets(w.agent(ego).unwrap(), &sensor, &w).is_empty());
    }

    #[test]
    fn parked_truck_hides_target_from_ground_sensor_only() {
        let mut w = empty_world();
        let ego = w
            .spawn_by_location(SpawnRequest::vehicle(Role::Ego, Pose2D::new(0.0, 0.0, 0.0)))
            .unwrap();
        let t = w
            .spawn_by_location(SpawnRequest::vehicle(
                Role::Background,
                Pose2D::new(30.0, 0.0, 0.0),
            ))
            .unwrap();
        w.static_obstacles.push(Obstacle {
            pose: Pose2D::new(15.0, 0.0, 0.0),
            half_extents: (5.0, 1.25),
            height: Height::Ground,
        });
        let ground = SensorConfig::new(120.0, 60.0, Height::Ground);
        let elevated = SensorConfig::new(120.0, 60.0, Height::Elevated);
        let observer = w.agent(ego).unwrap();
        assert!(!line_of_sight(
            observer.pose.position(),
            Vec2::new(30.0, 0.0),
            &world_occluders(&w)
                .into_iter()
                .filter(|o| o.owner.is_none())
                .collect::<Vec<_>>(),
            Height::Ground
        ));
        assert!(visible_targets(observer, &ground, &w).is_empty());
        assert_eq!(visible_targets(observer, &elevated, &w), vec![t]);
    }

    #[test]
    fn fov_is_measured_about_mount_heading() {
        let mut w = empty_world();
        let ego = w
            .spawn_by_location(SpawnRequest::vehicle(Role::Ego, Pose2D::new(0.0, 0.0, 0.0)))
            .unwrap();
        let left = w
            .spawn_by_location(SpawnRequest::vehicle(
                Role::Background,
                Pose2D::new(0.0, 20.0, 0.0),
            ))
            .unwrap();
        let mut sensor = SensorConfig::new(60.0, 50.0, Height::Ground);
        assert!(visible_targets(w.agent(ego).unwrap(), &sensor, &w).is_empty());
        sensor.mount_offset = Pose2D::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        assert_eq!(
            visible_targets(w.agent(ego).unwrap(), &sensor, &w),
            vec![left]
        );
    }

    #[test]
    fn rsu_is_not_a_target() {
        let mut w = empty_world();
        let ego = w
            .spawn_by_location(SpawnRequest::vehicle(Role::Ego, Pose2D::new(0.0, 0.0, 0.0)))
            .unwrap();
        w.spawn_by_location(SpawnRequest::vehicle(
            Role::Rsu,
            Pose2D::new(10.0, 0.0, 0.0),
        ))
        .unwrap();
        let sensor = SensorConfig::new(360.0, 50.0, Height::Ground);
        assert!(visible_targets(w.agent(ego).unwrap(), &sensor, &w).is_empty());
    }

    fn prior(var: f64) -> LocalizationEstimate {
        LocalizationEstimate::new(
            Vec2::new(1.0, 2.0),
            Vec2::new(0.5, -0.5),
            Matrix4::identity() * var,
        )
    }

    #[test]
    fn consistent_noiseless_measurement_leaves_estimate() {
        let est = prior(1.0);
        let dt = 0.1;
        let predicted = Vec2::new(1.0 + 0.5 * dt, 2.0 - 0.5 * dt);
        let next = kalman_update(&est, predicted, 0.0, 0.0, dt).unwrap();
        assert_abs_diff_eq!(next.position.x, predicted.x, epsilon = 1e-12);
        assert_abs_diff_eq!(next.position.y, predicted.y, epsilon = 1e-12);
        assert_abs_diff_eq!(next.velocity.x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(next.velocity.y, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_noise_is_singular() {
        let est = prior(0.0);
        assert_eq!(
            kalman_update(&est, Vec2::new(0.0, 0.0), 0.0, 0.0, 0.05),
            Err(SensingError::SingularInnovation)
        );
    }

    #[test]
    fn update_contracts_position_uncertainty() {
        let est = prior(4.0);
        let next = kalman_update(&est, Vec2::new(1.2, 1.9), 0.5, 0.1, 0.05).unwrap();
        assert!(next.position_trace() <= est.position_trace());
    }

    #[test]
    fn stationary_truth_converges() {
        // Monte-Carlo oracle: 200 seeded runs, 95th percentile of the final
        // position error after 1000 updates with σ_gps = 1 m. The truth is
        // static, so the matched filter carries no process noise.
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut errors: Vec<f64> = (0..200u64)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut est = LocalizationEstimate::new(
                    Vec2::new(0.0, 0.0),
                    Vec2::new(0.0, 0.0),
                    Matrix4::identity() * 10.0,
                );
                for _ in 0..1000 {
                    let z = Vec2::new(normal.sample(&mut rng), normal.sample(&mut rng));
                    est = kalman_update(&est, z, 1.0, 0.0, 0.05).unwrap();
                }
                est.position.norm()
            })
            .collect();
        errors.sort_by(f64::total_cmp);
        let p95 = errors[(errors.len() * 95) / 100];
        assert!(p95 < 0.2, "95th percentile error {p95}");
    }
}
