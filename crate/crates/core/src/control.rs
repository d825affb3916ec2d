//! PID tracking of a planned trajectory, with overrides that take the
//! vehicle away from the controller.

use crate::geometry::Vec2;
use crate::planning::{Trajectory, Waypoint};
use crate::world::{AgentState, Control};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// One PID axis. The integral is clamped so that `|ki · ∫e|` never exceeds
/// the output limit, and it is frozen while the output saturates in the
/// direction of the error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidState {
    pub gains: PidGains,
    pub limit: f64,
    pub integral: f64,
    pub prev_error: Option<f64>,
}

impl PidState {
    pub fn new(gains: PidGains, limit: f64) -> Self {
        Self {
            gains,
            limit,
            integral: 0.0,
            prev_error: None,
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    /// Advances the controller by `dt` and returns the clamped output.
    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        debug_assert!(dt > 0.0);
        let PidGains { kp, ki, kd } = self.gains;
        let derivative = self.prev_error.map_or(0.0, |prev| (error - prev) / dt);
        self.prev_error = Some(error);
        let mut integral = self.integral + error * dt;
        if ki > 0.0 {
            let bound = self.limit / ki;
            integral = integral.clamp(-bound, bound);
        }
        let raw = kp * error + ki * integral + kd * derivative;
        if raw.abs() <= self.limit || raw * error <= 0.0 {
            self.integral = integral;
        }
        (kp * error + ki * self.integral + kd * derivative).clamp(-self.limit, self.limit)
    }
}

/// Functional form of [`PidState::step`].
pub fn pid_step(state: &PidState, error: f64, dt: f64) -> (f64, PidState) {
    let mut next = *state;
    let out = next.step(error, dt);
    (out, next)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Override {
    #[default]
    None,
    /// Full braking, wheels straight.
    StopMode,
    /// Steering capacity reduced to the given magnitude in radians.
    SteerLimit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub longitudinal: PidGains,
    pub lateral: PidGains,
    pub a_max: f64,
    pub s_max: f64,
    pub lookahead_min: f64,
    pub lookahead_time: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            longitudinal: PidGains {
                kp: 0.8,
                ki: 0.03,
                kd: 0.05,
            },
            lateral: PidGains {
                kp: 1.2,
                ki: 0.0,
                kd: 0.2,
            },
            a_max: 4.0,
            s_max: 0.6,
            lookahead_min: 3.0,
            lookahead_time: 0.5,
        }
    }
}

const STOP_SNAP: f64 = 0.5;

struct ProfilePoint {
    speed: f64,
    /// `v dv/ds` of the profile at the foot point.
    accel: f64,
    /// Path distance to the first zero-speed waypoint ahead, if any.
    stop_in: Option<f64>,
}

/// Target speed at the foot of `p` on the waypoint chain, linearly
/// interpolated.
fn speed_profile_at(wps: &[Waypoint], p: Vec2) -> ProfilePoint {
    if wps.len() < 2 {
        let speed = wps.first().map_or(0.0, |w| w.speed);
        return ProfilePoint {
            speed,
            accel: 0.0,
            stop_in: (speed <= 0.0).then_some(0.0),
        };
    }
    let mut best = (f64::INFINITY, 0, 0.0);
    for (i, w) in wps.windows(2).enumerate() {
        let d = w[1].position - w[0].position;
        let len2 = d.dot(d);
        let t = if len2 > 0.0 {
            ((p - w[0].position).dot(d) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let dist = p.distance(w[0].position + d * t);
        if dist < best.0 {
            best = (dist, i, t);
        }
    }
    let (_, i, t) = best;
    let (a, b) = (&wps[i], &wps[i + 1]);
    let ds = a.position.distance(b.position);
    let accel = if ds > 1e-6 {
        (b.speed.powi(2) - a.speed.powi(2)) / (2.0 * ds)
    } else {
        0.0
    };
    let mut stop_in = None;
    let mut along = (1.0 - t) * ds;
    for (j, w) in wps.iter().enumerate().skip(i + 1) {
        if w.speed <= 0.0 {
            stop_in = Some(along);
            break;
        }
        if let Some(next) = wps.get(j + 1) {
            along += w.position.distance(next.position);
        }
    }
    ProfilePoint {
        speed: a.speed + t * (b.speed - a.speed),
        accel,
        stop_in,
    }
}

/// Longitudinal and lateral PID pair for one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub config: ControllerConfig,
    pub longitudinal: PidState,
    pub lateral: PidState,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Self {
        Self {
            longitudinal: PidState::new(config.longitudinal, config.a_max),
            lateral: PidState::new(config.lateral, config.s_max),
            config,
        }
    }

    /// Acceleration and steer for one tick. The lateral error is the
    /// pure-pursuit steering angle toward a lookahead point on the trajectory,
    /// which folds cross-track and heading error into one signal.
    pub fn control_step(
        &mut self,
        ego: &AgentState,
        trajectory: &Trajectory,
        ov: Override,
        dt: f64,
    ) -> Control {
        if ov == Override::StopMode {
            self.longitudinal.reset();
            self.lateral.reset();
            return Control {
                accel: -self.config.a_max,
                steer: 0.0,
            };
        }
        if trajectory.waypoints.is_empty() {
            return Control::default();
        }
        let position = ego.pose.position();
        let profile = speed_profile_at(&trajectory.waypoints, position);
        let feedback = self.longitudinal.step(profile.speed - ego.speed, dt);
        let mut accel = profile.accel + feedback;
        // Never brake more gently than stopping at the next halt requires.
        if let Some(d) = profile.stop_in {
            // Inside the last half metre, finish the stop instead of creeping.
            let required = if d > STOP_SNAP {
                -ego.speed.powi(2) / (2.0 * d)
            } else if ego.speed > 0.0 {
                -self.config.a_max
            } else {
                0.0
            };
            accel = accel.min(required);
        }
        let accel = accel.clamp(-self.config.a_max, self.config.a_max);

        let line = trajectory.polyline();
        let steer = if line.points().len() >= 2 {
            let lookahead = self
                .config
                .lookahead_min
                .max(self.config.lookahead_time * ego.speed);
            let station = line.project(position).station;
            let target = ego.pose.to_local(line.point_at(station + lookahead));
            let bearing = target.y.atan2(target.x);
            let pursuit = (2.0 * ego.wheelbase * bearing.sin() / lookahead).atan();
            self.lateral.step(pursuit, dt)
        } else {
            self.lateral.reset();
            0.0
        };
        let steer = match ov {
            Override::SteerLimit(max) => steer.clamp(-max.abs(), max.abs()),
            _ => steer,
        };
        Control { accel, steer }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose2D, Vec2};
    use crate::planning::Waypoint;
    use crate::world::{
        step_kinematics, AgentId, Height, Role, VehicleLimits, DEFAULT_HALF_EXTENTS,
        DEFAULT_WHEELBASE,
    };
    use proptest::prelude::*;

    fn ego(y: f64, yaw: f64, speed: f64) -> AgentState {
        AgentState {
            id: AgentId(0),
            role: Role::Ego,
            pose: Pose2D::new(0.0, y, yaw),
            speed,
            half_extents: DEFAULT_HALF_EXTENTS,
            mount_height: Height::Ground,
            wheelbase: DEFAULT_WHEELBASE,
        }
    }

    /// Straight eastbound trajectory along y = 0 starting at `x0`.
    fn straight(x0: f64, speed: f64) -> Trajectory {
        Trajectory {
            waypoints: (0..40)
                .map(|i| Waypoint {
                    position: Vec2::new(x0 + i as f64, 0.0),
                    speed,
                })
                .collect(),
        }
    }

    #[test]
    fn proportional_only() {
        let pid = PidState::new(
            PidGains {
                kp: 0.5,
                ki: 0.0,
                kd: 0.0,
            },
            10.0,
        );
        let (out, _) = pid_step(&pid, 2.0, 0.05);
        assert_eq!(out, 1.0);
    }

    #[test]
    fn zero_error_stays_zero() {
        let mut pid = PidState::new(ControllerConfig::default().longitudinal, 4.0);
        for _ in 0..1000 {
            assert_eq!(pid.step(0.0, 0.05), 0.0);
        }
    }

    #[test]
    fn integral_is_bounded() {
        let mut pid = PidState::new(ControllerConfig::default().longitudinal, 4.0);
        for _ in 0..10_000 {
            pid.step(50.0, 0.05);
        }
        assert!(pid.gains.ki * pid.integral <= 4.0 + 1e-12);
    }

    #[test]
    fn speed_step_settles_within_four_seconds() {
        // Closed loop on the vehicle's own longitudinal plant, v' = a.
        let dt = 0.05;
        for target in [1.0, 2.0, 5.0, 10.0] {
            let mut pid = PidState::new(ControllerConfig::default().longitudinal, 4.0);
            let mut v: f64 = 0.0;
            let mut settled_at = None;
            for k in 0..400 {
                let a = pid.step(target - v, dt);
                v = (v + a * dt).max(0.0);
                let t = (k + 1) as f64 * dt;
                if (v - target).abs() <= 0.05 * target {
                    settled_at.get_or_insert(t);
                } else {
                    settled_at = None;
                }
            }
            let t = settled_at.expect("never settled");
            assert!(t <= 4.0, "target {target}: settled at {t}");
        }
    }

    #[test]
    fn on_centerline_at_speed_is_quiet() {
        let mut c = Controller::new(ControllerConfig::default());
        let out = c.control_step(
            &ego(0.0, 0.0, 8.0),
            &straight(0.0, 8.0),
            Override::None,
            0.05,
        );
        assert!(out.accel.abs() < 1e-6);
        assert!(out.steer.abs() < 1e-6);
    }

    #[test]
    fn stop_mode_overrides_everything() {
        let mut c = Controller::new(ControllerConfig::default());
        let out = c.control_step(
            &ego(2.0, 0.4, 3.0),
            &straight(0.0, 20.0),
            Override::StopMode,
            0.05,
        );
        assert_eq!(
            out,
            Control {
                accel: -4.0,
                steer: 0.0
            }
        );
    }

    #[test]
    fn left_of_line_steers_right() {
        let mut c = Controller::new(ControllerConfig::default());
        let out = c.control_step(
            &ego(1.0, 0.0, 8.0),
            &straight(0.0, 8.0),
            Override::None,
            0.05,
        );
        // Oracle: the lookahead point (x > 0, y = 0) lies to the right of an
        // eastbound vehicle at y = 1, so the bearing is negative.
        assert!(out.steer < 0.0);
    }

    #[test]
    fn steer_limit_clamps() {
        let mut c = Controller::new(ControllerConfig::default());
        let out = c.control_step(
            &ego(3.0, 0.0, 8.0),
            &straight(0.0, 8.0),
            Override::SteerLimit(0.05),
            0.05,
        );
        assert_eq!(out.steer, -0.05);
    }

    #[test]
    fn offset_decays_on_straight_lane() {
        let dt = 0.05;
        let limits = VehicleLimits::default();
        for speed in [5.0, 8.0, 15.0, 25.0] {
            let mut c = Controller::new(ControllerConfig::default());
            let mut s = ego(0.5, 0.0, speed);
            let mut below_at = None;
            let mut worst_late = 0.0_f64;
            for k in 0..1200 {
                let traj = straight(s.pose.x.floor(), speed);
                let u = c.control_step(&s, &traj, Override::None, dt);
                s = step_kinematics(&s, u, dt, &limits);
                let t = (k + 1) as f64 * dt;
                if s.pose.y.abs() < 0.1 && below_at.is_none() {
                    below_at = Some(t);
                }
                if t > 10.0 {
                    worst_late = worst_late.max(s.pose.y.abs());
                }
            }
            let t = below_at.expect("never converged");
            assert!(t <= 6.0, "speed {speed}: reached 0.1 m at {t}");
            assert!(worst_late < 0.1, "speed {speed}: drifted to {worst_late}");
        }
    }

    proptest! {
        #[test]
        fn outputs_respect_limits(
            y in -5.0f64..5.0,
            yaw in -1.0f64..1.0,
            speed in 0.0f64..25.0,
            target in 0.0f64..25.0,
        ) {
            let mut c = Controller::new(ControllerConfig::default());
            for _ in 0..5 {
                let u = c.control_step(&ego(y, yaw, speed), &straight(0.0, target), Override::None, 0.05);
                prop_assert!(u.accel.abs() <= 4.0);
                prop_assert!(u.steer.abs() <= 0.6);
            }
        }
    }
}
