//! Start 1.5 m off a straight lane at 5 m/s and let the controller pull the
//! car onto the centerline at 10 m/s.

use coopsim::control::{Controller, ControllerConfig, Override};
use coopsim::geometry::{Pose2D, Vec2};
use coopsim::planning::{Trajectory, Waypoint};
use coopsim::world::{step_kinematics, LaneGraph, Role, SpawnRequest, VehicleLimits, WorldState};

fn main() {
    let dt = 0.05;
    let mut world = WorldState::new(LaneGraph::new(), dt).unwrap();
    let id = world
        .spawn_by_location(
            SpawnRequest::vehicle(Role::Ego, Pose2D::new(0.0, 1.5, 0.0)).with_speed(5.0),
        )
        .unwrap();
    let trajectory = Trajectory {
        waypoints: (0..=300)
            .map(|i| Waypoint {
                position: Vec2::new(i as f64, 0.0),
                speed: 10.0,
            })
            .collect(),
    };
    let mut controller = Controller::new(ControllerConfig::default());
    let limits = VehicleLimits::default();
    let mut ego = world.agents[&id].clone();
    for tick in 0..=160 {
        if tick % 20 == 0 {
            println!(
                "t={:4.1}s  x={:6.2}  offset={:+.3}  speed={:5.2}",
                tick as f64 * dt,
                ego.pose.x,
                ego.pose.y,
                ego.speed
            );
        }
        let u = controller.control_step(&ego, &trajectory, Override::None, dt);
        ego = step_kinematics(&ego, u, dt, &limits);
    }
}
