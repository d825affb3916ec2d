//! A parked truck hides the crossing car from the ego, but not from a pole
//! mounted sensor.

use coopsim::geometry::{Pose2D, Vec2};
use coopsim::sensing::{line_of_sight, visible_targets, world_occluders, SensorConfig};
use coopsim::world::{Height, LaneGraph, Obstacle, Role, SpawnRequest, WorldState};

fn main() {
    let mut world = WorldState::new(LaneGraph::new(), 0.05).unwrap();
    world.static_obstacles.push(Obstacle {
        pose: Pose2D::new(-8.0, 8.0, -std::f64::consts::FRAC_PI_4),
        half_extents: (5.0, 1.25),
        height: Height::Ground,
    });
    let ego = world
        .spawn_by_location(SpawnRequest::vehicle(
            Role::Ego,
            Pose2D::new(-25.0, -1.75, 0.0),
        ))
        .unwrap();
    let incoming = world
        .spawn_by_location(SpawnRequest::vehicle(
            Role::Background,
            Pose2D::new(-1.75, 30.0, -std::f64::consts::FRAC_PI_2),
        ))
        .unwrap();
    let rsu = world
        .spawn_by_location(SpawnRequest::vehicle(Role::Rsu, Pose2D::new(5.5, 5.5, 0.0)))
        .unwrap();

    let occluders = world_occluders(&world);
    let target = world.agents[&incoming].pose.position();
    let from_ego: Vec2 = world.agents[&ego].pose.position();
    println!(
        "ego -> incoming, ground sensor:   LOS {}",
        line_of_sight(from_ego, target, &occluders, Height::Ground)
    );

    let ego_sensor = SensorConfig::new(100.0, 50.0, Height::Ground);
    let rsu_sensor = SensorConfig::new(360.0, 80.0, Height::Elevated);
    println!(
        "ego sees {:?}",
        visible_targets(&world.agents[&ego], &ego_sensor, &world)
    );
    println!(
        "rsu sees {:?}",
        visible_targets(&world.agents[&rsu], &rsu_sensor, &world)
    );
}
