use coopsim::harness::run_episode_observed;
use coopsim::scenarios::{builtin, builtin_source, load_scenario_file, BUILTIN_NAMES};
use coopsim::sensing::visible_targets;

#[test]
fn shipped_documents_load_from_disk() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in BUILTIN_NAMES {
        let path = dir.join(format!("{name}.toml"));
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            builtin_source(name).unwrap()
        );
        let spec = load_scenario_file(&path).unwrap();
        assert_eq!(spec, builtin(name).unwrap());
        spec.validate().unwrap();
    }
}

/// Before the incoming car first enters the trigger zone, parked traffic hides
/// it from the spectator at least half the time, never from the pole sensor.
#[test]
fn dense_junctions_blind_the_spectator_but_not_the_rsu() {
    for name in ["coop5", "coop6", "coop7", "coop8"] {
        let spec = builtin(name).unwrap();
        let inc = spec.agent_index("incoming").unwrap();
        let spectator = spec.agent_index("spectator").unwrap();
        let rsu = spec.agent_index("rsu").unwrap();
        let zone = spec.trigger_zones[0].area();
        let (mut ticks, mut spectator_blind, mut rsu_blind) = (0, 0, 0);
        let mut entered = false;
        run_episode_observed(&spec, 0, |v| {
            let target = &v.world.agents[&v.agent_ids[inc]];
            entered |= zone.contains(target.pose.position());
            if entered {
                return;
            }
            ticks += 1;
            for (i, blind) in [(spectator, &mut spectator_blind), (rsu, &mut rsu_blind)] {
                let observer = &v.world.agents[&v.agent_ids[i]];
                let sensor = spec.agents[i].sensor.as_ref().unwrap();
                if !visible_targets(observer, sensor, v.world).contains(&target.id) {
                    *blind += 1;
                }
            }
        })
        .unwrap();
        assert!(ticks > 0, "{name}");
        assert!(
            2 * spectator_blind >= ticks,
            "{name}: {spectator_blind}/{ticks}"
        );
        assert_eq!(rsu_blind, 0, "{name}");
    }
}

#[test]
fn every_optional_section_parses() {
    let text = r#"
name = "kitchen-sink"
dt = 0.1
weather = 0.8

[termination]
timeout = 5.0
collision = false

[map]
lanes = [
  { id = "east", points = [[0.0, 0.0], [50.0, 0.0], [100.0, 0.0]] },
  { id = "north", points = [[50.0, 0.0], [50.0, 50.0], [50.0, 100.0]] },
]
connections = [{ from = { lane = "east", index = 1 }, to = { lane = "north", index = 1 } }]

[[map.controls]]
kind = "stop_sign"
lane = "east"
position = { x = 40.0, y = 0.0 }

[ego]
participants = "rsu"
perception = "noisy"
fusion = { iou_threshold = 0.5 }
planner = { v_des = 6.0 }
controller = { a_max = 3.0 }

[channel.default]
latency = { model = "uniform_random", lo = 0.1, hi = 0.2 }
drop_rate = 0.1

[[channel.links]]
source = "pole"
latency = { model = "none" }

[[trigger_zones]]
min = { x = 45.0, y = -5.0 }
max = { x = 55.0, y = 5.0 }
t_on = 1.0
t_off = 3.0

[[agents]]
name = "ego"
role = "ego"
placement = { lane = "east", station = 5.0 }
speed = 5.0
sensor = { fov = 90.0, range = 40.0, mount_offset = { x = 1.0, y = 0.0, yaw = 0.0 } }
motion = { type = "planner", goal = { lane = "north", index = -1 } }

[[agents]]
name = "pole"
role = "rsu"
placement = { x = 55.0, y = 5.0, yaw = 0.0 }
sensor = { fov = 360.0, range = 60.0, mount_height = "elevated" }
perception = { mode = "noisy", p_detect = 0.5, sigma_pos = 0.1, sigma_ext = 0.0 }

[[agents]]
name = "walker"
role = "pedestrian"
placement = { lane = "north", station = 20.0 }
half_extents = [0.3, 0.3]
motion = { type = "scripted", schedule = [{ t = 2.0, speed = 1.0 }] }

[[background]]
min = { x = 60.0, y = -1.0 }
max = { x = 90.0, y = 1.0 }
count = 2
speed = 4.0
"#;
    let spec = coopsim::scenarios::load_scenario(text).unwrap();
    assert_eq!(spec.channel.for_source("pole").drop_rate, 0.0);
    assert_eq!(spec.channel.for_source("other").drop_rate, 0.1);
    assert_eq!(
        coopsim::scenarios::load_scenario(&spec.to_toml()).unwrap(),
        spec
    );
    let graph = spec.lane_graph();
    let route = spec.ego_route(&graph).unwrap();
    // From the east lane's first node: 50 m east, the 50 m connector, 50 m north.
    assert_eq!(route.length(), 150.0);
    let ep = coopsim::harness::run_episode(&spec, 0).unwrap();
    assert_eq!(ep.ticks, 50);
}
