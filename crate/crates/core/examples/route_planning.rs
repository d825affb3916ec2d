//! Build a small lane graph and ask for the shortest route.

use coopsim::geometry::Vec2;
use coopsim::planning::plan_global;
use coopsim::world::LaneGraph;

fn main() {
    let mut g = LaneGraph::new();
    let east = g.add_lane(
        "east",
        &[
            Vec2::new(0.0, 0.0),
            Vec2::new(50.0, 0.0),
            Vec2::new(100.0, 0.0),
        ],
    );
    let north = g.add_lane(
        "north",
        &[
            Vec2::new(50.0, 0.0),
            Vec2::new(50.0, 50.0),
            Vec2::new(50.0, 100.0),
        ],
    );
    let detour = g.add_lane(
        "detour",
        &[
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 120.0),
            Vec2::new(50.0, 120.0),
        ],
    );
    // Junction: the middle of "east" turns north. The detour is 190 m.
    g.add_edge(east[1], north[1], "east");
    g.add_edge(east[0], detour[1], "detour");
    g.add_edge(detour[2], north[2], "detour");

    let route = plan_global(&g, east[0], north[2]).unwrap();
    println!("nodes {:?}, length {:.1} m", route.nodes, route.length());
    for p in route.polyline(&g).points() {
        println!("  ({:.1}, {:.1})", p.x, p.y);
    }
}
