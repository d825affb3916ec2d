//! Copy a built-in scenario document, edit it and load it back.

use coopsim::scenarios::{builtin_source, load_scenario, Placement, ScenarioError};

fn main() {
    let text = builtin_source("pipeline2").unwrap();
    let mut spec = load_scenario(text).unwrap();
    println!("{}: {}", spec.name, spec.description);

    spec.name = "pipeline2-slow-lead".into();
    let lead = spec.agent_index("lead").unwrap();
    spec.agents[lead].speed = 3.0;
    let edited = spec.to_toml();
    let reloaded = load_scenario(&edited).unwrap();
    assert_eq!(reloaded, spec);
    println!(
        "round trip ok, lead speed now {}",
        reloaded.agents[lead].speed
    );

    // A dangling lane reference is reported with its field path.
    let mut broken = reloaded.clone();
    broken.agents[lead].placement = Placement::Lane {
        lane: "mian".into(),
        station: 45.0,
    };
    match load_scenario(&broken.to_toml()) {
        Err(ScenarioError::Validation(e)) => println!("rejected: {e}"),
        other => println!("unexpected: {other:?}"),
    }
}
