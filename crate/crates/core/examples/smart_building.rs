//! Loads the two-wing building scenario and shows how the shared odd-room
//! AC ends up at 22 although room_E_1 asked for 18.
//!
//! ```bash
//! cargo run --example smart_building
//! ```

use std::error::Error;

use goalmed::pipeline::{associate_actions, collect_requests, mediate_requests};
use goalmed::policies::{split_equal, threshold_binary};
use goalmed::scenario::Scenario;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenarios/smart_building.json"
    );
    let scenario = Scenario::load(path)?;
    let (snapshot, registry) = scenario.build()?;

    let (requests, valid) = collect_requests(&snapshot, &registry);
    for r in requests.iter().filter(|r| !valid.contains(r)) {
        println!(
            "dropped: {} on {}/{} ({})",
            r.user, r.zone, r.instance, r.value
        );
    }

    let mediated = mediate_requests(&valid, &snapshot, &registry)?;
    for m in &mediated {
        println!("target: {}/{} = {}", m.zone, m.instance, m.value);
    }

    // room_E_1 splits 18 over [acOdd_E, heater]; the heater is binary.
    let raw = split_equal(18.0, &["acOdd_E".to_owned(), "heater".to_owned()])?;
    let heater = snapshot
        .model
        .actuator("heater")
        .and_then(|a| a.binary)
        .ok_or("heater is not binary")?;
    println!(
        "room_E_1 raw: acOdd_E = {}, heater = {}",
        raw[0].value,
        threshold_binary(18.0, "heater", heater).value
    );

    let actions = associate_actions(&mediated, &snapshot, &registry)?;
    for a in &actions {
        println!("action: {} = {}", a.actuator, a.value);
    }
    let ac = actions
        .iter()
        .find(|a| a.actuator == "acOdd_E")
        .ok_or("no acOdd_E action")?;
    assert_eq!(ac.value, 22.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
