//! Per-zone request validation. A DSL validator bound to the living room
//! filters out-of-range light requests; mediation and action validation
//! reject inconsistent plans as a whole.
//!
//! ```bash
//! cargo run --example validators
//! ```

use std::error::Error;

use goalmed::dsl::parse_policy;
use goalmed::model::Goal;
use goalmed::pipeline::collect_requests;
use goalmed::pipeline::{validate_actions, validate_mediation, Action, MediatedRequest};
use goalmed::scenario::Scenario;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenarios/smart_home.json"
    );
    let (mut snapshot, mut registry) = Scenario::load(path)?.build()?;

    let validator = parse_policy(
        "validation dim_only\nif property_type == \"light\" then candidate <= 50 else true",
    )?;
    registry.register_program(validator)?;
    registry.bind_validator("livingroom", "dim_only")?;

    snapshot.goals.set(Goal {
        user: "alice".into(),
        zone: "livingroom".into(),
        instance: "readingLight".into(),
        value: 90.0,
    });
    let (requests, valid) = collect_requests(&snapshot, &registry);
    println!("{} requests, {} valid", requests.len(), valid.len());
    for r in requests.iter().filter(|r| !valid.contains(r)) {
        println!(
            "  filtered: {} wants {}/{} = {}",
            r.user, r.zone, r.instance, r.value
        );
    }
    assert_eq!(valid.len(), 3);

    let conflicting = [
        MediatedRequest {
            zone: "livingroom".into(),
            instance: "roomTemp".into(),
            value: 21.0,
        },
        MediatedRequest {
            zone: "livingroom".into(),
            instance: "roomTemp".into(),
            value: 23.0,
        },
    ];
    let violations = validate_mediation(&conflicting, &snapshot, &registry).unwrap_err();
    println!(
        "mediation violations: {}",
        serde_json::to_string(&violations)?
    );

    let duplicated = [
        Action {
            actuator: "ac".into(),
            value: 23.0,
        },
        Action {
            actuator: "ac".into(),
            value: 23.0,
        },
    ];
    assert!(validate_actions(&duplicated, &snapshot).is_ok());
    println!("exact duplicate actions are accepted");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
