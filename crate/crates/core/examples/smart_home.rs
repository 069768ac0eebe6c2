//! Builds the living-room model in code, lets two users disagree about the
//! temperature and prints what one reaction decides.
//!
//! ```bash
//! cargo run --example smart_home
//! ```

use std::error::Error;

use goalmed::document::ActuatorDecl;
use goalmed::document::{GoalDecl, InstanceDecl, SensorDecl, SensorValueDecl, UserDecl, ZoneDecl};
use goalmed::{react, EnvironmentDocument, PolicyRegistry, Snapshot};

fn actuator(id: &str, property_type: &str) -> ActuatorDecl {
    ActuatorDecl {
        id: id.into(),
        property_type: property_type.into(),
        valid_range: None,
        binary: None,
    }
}

fn instance(id: &str, property_type: &str, actuators: &[&str], sensor: &str) -> InstanceDecl {
    InstanceDecl {
        zone: "livingroom".into(),
        id: id.into(),
        property_type: property_type.into(),
        actuators: actuators.iter().map(|s| s.to_string()).collect(),
        sensors: vec![sensor.into()],
    }
}

fn goal(user: &str, instance: &str, value: f64) -> GoalDecl {
    GoalDecl {
        user: user.into(),
        zone: "livingroom".into(),
        instance: instance.into(),
        value,
    }
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let doc = EnvironmentDocument {
        property_types: vec!["light".into(), "temp".into()],
        sensors: vec![
            SensorDecl {
                id: "brightness".into(),
                property_type: "light".into(),
            },
            SensorDecl {
                id: "temperature".into(),
                property_type: "temp".into(),
            },
        ],
        sensor_values: vec![
            SensorValueDecl {
                sensor: "brightness".into(),
                value: 20.0,
            },
            SensorValueDecl {
                sensor: "temperature".into(),
                value: 22.0,
            },
        ],
        actuators: vec![
            actuator("smallLight", "light"),
            actuator("mainLight", "light"),
            actuator("cornerLight", "light"),
            actuator("ac", "temp"),
        ],
        zones: vec![ZoneDecl {
            id: "livingroom".into(),
            mediation_policy: None,
        }],
        property_instances: vec![
            instance(
                "studyingLight",
                "light",
                &["cornerLight", "mainLight"],
                "brightness",
            ),
            instance(
                "movieLight",
                "light",
                &["cornerLight", "smallLight"],
                "brightness",
            ),
            instance("readingLight", "light", &["smallLight"], "brightness"),
            instance("roomTemp", "temp", &["ac"], "temperature"),
        ],
        users: vec![
            UserDecl {
                id: "alice".into(),
                allowed_zones: vec!["livingroom".into()],
            },
            UserDecl {
                id: "bob".into(),
                allowed_zones: vec!["livingroom".into()],
            },
        ],
        goals: vec![
            goal("alice", "movieLight", 20.0),
            goal("alice", "roomTemp", 20.0),
            goal("bob", "studyingLight", 80.0),
            goal("bob", "roomTemp", 26.0),
        ],
        context: vec![],
    };

    let snapshot = Snapshot::from_document(&doc)?;
    let registry = PolicyRegistry::with_builtins();
    let result = react(&snapshot, &registry)?;

    println!("target state:");
    for m in &result.mediated {
        println!("  {:<14} {}", m.instance, m.value);
    }
    println!("actions:");
    for a in &result.actions {
        println!("  {:<14} {}", a.actuator, a.value);
    }

    let ac = result
        .actions
        .iter()
        .find(|a| a.actuator == "ac")
        .ok_or("no ac action")?;
    assert_eq!(ac.value, 23.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
