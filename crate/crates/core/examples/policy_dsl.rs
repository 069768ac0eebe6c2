//! Writes a mediation policy in the DSL, prints it canonically, evaluates it
//! directly and then installs it as the default policy.
//!
//! ```bash
//! cargo run --example policy_dsl
//! ```

use std::error::Error;

use goalmed::dsl::{eval_mediation, parse_policy, print_policy};
use goalmed::model::Season;
use goalmed::policies::{GroupedRequests, MediationContext};
use goalmed::react;
use goalmed::scenario::Scenario;

const SOURCE: &str = r#"
mediation lowest_wins   # the most frugal request decides
if property_type == "temp" then clamp(min(requests), 18, 22)
else avg(requests)
"#;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let program = parse_policy(SOURCE)?;
    println!("{}", print_policy(&program));

    let group = GroupedRequests {
        zone: "livingroom".into(),
        instance: "roomTemp".into(),
        entries: vec![(20.0, "alice".into()), (26.0, "bob".into())],
    };
    let ctx = MediationContext {
        policy_id: "lowest_wins".into(),
        property_type: "temp".into(),
        sensed_value: Some(22.0),
        season: Some(Season::Winter),
    };
    let direct = eval_mediation(&program, &group, &ctx)?;
    println!("direct evaluation: {}", direct.value);
    assert_eq!(direct.value, 20.0);

    // Errors carry a position.
    let err = parse_policy("clamp(candidate, 18 22)").unwrap_err();
    println!("syntax error: {err}");

    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenarios/smart_home.json"
    );
    let (snapshot, mut registry) = Scenario::load(path)?.build()?;
    registry.register_program(program)?;
    registry.set_default_mediation("lowest_wins")?;
    let result = react(&snapshot, &registry)?;
    let ac = result
        .actions
        .iter()
        .find(|a| a.actuator == "ac")
        .ok_or("no ac action")?;
    println!("ac with lowest_wins: {}", ac.value);
    assert_eq!(ac.value, 20.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
