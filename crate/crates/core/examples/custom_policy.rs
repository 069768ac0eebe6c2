//! A native mediation policy: the median of the requests, which ignores a
//! single extreme request. Registered next to the built-ins and bound to
//! one zone through the model.
//!
//! ```bash
//! cargo run --example custom_policy
//! ```

use std::error::Error;
use std::sync::Arc;

use goalmed::model::Goal;
use goalmed::pipeline::MediatedRequest;
use goalmed::policies::{GroupedRequests, MediationContext, PolicyError};
use goalmed::registry::MediationPolicy;
use goalmed::scenario::Scenario;
use goalmed::{react, Snapshot};

#[derive(Debug)]
struct Median;

impl MediationPolicy for Median {
    fn mediate(
        &self,
        group: &GroupedRequests,
        _: &MediationContext,
    ) -> Result<MediatedRequest, PolicyError> {
        let mut values: Vec<f64> = group.values().collect();
        if values.is_empty() {
            return Err(PolicyError::EmptyGroup);
        }
        values.sort_by(f64::total_cmp);
        let mid = values.len() / 2;
        let value = if values.len().is_multiple_of(2) {
            (values[mid - 1] + values[mid]) / 2.0
        } else {
            values[mid]
        };
        Ok(MediatedRequest {
            zone: group.zone.clone(),
            instance: group.instance.clone(),
            value,
        })
    }
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenarios/smart_home.json"
    );
    let mut scenario = Scenario::load(path)?;
    scenario.environment.zones[0].mediation_policy = Some("median".into());
    scenario
        .environment
        .users
        .push(goalmed::document::UserDecl {
            id: "carol".into(),
            allowed_zones: vec!["livingroom".into()],
        });
    scenario.expected = None;
    let (mut snapshot, mut registry): (Snapshot, _) = scenario.build()?;
    registry.register_mediation("median", Arc::new(Median));

    snapshot.goals.set(Goal {
        user: "carol".into(),
        zone: "livingroom".into(),
        instance: "roomTemp".into(),
        value: 30.0,
    });
    let result = react(&snapshot, &registry)?;
    let temp = result
        .mediated
        .iter()
        .find(|m| m.instance == "roomTemp")
        .ok_or("no roomTemp target")?;
    println!("median of 20, 26, 30 = {}", temp.value);
    assert_eq!(temp.value, 26.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
