mod common;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use goalmed::document::EnvironmentDocument;
use goalmed::pipeline::{
    associate_actions, collect_requests, mediate_requests, react, validate_actions,
    validate_mediation, Request,
};
use goalmed::registry::SPLIT_EQUAL_MIN_UNBOUNDED;
use goalmed::{PolicyRegistry, Snapshot};

const CASES: u64 = 1000;

fn cases() -> impl Iterator<Item = (EnvironmentDocument, Snapshot)> {
    (0..CASES).map(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let doc = common::random_document(&mut rng);
        let snapshot = Snapshot::from_document(&doc).unwrap();
        (doc, snapshot)
    })
}

/// The three filtering clauses, evaluated directly on the document.
fn admissible(doc: &EnvironmentDocument, r: &Request) -> bool {
    let authorised = doc
        .users
        .iter()
        .any(|u| u.id == r.user && u.allowed_zones.contains(&r.zone));
    let exists = doc
        .property_instances
        .iter()
        .any(|pi| pi.zone == r.zone && pi.id == r.instance);
    authorised && exists
}

#[test]
fn filtering_is_sound_and_complete() {
    let registry = PolicyRegistry::with_builtins();
    for (doc, snapshot) in cases() {
        let (requests, valid) = collect_requests(&snapshot, &registry);
        assert_eq!(requests.len(), doc.goals.len());
        let oracle: Vec<&Request> = requests.iter().filter(|r| admissible(&doc, r)).collect();
        assert_eq!(valid.iter().collect::<Vec<_>>(), oracle);
    }
}

#[test]
fn reactions_are_deterministic_and_compose_from_stages() {
    let registry = PolicyRegistry::with_builtins();
    let mut succeeded = 0;
    for (_, snapshot) in cases() {
        let first = react(&snapshot, &registry);
        assert_eq!(first, react(&snapshot, &registry));
        let Ok(result) = first else { continue };
        succeeded += 1;
        let (_, valid) = collect_requests(&snapshot, &registry);
        let mediated = mediate_requests(&valid, &snapshot, &registry).unwrap();
        assert_eq!(result.mediated, mediated);
        assert_eq!(
            result.actions,
            associate_actions(&mediated, &snapshot, &registry).unwrap()
        );
    }
    assert!(
        succeeded > CASES / 2,
        "only {succeeded} reactions succeeded"
    );
}

#[test]
fn actions_only_touch_targeted_actuators() {
    let registry = PolicyRegistry::with_builtins();
    for (_, snapshot) in cases() {
        let Ok(result) = react(&snapshot, &registry) else {
            continue;
        };
        let reachable: BTreeSet<&str> = result
            .mediated
            .iter()
            .flat_map(|m| {
                &snapshot
                    .model
                    .instance(&m.zone, &m.instance)
                    .unwrap()
                    .actuators
            })
            .map(String::as_str)
            .collect();
        for a in &result.actions {
            assert!(reachable.contains(a.actuator.as_str()));
        }
        // Untargeted instances get no entry.
        let targeted: BTreeSet<(&str, &str)> = result
            .requests
            .iter()
            .map(|r| (r.zone.as_str(), r.instance.as_str()))
            .collect();
        for m in &result.mediated {
            assert!(targeted.contains(&(m.zone.as_str(), m.instance.as_str())));
        }
    }
}

#[test]
fn validators_ignore_order() {
    let registry = PolicyRegistry::with_builtins();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (_, snapshot) in cases() {
        let Ok(result) = react(&snapshot, &registry) else {
            continue;
        };
        let mut mediated = result.mediated.clone();
        let mut actions = result.actions.clone();
        // Inject a duplicate and, sometimes, a conflict.
        if let Some(m) = mediated.first().cloned() {
            mediated.push(m.clone());
            if rand::Rng::random_bool(&mut rng, 0.5) {
                mediated.push(goalmed::MediatedRequest {
                    value: m.value + 1.0,
                    ..m
                });
            }
        }
        if let Some(a) = actions.first().cloned() {
            actions.push(a.clone());
            if rand::Rng::random_bool(&mut rng, 0.5) {
                actions.push(goalmed::Action {
                    value: a.value + 1.0,
                    ..a
                });
            }
        }
        let m_verdict = validate_mediation(&mediated, &snapshot, &registry).is_ok();
        let a_verdict = validate_actions(&actions, &snapshot).is_ok();
        for _ in 0..3 {
            mediated.shuffle(&mut rng);
            actions.shuffle(&mut rng);
            assert_eq!(
                validate_mediation(&mediated, &snapshot, &registry).is_ok(),
                m_verdict
            );
            assert_eq!(validate_actions(&actions, &snapshot).is_ok(), a_verdict);
        }
    }
}

#[test]
fn plans_are_all_or_nothing() {
    let mut registry = PolicyRegistry::with_builtins();
    registry.set_actuation(SPLIT_EQUAL_MIN_UNBOUNDED).unwrap();
    let (mut accepted, mut rejected) = (0, 0);
    for (_, snapshot) in cases() {
        let (_, valid) = collect_requests(&snapshot, &registry);
        let mediated = mediate_requests(&valid, &snapshot, &registry).unwrap();
        let plan = associate_actions(&mediated, &snapshot, &registry).unwrap();
        let in_range = plan.iter().all(|a| {
            snapshot
                .model
                .actuator(&a.actuator)
                .unwrap()
                .valid_range
                .contains(a.value)
        });
        match react(&snapshot, &registry) {
            Ok(result) => {
                assert!(in_range);
                assert_eq!(result.actions, plan);
                accepted += 1;
            }
            Err(e) => {
                assert!(!in_range);
                assert_eq!(e.code(), "actions-invalid");
                rejected += 1;
            }
        }
    }
    assert!(
        accepted > 500 && rejected > 10,
        "{accepted} accepted, {rejected} rejected"
    );
}
