//! Seeded random environments for property tests.

#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use goalmed::document::{
    ActuatorDecl, ContextFact, EnvironmentDocument, GoalDecl, InstanceDecl, RangeDecl, SensorDecl,
    SensorValueDecl, UserDecl, ZoneDecl,
};
use goalmed::model::Scalar;

pub const TYPES: [&str; 2] = ["light", "temp"];
pub const SEASONS: [&str; 4] = ["winter", "autumn", "spring", "summer"];

/// A structurally valid document whose goals include unknown users, zones
/// and instances as well as unauthorised ones.
pub fn random_document(rng: &mut impl Rng) -> EnvironmentDocument {
    let mut doc = EnvironmentDocument {
        property_types: TYPES.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    for ty in TYPES {
        doc.sensors.push(SensorDecl {
            id: format!("s_{ty}"),
            property_type: ty.into(),
        });
        doc.sensor_values.push(SensorValueDecl {
            sensor: format!("s_{ty}"),
            value: rng.random_range(0.0..300.0),
        });
    }
    let mut by_type: Vec<(String, String)> = Vec::new();
    for (i, ty) in TYPES.iter().enumerate() {
        for k in 0..rng.random_range(1..4) {
            let id = format!("a{i}{k}");
            let valid_range = match rng.random_range(0..4) {
                0 => Some(RangeDecl::Interval {
                    min: 0.0,
                    max: 300.0,
                }),
                1 => Some(RangeDecl::Interval {
                    min: -100.0,
                    max: 1000.0,
                }),
                _ => None,
            };
            doc.actuators.push(ActuatorDecl {
                id: id.clone(),
                property_type: ty.to_string(),
                valid_range,
                binary: None,
            });
            by_type.push((ty.to_string(), id));
        }
    }
    let policies = [None, Some("average"), Some("east"), Some("west")];
    let nz = rng.random_range(1..4);
    for z in 0..nz {
        let zone = format!("z{z}");
        doc.zones.push(ZoneDecl {
            id: zone.clone(),
            mediation_policy: policies.choose(rng).unwrap().map(str::to_owned),
        });
        let mut ids = ["i0", "i1", "i2"];
        ids.shuffle(rng);
        for id in ids.iter().take(rng.random_range(1..4)) {
            let ty = *TYPES.choose(rng).unwrap();
            let candidates: Vec<&String> = by_type
                .iter()
                .filter(|(t, _)| t == ty)
                .map(|(_, a)| a)
                .collect();
            let n = rng.random_range(1..=candidates.len());
            let actuators = candidates
                .choose_multiple(rng, n)
                .map(|s| s.to_string())
                .collect();
            doc.property_instances.push(InstanceDecl {
                zone: zone.clone(),
                id: id.to_string(),
                property_type: ty.into(),
                actuators,
                sensors: vec![format!("s_{ty}")],
            });
        }
    }
    for u in 0..4 {
        let allowed = (0..nz)
            .filter(|_| rng.random_bool(0.75))
            .map(|z| format!("z{z}"))
            .collect();
        doc.users.push(UserDecl {
            id: format!("u{u}"),
            allowed_zones: allowed,
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..rng.random_range(0..14) {
        // Mostly well-aimed goals, with some unknown or unauthorised ones.
        let (zone, instance) = if rng.random_bool(0.85) {
            let pi = doc.property_instances.choose(rng).unwrap();
            (pi.zone.clone(), pi.id.clone())
        } else {
            (
                format!("z{}", rng.random_range(0..nz + 1)),
                format!("i{}", rng.random_range(0..4)),
            )
        };
        let g = GoalDecl {
            user: format!("u{}", rng.random_range(0..5)),
            zone,
            instance,
            value: (rng.random_range(-50.0f64..350.0) * 4.0).round() / 4.0,
        };
        if seen.insert((g.user.clone(), g.zone.clone(), g.instance.clone())) {
            doc.goals.push(g);
        }
    }
    doc.context.push(ContextFact {
        name: "season".into(),
        value: Scalar::Text(SEASONS.choose(rng).unwrap().to_string()),
    });
    doc
}
