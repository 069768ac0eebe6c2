//! One reasoning cycle over a knowledge-base snapshot:
//!
//! 1. [`collect_requests`] reshapes every stored goal into a [`Request`] and
//!    keeps the valid ones (known user allowed on the zone, existing
//!    property instance, zone validator satisfied);
//! 2. [`mediate_requests`] reduces the requests on each property instance to
//!    one target value with the zone's mediation policy, checked by
//!    [`validate_mediation`];
//! 3. [`associate_actions`] turns targets into actuator settings with the
//!    active actuation policy, checked by [`validate_actions`].
//!
//! A failed check aborts the whole reaction: no partial plan is returned.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Snapshot;
use crate::policies::{group_per_instance, MediationContext, PolicyError};
use crate::registry::PolicyRegistry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub zone: String,
    pub instance: String,
    pub value: f64,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediatedRequest {
    pub zone: String,
    pub instance: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub actuator: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReactionResult {
    pub requests: Vec<Request>,
    pub mediated: Vec<MediatedRequest>,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum MediationViolation {
    /// Several distinct targets for one property instance.
    ConflictingTargets {
        zone: String,
        instance: String,
        values: Vec<f64>,
    },
    InvalidRequest {
        zone: String,
        instance: String,
        value: f64,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum ActionViolation {
    ConflictingSettings {
        actuator: String,
        values: Vec<f64>,
    },
    InvalidValue {
        actuator: String,
        value: f64,
        reason: String,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReactError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("mediation produced an invalid target state ({} violation(s))", .0.len())]
    MediationInvalid(Vec<MediationViolation>),
    #[error("actuation produced an invalid action plan ({} violation(s))", .0.len())]
    ActionsInvalid(Vec<ActionViolation>),
}

impl ReactError {
    pub fn code(&self) -> &'static str {
        match self {
            ReactError::Policy(_) => "policy-evaluation-error",
            ReactError::MediationInvalid(_) => "mediation-invalid",
            ReactError::ActionsInvalid(_) => "actions-invalid",
        }
    }
}

/// Structural validity of a (zone, instance, value) target plus the zone's
/// validator, if one is bound. `Err` carries the reason.
pub fn valid_request(
    zone: &str,
    instance: &str,
    value: f64,
    snapshot: &Snapshot,
    registry: &PolicyRegistry,
) -> Result<(), String> {
    let model = &snapshot.model;
    if model.zone(zone).is_none() {
        return Err(format!("unknown zone `{zone}`"));
    }
    let Some(pi) = model.instance(zone, instance) else {
        return Err(format!(
            "unknown property instance `{instance}` in zone `{zone}`"
        ));
    };
    if !value.is_finite() {
        return Err(format!("non-finite value {value}"));
    }
    match registry.validator_for(zone) {
        Ok(None) => Ok(()),
        Ok(Some(v)) => match v.is_valid(zone, pi, value, model) {
            Ok(true) => Ok(()),
            Ok(false) => Err(format!("rejected by the validator of zone `{zone}`")),
            Err(e) => Err(e.to_string()),
        },
        Err(e) => Err(e.to_string()),
    }
}

/// Why a request was filtered out, or `None` if it is valid.
pub fn request_rejection(
    req: &Request,
    snapshot: &Snapshot,
    registry: &PolicyRegistry,
) -> Option<String> {
    match snapshot.model.user(&req.user) {
        None => return Some(format!("unknown user `{}`", req.user)),
        Some(u) if !u.allowed_zones.contains(&req.zone) => {
            return Some(format!(
                "user `{}` is not allowed on zone `{}`",
                req.user, req.zone
            ))
        }
        Some(_) => {}
    }
    valid_request(&req.zone, &req.instance, req.value, snapshot, registry).err()
}

/// All current requests, and the valid subset in the same order.
pub fn collect_requests(
    snapshot: &Snapshot,
    registry: &PolicyRegistry,
) -> (Vec<Request>, Vec<Request>) {
    let requests: Vec<Request> = snapshot
        .goals
        .goals()
        .iter()
        .map(|g| Request {
            zone: g.zone.clone(),
            instance: g.instance.clone(),
            value: g.value,
            user: g.user.clone(),
        })
        .collect();
    let valid = requests
        .iter()
        .filter(|r| request_rejection(r, snapshot, registry).is_none())
        .cloned()
        .collect();
    (requests, valid)
}

/// One target per targeted property instance, ordered by zone then instance.
pub fn mediate_requests(
    valid: &[Request],
    snapshot: &Snapshot,
    registry: &PolicyRegistry,
) -> Result<Vec<MediatedRequest>, PolicyError> {
    let model = &snapshot.model;
    group_per_instance(valid)
        .iter()
        .map(|group| {
            let unknown = || PolicyError::UnknownInstance {
                zone: group.zone.clone(),
                instance: group.instance.clone(),
            };
            let zone = model.zone(&group.zone).ok_or_else(unknown)?;
            let instance = model
                .instance(&group.zone, &group.instance)
                .ok_or_else(unknown)?;
            let (policy_id, policy) = registry.mediation_for(zone)?;
            let ctx = MediationContext {
                policy_id: policy_id.to_owned(),
                property_type: instance.property_type.clone(),
                sensed_value: model.first_reading(instance),
                season: model.context().season,
            };
            policy.mediate(group, &ctx)
        })
        .collect()
}

/// Raw settings from the active actuation policy, merged by its conflict rule.
pub fn associate_actions(
    mediated: &[MediatedRequest],
    snapshot: &Snapshot,
    registry: &PolicyRegistry,
) -> Result<Vec<Action>, PolicyError> {
    let policy = registry.actuation()?;
    let mut raw = Vec::new();
    for m in mediated {
        let instance = snapshot
            .model
            .instance(&m.zone, &m.instance)
            .ok_or_else(|| PolicyError::UnknownInstance {
                zone: m.zone.clone(),
                instance: m.instance.clone(),
            })?;
        raw.extend(policy.actuate(m, instance, &snapshot.model)?);
    }
    Ok(policy.resolve(&raw))
}

fn distinct_sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| a.total_cmp(b) == Ordering::Equal);
    values
}

/// Fails when one property instance has two distinct targets or a target is
/// not a valid request. Exact duplicates are harmless.
pub fn validate_mediation(
    mediated: &[MediatedRequest],
    snapshot: &Snapshot,
    registry: &PolicyRegistry,
) -> Result<(), Vec<MediationViolation>> {
    let mut by_instance: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for m in mediated {
        by_instance
            .entry((m.zone.as_str(), m.instance.as_str()))
            .or_default()
            .push(m.value);
    }
    let mut violations = Vec::new();
    for ((zone, instance), values) in by_instance {
        let values = distinct_sorted(values);
        if values.len() > 1 {
            violations.push(MediationViolation::ConflictingTargets {
                zone: zone.to_owned(),
                instance: instance.to_owned(),
                values: values.clone(),
            });
        }
        for value in values {
            if let Err(reason) = valid_request(zone, instance, value, snapshot, registry) {
                violations.push(MediationViolation::InvalidRequest {
                    zone: zone.to_owned(),
                    instance: instance.to_owned(),
                    value,
                    reason,
                });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Fails when an actuator gets two distinct settings or a setting outside
/// the actuator's valid range.
pub fn validate_actions(
    actions: &[Action],
    snapshot: &Snapshot,
) -> Result<(), Vec<ActionViolation>> {
    let mut by_actuator: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for a in actions {
        by_actuator
            .entry(a.actuator.as_str())
            .or_default()
            .push(a.value);
    }
    let mut violations = Vec::new();
    for (actuator, values) in by_actuator {
        let values = distinct_sorted(values);
        if values.len() > 1 {
            violations.push(ActionViolation::ConflictingSettings {
                actuator: actuator.to_owned(),
                values: values.clone(),
            });
        }
        let known = snapshot.model.actuator(actuator);
        for value in values {
            let reason = match known {
                None => Some(format!("unknown actuator `{actuator}`")),
                Some(_) if !value.is_finite() => Some(format!("non-finite value {value}")),
                Some(a) if !a.valid_range.contains(value) => Some(format!(
                    "{value} is outside the valid range of `{actuator}`"
                )),
                Some(_) => None,
            };
            if let Some(reason) = reason {
                violations.push(ActionViolation::InvalidValue {
                    actuator: actuator.to_owned(),
                    value,
                    reason,
                });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

pub fn react(snapshot: &Snapshot, registry: &PolicyRegistry) -> Result<ReactionResult, ReactError> {
    let (requests, valid) = collect_requests(snapshot, registry);
    let mediated = mediate_requests(&valid, snapshot, registry)?;
    validate_mediation(&mediated, snapshot, registry).map_err(ReactError::MediationInvalid)?;
    let actions = associate_actions(&mediated, snapshot, registry)?;
    validate_actions(&actions, snapshot).map_err(ReactError::ActionsInvalid)?;
    Ok(ReactionResult {
        requests,
        mediated,
        actions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::EnvironmentDocument;
    use crate::model::Goal;

    fn home() -> Snapshot {
        let doc = EnvironmentDocument::from_json(
            r#"{
            "propertyTypes": ["light", "temp"],
            "sensors": [{"id": "brightness", "propertyType": "light"}],
            "actuators": [
                {"id": "mainLight", "propertyType": "light"},
                {"id": "heater", "propertyType": "temp", "validRange": {"values": [0, 100]}}
            ],
            "zones": [{"id": "z"}],
            "propertyInstances": [
                {"zone": "z", "id": "p", "propertyType": "light", "actuators": ["mainLight"], "sensors": ["brightness"]},
                {"zone": "z", "id": "t", "propertyType": "temp", "actuators": ["heater"]}
            ],
            "users": [{"id": "alice", "allowedZones": ["z"]}, {"id": "mallory"}]
        }"#,
        )
        .unwrap();
        Snapshot::from_document(&doc).unwrap()
    }

    fn m(zone: &str, instance: &str, value: f64) -> MediatedRequest {
        MediatedRequest {
            zone: zone.into(),
            instance: instance.into(),
            value,
        }
    }

    fn a(actuator: &str, value: f64) -> Action {
        Action {
            actuator: actuator.into(),
            value,
        }
    }

    fn goal(user: &str, zone: &str, instance: &str, value: f64) -> Goal {
        Goal {
            user: user.into(),
            zone: zone.into(),
            instance: instance.into(),
            value,
        }
    }

    #[test]
    fn empty_store_reacts_to_nothing() {
        let r = react(&home(), &PolicyRegistry::with_builtins()).unwrap();
        assert_eq!(r, ReactionResult::default());
    }

    #[test]
    fn filtering_clauses() {
        let mut s = home();
        let reg = PolicyRegistry::with_builtins();
        s.goals.set(goal("alice", "z", "p", 10.0));
        s.goals.set(goal("alice", "z", "nonexistent", 10.0));
        s.goals.set(goal("mallory", "z", "p", 10.0));
        s.goals.set(goal("ghost", "z", "p", 10.0));
        s.goals.set(goal("alice", "nowhere", "p", 10.0));
        let (requests, valid) = collect_requests(&s, &reg);
        assert_eq!(requests.len(), 5);
        assert_eq!(valid.len(), 1);
        assert_eq!(valid[0].user, "alice");
        assert_eq!(valid[0].instance, "p");
        assert!(request_rejection(&requests[1], &s, &reg)
            .unwrap()
            .contains("unknown property instance"));
    }

    #[test]
    fn mediation_validation() {
        let s = home();
        let reg = PolicyRegistry::with_builtins();
        let err = validate_mediation(&[m("z", "p", 5.0), m("z", "p", 7.0)], &s, &reg).unwrap_err();
        assert_eq!(
            err,
            vec![MediationViolation::ConflictingTargets {
                zone: "z".into(),
                instance: "p".into(),
                values: vec![5.0, 7.0]
            }]
        );
        assert!(validate_mediation(&[m("z", "p", 5.0), m("z", "p", 5.0)], &s, &reg).is_ok());
        let err = validate_mediation(&[m("z", "q", 5.0)], &s, &reg).unwrap_err();
        assert!(matches!(err[0], MediationViolation::InvalidRequest { .. }));
    }

    #[test]
    fn action_validation() {
        let s = home();
        let err = validate_actions(&[a("mainLight", 23.0), a("mainLight", 24.0)], &s).unwrap_err();
        assert!(matches!(
            err[0],
            ActionViolation::ConflictingSettings { .. }
        ));
        let err = validate_actions(&[a("heater", 50.0)], &s).unwrap_err();
        assert!(matches!(err[0], ActionViolation::InvalidValue { .. }));
        assert!(validate_actions(&[a("heater", 100.0), a("heater", 100.0)], &s).is_ok());
        assert!(validate_actions(&[a("ghost", 1.0)], &s).is_err());
    }

    #[test]
    fn range_violation_aborts_reaction() {
        let mut s = home();
        s.goals.set(goal("alice", "z", "t", 50.0));
        let err = react(&s, &PolicyRegistry::with_builtins()).unwrap_err();
        assert_eq!(err.code(), "actions-invalid");
    }

    #[test]
    fn bound_but_unregistered_policy_is_an_error() {
        let doc = EnvironmentDocument::from_json(
            r#"{"propertyTypes": ["light"],
                "actuators": [{"id": "l", "propertyType": "light"}],
                "zones": [{"id": "z", "mediationPolicy": "north"}],
                "propertyInstances": [{"zone": "z", "id": "p", "propertyType": "light", "actuators": ["l"]}],
                "users": [{"id": "u", "allowedZones": ["z"]}],
                "goals": [{"user": "u", "zone": "z", "instance": "p", "value": 3}]}"#,
        )
        .unwrap();
        let s = Snapshot::from_document(&doc).unwrap();
        let err = react(&s, &PolicyRegistry::with_builtins()).unwrap_err();
        assert_eq!(err.code(), "policy-evaluation-error");
    }
}
