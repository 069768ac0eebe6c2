//! Built-in mediation and actuation policies.
//!
//! Mediation turns the requests grouped on one property instance into a
//! single target value: [`mediate_average`] for plain averaging and
//! [`mediate_contextual`] for averaging followed by the administrator's
//! seasonal and per-wing bounds ([`find_value`]). Actuation spreads a
//! target over the instance's actuators ([`split_equal`],
//! [`threshold_binary`]) and settles actuators claimed by several instances
//! with a [`ConflictRule`] ([`resolve_conflicts`]).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BinarySetting, Season};
use crate::pipeline::{Action, MediatedRequest, Request};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("cannot mediate an empty request group")]
    EmptyGroup,
    #[error("property instance has no actuators")]
    EmptyActuatorList,
    #[error("no rule for policy `{policy}` on property type `{property_type}`")]
    UnknownCombination {
        policy: String,
        property_type: String,
    },
    #[error("season is not defined")]
    MissingSeason,
    #[error("instance has no sensed value")]
    MissingSensedValue,
    #[error("unknown {kind} policy `{name}`")]
    UnknownPolicy { kind: &'static str, name: String },
    #[error("unknown property instance {zone}/{instance}")]
    UnknownInstance { zone: String, instance: String },
    #[error("conflict rule bounds [{lower}, {upper}] are empty")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("policy `{policy}` failed: {message}")]
    Evaluation { policy: String, message: String },
}

/// Valid requests on one (zone, instance), as (value, user) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedRequests {
    pub zone: String,
    pub instance: String,
    pub entries: Vec<(f64, String)>,
}

impl GroupedRequests {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(v, _)| *v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediationContext {
    pub policy_id: String,
    pub property_type: String,
    pub sensed_value: Option<f64>,
    pub season: Option<Season>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    Max,
    Min,
}

impl Combiner {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Combiner::Max => a.max(b),
            Combiner::Min => a.min(b),
        }
    }
}

/// How raw settings for the same actuator are merged: combine, then clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictRule {
    pub combiner: Combiner,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

impl ConflictRule {
    pub fn new(
        combiner: Combiner,
        lower_bound: f64,
        upper_bound: f64,
    ) -> Result<Self, PolicyError> {
        if lower_bound.is_nan() || upper_bound.is_nan() || lower_bound > upper_bound {
            return Err(PolicyError::InvalidBounds {
                lower: lower_bound,
                upper: upper_bound,
            });
        }
        Ok(ConflictRule {
            combiner,
            lower_bound,
            upper_bound,
        })
    }

    pub fn unbounded(combiner: Combiner) -> Self {
        ConflictRule {
            combiner,
            lower_bound: f64::NEG_INFINITY,
            upper_bound: f64::INFINITY,
        }
    }

    pub fn clip(&self, value: f64) -> f64 {
        value.max(self.lower_bound).min(self.upper_bound)
    }
}

/// Partitions requests by (zone, instance), groups ordered by zone then
/// instance, entries in input order.
pub fn group_per_instance(requests: &[Request]) -> Vec<GroupedRequests> {
    let mut groups: BTreeMap<(&str, &str), Vec<(f64, String)>> = BTreeMap::new();
    for r in requests {
        groups
            .entry((r.zone.as_str(), r.instance.as_str()))
            .or_default()
            .push((r.value, r.user.clone()));
    }
    groups
        .into_iter()
        .map(|((zone, instance), entries)| GroupedRequests {
            zone: zone.to_owned(),
            instance: instance.to_owned(),
            entries,
        })
        .collect()
}

/// Arithmetic mean, kept inside [min, max] of the inputs.
pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        n += 1;
        sum += v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (n > 0).then(|| (sum / n as f64).clamp(lo, hi))
}

pub fn mediate_average(group: &GroupedRequests) -> Result<MediatedRequest, PolicyError> {
    let value = mean(group.values()).ok_or(PolicyError::EmptyGroup)?;
    Ok(MediatedRequest {
        zone: group.zone.clone(),
        instance: group.instance.clone(),
        value,
    })
}

fn clamp_to(value: f64, lo: f64, hi: f64) -> f64 {
    if value > hi {
        hi
    } else if value < lo {
        lo
    } else {
        value
    }
}

/// Administrator bounds on a mediated candidate value.
///
/// Temperatures are held in 18..=22 during winter and autumn and 24..=28
/// during spring and summer, whatever the zone's policy. Light in `east`
/// zones is held in 100..=255; in `west` zones the lower bound rises to 180
/// unless the instance already senses more than 100.
pub fn find_value(
    policy_id: &str,
    property_type: &str,
    sensed_value: Option<f64>,
    candidate: f64,
    season: Option<Season>,
) -> Result<f64, PolicyError> {
    match (policy_id, property_type) {
        (_, "temp") => match season.ok_or(PolicyError::MissingSeason)? {
            Season::Winter | Season::Autumn => Ok(clamp_to(candidate, 18.0, 22.0)),
            Season::Summer | Season::Spring => Ok(clamp_to(candidate, 24.0, 28.0)),
        },
        ("east", "light") => Ok(clamp_to(candidate, 100.0, 255.0)),
        ("west", "light") => {
            let sensed = sensed_value.ok_or(PolicyError::MissingSensedValue)?;
            if sensed > 100.0 {
                Ok(clamp_to(candidate, 100.0, 255.0))
            } else {
                Ok(clamp_to(candidate, 180.0, 255.0))
            }
        }
        (policy, ty) => Err(PolicyError::UnknownCombination {
            policy: policy.to_owned(),
            property_type: ty.to_owned(),
        }),
    }
}

pub fn mediate_contextual(
    group: &GroupedRequests,
    ctx: &MediationContext,
) -> Result<MediatedRequest, PolicyError> {
    let avg = mean(group.values()).ok_or(PolicyError::EmptyGroup)?;
    let value = find_value(
        &ctx.policy_id,
        &ctx.property_type,
        ctx.sensed_value,
        avg,
        ctx.season,
    )?;
    Ok(MediatedRequest {
        zone: group.zone.clone(),
        instance: group.instance.clone(),
        value,
    })
}

/// Gives each actuator `target / actuators.len()`.
pub fn split_equal(target: f64, actuators: &[String]) -> Result<Vec<Action>, PolicyError> {
    if actuators.is_empty() {
        return Err(PolicyError::EmptyActuatorList);
    }
    let share = target / actuators.len() as f64;
    Ok(actuators
        .iter()
        .map(|a| Action {
            actuator: a.clone(),
            value: share,
        })
        .collect())
}

/// On when the target is positive, off otherwise.
pub fn threshold_binary(target: f64, actuator: &str, setting: BinarySetting) -> Action {
    Action {
        actuator: actuator.to_owned(),
        value: if target > 0.0 {
            setting.on
        } else {
            setting.off
        },
    }
}

/// One action per actuator: raw values merged by the rule's combiner, then
/// clipped to its bounds. Output is sorted by actuator id.
pub fn resolve_conflicts(raw_actions: &[Action], rule: &ConflictRule) -> Vec<Action> {
    let mut merged: BTreeMap<&str, f64> = BTreeMap::new();
    for a in raw_actions {
        merged
            .entry(a.actuator.as_str())
            .and_modify(|v| *v = rule.combiner.apply(*v, a.value))
            .or_insert(a.value);
    }
    merged
        .into_iter()
        .map(|(actuator, value)| Action {
            actuator: actuator.to_owned(),
            value: rule.clip(value),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(zone: &str, instance: &str, value: f64, user: &str) -> Request {
        Request {
            zone: zone.into(),
            instance: instance.into(),
            value,
            user: user.into(),
        }
    }

    fn group(values: &[f64]) -> GroupedRequests {
        GroupedRequests {
            zone: "z".into(),
            instance: "pi".into(),
            entries: values.iter().map(|v| (*v, "u".to_owned())).collect(),
        }
    }

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn groups_smart_home_requests() {
        let requests = vec![
            req("livingroom", "movieLight", 20.0, "alice"),
            req("livingroom", "studyingLight", 80.0, "bob"),
            req("livingroom", "roomTemp", 20.0, "alice"),
            req("livingroom", "roomTemp", 26.0, "bob"),
        ];
        let groups = group_per_instance(&requests);
        let names: Vec<_> = groups.iter().map(|g| g.instance.as_str()).collect();
        assert_eq!(names, ["movieLight", "roomTemp", "studyingLight"]);
        assert_eq!(
            groups[1].entries,
            vec![(20.0, "alice".to_owned()), (26.0, "bob".to_owned())]
        );
        assert!(group_per_instance(&[]).is_empty());
    }

    #[test]
    fn averaging() {
        assert_eq!(mediate_average(&group(&[20.0, 26.0])).unwrap().value, 23.0);
        assert_eq!(mediate_average(&group(&[80.0])).unwrap().value, 80.0);
        assert_eq!(mediate_average(&group(&[18.0, 23.0])).unwrap().value, 20.5);
        assert_eq!(mediate_average(&group(&[])), Err(PolicyError::EmptyGroup));
    }

    #[test]
    fn seasonal_temperature_bounds() {
        let w = Some(Season::Winter);
        assert_eq!(find_value("east", "temp", None, 28.0, w), Ok(22.0));
        assert_eq!(find_value("anything", "temp", None, 20.0, w), Ok(20.0));
        assert_eq!(
            find_value("west", "temp", None, 10.0, Some(Season::Autumn)),
            Ok(18.0)
        );
        assert_eq!(
            find_value("west", "temp", None, 20.0, Some(Season::Summer)),
            Ok(24.0)
        );
        assert_eq!(
            find_value("west", "temp", None, 30.0, Some(Season::Spring)),
            Ok(28.0)
        );
        assert_eq!(
            find_value("east", "temp", None, 20.0, None),
            Err(PolicyError::MissingSeason)
        );
    }

    #[test]
    fn wing_light_bounds() {
        assert_eq!(find_value("east", "light", None, 0.0, None), Ok(100.0));
        assert_eq!(find_value("east", "light", None, 300.0, None), Ok(255.0));
        assert_eq!(
            find_value("west", "light", Some(160.0), 255.0, Some(Season::Winter)),
            Ok(255.0)
        );
        assert_eq!(
            find_value("west", "light", Some(160.0), 120.0, None),
            Ok(120.0)
        );
        // dim west wing raises the floor to 180
        assert_eq!(
            find_value("west", "light", Some(100.0), 120.0, None),
            Ok(180.0)
        );
        assert_eq!(
            find_value("west", "light", Some(40.0), 200.0, None),
            Ok(200.0)
        );
        assert_eq!(
            find_value("west", "light", None, 200.0, None),
            Err(PolicyError::MissingSensedValue)
        );
        assert!(matches!(
            find_value("average", "light", None, 1.0, None),
            Err(PolicyError::UnknownCombination { .. })
        ));
        assert!(matches!(
            find_value("east", "humidity", None, 1.0, None),
            Err(PolicyError::UnknownCombination { .. })
        ));
    }

    #[test]
    fn contextual_mediation() {
        let ctx = |policy: &str, ty: &str| MediationContext {
            policy_id: policy.into(),
            property_type: ty.into(),
            sensed_value: None,
            season: Some(Season::Winter),
        };
        assert_eq!(
            mediate_contextual(&group(&[18.0]), &ctx("east", "temp"))
                .unwrap()
                .value,
            18.0
        );
        assert_eq!(
            mediate_contextual(&group(&[23.0, 18.0]), &ctx("west", "temp"))
                .unwrap()
                .value,
            20.5
        );
        assert_eq!(
            mediate_contextual(&group(&[0.0]), &ctx("east", "light"))
                .unwrap()
                .value,
            100.0
        );
    }

    #[test]
    fn equal_split() {
        let actions = split_equal(80.0, &ids(&["mainLight", "cornerLight"])).unwrap();
        assert_eq!(
            actions,
            vec![
                Action {
                    actuator: "mainLight".into(),
                    value: 40.0
                },
                Action {
                    actuator: "cornerLight".into(),
                    value: 40.0
                },
            ]
        );
        let actions = split_equal(20.0, &ids(&["cornerLight", "smallLight"])).unwrap();
        assert!(actions.iter().all(|a| a.value == 10.0));
        let actions = split_equal(255.0, &ids(&["big1", "big2"])).unwrap();
        assert!(actions.iter().all(|a| a.value == 127.5));
        assert_eq!(split_equal(1.0, &[]), Err(PolicyError::EmptyActuatorList));
    }

    #[test]
    fn binary_threshold() {
        let s = BinarySetting::default();
        assert_eq!(threshold_binary(18.0, "heater", s).value, 100.0);
        assert_eq!(threshold_binary(0.0, "heater", s).value, 0.0);
        assert_eq!(threshold_binary(-3.0, "heater", s).value, 0.0);
    }

    #[test]
    fn conflicts() {
        let raw = vec![
            Action {
                actuator: "cornerLight".into(),
                value: 10.0,
            },
            Action {
                actuator: "mainLight".into(),
                value: 40.0,
            },
            Action {
                actuator: "cornerLight".into(),
                value: 40.0,
            },
        ];
        let rule = ConflictRule::new(Combiner::Max, 0.0, 100.0).unwrap();
        let out = resolve_conflicts(&raw, &rule);
        assert_eq!(
            out,
            vec![
                Action {
                    actuator: "cornerLight".into(),
                    value: 40.0
                },
                Action {
                    actuator: "mainLight".into(),
                    value: 40.0
                },
            ]
        );

        let raw = vec![
            Action {
                actuator: "acOdd_E".into(),
                value: 9.0,
            },
            Action {
                actuator: "acOdd_E".into(),
                value: 22.0,
            },
        ];
        let out = resolve_conflicts(&raw, &ConflictRule::unbounded(Combiner::Max));
        assert_eq!(out[0].value, 22.0);
        let out = resolve_conflicts(&raw, &ConflictRule::unbounded(Combiner::Min));
        assert_eq!(out[0].value, 9.0);

        let raw = vec![Action {
            actuator: "a".into(),
            value: 150.0,
        }];
        let out = resolve_conflicts(&raw, &rule);
        assert_eq!(out[0].value, 100.0_f64.min(0.0_f64.max(150.0)));
    }

    #[test]
    fn conflict_rule_bounds() {
        assert!(ConflictRule::new(Combiner::Max, 5.0, 1.0).is_err());
        assert!(ConflictRule::new(Combiner::Max, f64::NEG_INFINITY, f64::INFINITY).is_ok());
    }
}
