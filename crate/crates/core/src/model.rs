//! The knowledge base: property types, sensors, actuators, zones, property
//! instances, users, context facts and the goals users have currently set.
//!
//! Models are built from an [`EnvironmentDocument`] through [`load_model`],
//! which resolves every cross-reference and rejects structurally invalid
//! fact sets. Goals are kept apart in a [`GoalStore`] because they are not
//! validated on ingestion: unauthorised or dangling goals are stored as-is
//! and filtered out later by the reasoning pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{
    ActuatorDecl, ContextFact, EnvironmentDocument, GoalDecl, InstanceDecl, RangeDecl,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{fact} refers to unknown {target} `{id}`")]
    DanglingReference {
        fact: String,
        target: &'static str,
        id: String,
    },
    #[error("{fact}: {member} `{id}` has property type `{found}`, expected `{expected}`")]
    PropertyTypeMismatch {
        fact: String,
        member: &'static str,
        id: String,
        expected: String,
        found: String,
    },
    #[error("actuator `{actuator}` declares an empty valid range")]
    EmptyRange { actuator: String },
    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),
    #[error("invalid context fact `{name}`: {reason}")]
    InvalidContext { name: String, reason: String },
    #[error("non-finite value for {0}")]
    NonFinite(String),
}

impl ModelError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::DuplicateId { .. } => "duplicate-id",
            ModelError::DanglingReference { .. } => "dangling-reference",
            ModelError::PropertyTypeMismatch { .. } => "property-type-mismatch",
            ModelError::EmptyRange { .. } => "empty-range",
            ModelError::UnknownSensor(_) => "unknown-sensor",
            ModelError::InvalidContext { .. } => "invalid-context",
            ModelError::NonFinite(_) => "non-finite-value",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Winter,
    Autumn,
    Spring,
    Summer,
}

impl Season {
    pub const ALL: [Season; 4] = [
        Season::Winter,
        Season::Autumn,
        Season::Spring,
        Season::Summer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Autumn => "autumn",
            Season::Spring => "spring",
            Season::Summer => "summer",
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Season {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "winter" => Ok(Season::Winter),
            "autumn" => Ok(Season::Autumn),
            "spring" => Ok(Season::Spring),
            "summer" => Ok(Season::Summer),
            other => Err(format!("unknown season `{other}`")),
        }
    }
}

/// Scalar value of a named context fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Context {
    pub season: Option<Season>,
    pub facts: BTreeMap<String, Scalar>,
}

/// Values an actuator accepts.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidRange {
    Unbounded,
    Interval { min: f64, max: f64 },
    Discrete(Vec<f64>),
}

impl ValidRange {
    pub fn contains(&self, value: f64) -> bool {
        match self {
            ValidRange::Unbounded => !value.is_nan(),
            ValidRange::Interval { min, max } => *min <= value && value <= *max,
            ValidRange::Discrete(values) => values.contains(&value),
        }
    }
}

/// On/off settings of an actuator that only accepts two values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinarySetting {
    pub on: f64,
    pub off: f64,
}

impl Default for BinarySetting {
    fn default() -> Self {
        BinarySetting {
            on: 100.0,
            off: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub id: String,
    pub property_type: String,
    pub last_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actuator {
    pub id: String,
    pub property_type: String,
    pub valid_range: ValidRange,
    pub binary: Option<BinarySetting>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: String,
    /// `None` means the zone falls back to the registry's default policy.
    pub mediation_policy: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyInstance {
    pub zone: String,
    pub id: String,
    pub property_type: String,
    pub actuators: Vec<String>,
    pub sensors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub id: String,
    pub allowed_zones: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub user: String,
    pub zone: String,
    pub instance: String,
    pub value: f64,
}

/// Goals currently set, in submission order. A user holds at most one goal
/// per (zone, instance); setting it again replaces the value in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoalStore {
    goals: Vec<Goal>,
}

impl GoalStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, goal: Goal) {
        match self
            .goals
            .iter_mut()
            .find(|g| g.user == goal.user && g.zone == goal.zone && g.instance == goal.instance)
        {
            Some(existing) => existing.value = goal.value,
            None => self.goals.push(goal),
        }
    }

    pub fn goals(&self) -> &[Goal] {
        &self.goals
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }
}

/// Applies `goal` with last-write-wins semantics per (user, zone, instance).
pub fn set_goal(store: &mut GoalStore, goal: Goal) {
    store.set(goal);
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvironmentModel {
    property_types: BTreeSet<String>,
    sensors: BTreeMap<String, Sensor>,
    actuators: BTreeMap<String, Actuator>,
    zones: BTreeMap<String, Zone>,
    instances: BTreeMap<(String, String), PropertyInstance>,
    users: BTreeMap<String, User>,
    context: Context,
}

impl EnvironmentModel {
    pub fn property_types(&self) -> impl Iterator<Item = &str> {
        self.property_types.iter().map(String::as_str)
    }

    pub fn sensor(&self, id: &str) -> Option<&Sensor> {
        self.sensors.get(id)
    }

    pub fn sensors(&self) -> impl Iterator<Item = &Sensor> {
        self.sensors.values()
    }

    pub fn actuator(&self, id: &str) -> Option<&Actuator> {
        self.actuators.get(id)
    }

    pub fn actuators(&self) -> impl Iterator<Item = &Actuator> {
        self.actuators.values()
    }

    pub fn zone(&self, id: &str) -> Option<&Zone> {
        self.zones.get(id)
    }

    pub fn zones(&self) -> impl Iterator<Item = &Zone> {
        self.zones.values()
    }

    pub fn instance(&self, zone: &str, id: &str) -> Option<&PropertyInstance> {
        self.instances.get(&(zone.to_owned(), id.to_owned()))
    }

    /// Property instances ordered by (zone, id).
    pub fn instances(&self) -> impl Iterator<Item = &PropertyInstance> {
        self.instances.values()
    }

    pub fn user(&self, id: &str) -> Option<&User> {
        self.users.get(id)
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    pub fn set_season(&mut self, season: Option<Season>) {
        self.context.season = season;
    }

    /// Replaces the last reading of `sensor_id`.
    pub fn update_sensor(&mut self, sensor_id: &str, value: f64) -> Result<(), ModelError> {
        if !value.is_finite() {
            return Err(ModelError::NonFinite(format!("sensor `{sensor_id}`")));
        }
        let sensor = self
            .sensors
            .get_mut(sensor_id)
            .ok_or_else(|| ModelError::UnknownSensor(sensor_id.to_owned()))?;
        sensor.last_value = Some(value);
        Ok(())
    }

    /// Reading of the first listed sensor of an instance, if it has one.
    pub fn first_reading(&self, instance: &PropertyInstance) -> Option<f64> {
        instance
            .sensors
            .first()
            .and_then(|s| self.sensors.get(s))
            .and_then(|s| s.last_value)
    }

    /// Renders the model back into its document form (goals excluded).
    pub fn to_document(&self) -> EnvironmentDocument {
        let mut doc = EnvironmentDocument {
            property_types: self.property_types.iter().cloned().collect(),
            ..Default::default()
        };
        for s in self.sensors.values() {
            doc.sensors.push(crate::document::SensorDecl {
                id: s.id.clone(),
                property_type: s.property_type.clone(),
            });
            if let Some(v) = s.last_value {
                doc.sensor_values.push(crate::document::SensorValueDecl {
                    sensor: s.id.clone(),
                    value: v,
                });
            }
        }
        for a in self.actuators.values() {
            doc.actuators.push(ActuatorDecl {
                id: a.id.clone(),
                property_type: a.property_type.clone(),
                valid_range: match &a.valid_range {
                    ValidRange::Unbounded => None,
                    ValidRange::Interval { min, max } => Some(RangeDecl::Interval {
                        min: *min,
                        max: *max,
                    }),
                    ValidRange::Discrete(values) => Some(RangeDecl::Discrete {
                        values: values.clone(),
                    }),
                },
                binary: a.binary,
            });
        }
        for z in self.zones.values() {
            doc.zones.push(crate::document::ZoneDecl {
                id: z.id.clone(),
                mediation_policy: z.mediation_policy.clone(),
            });
        }
        for pi in self.instances.values() {
            doc.property_instances.push(InstanceDecl {
                zone: pi.zone.clone(),
                id: pi.id.clone(),
                property_type: pi.property_type.clone(),
                actuators: pi.actuators.clone(),
                sensors: pi.sensors.clone(),
            });
        }
        for u in self.users.values() {
            doc.users.push(crate::document::UserDecl {
                id: u.id.clone(),
                allowed_zones: u.allowed_zones.iter().cloned().collect(),
            });
        }
        if let Some(season) = self.context.season {
            doc.context.push(ContextFact {
                name: "season".into(),
                value: Scalar::Text(season.as_str().into()),
            });
        }
        for (name, value) in &self.context.facts {
            doc.context.push(ContextFact {
                name: name.clone(),
                value: value.clone(),
            });
        }
        doc
    }
}

/// Builds a validated model and the initial goal store from a document.
pub fn load_model(doc: &EnvironmentDocument) -> Result<(EnvironmentModel, GoalStore), ModelError> {
    let mut model = EnvironmentModel::default();

    for pt in &doc.property_types {
        if !model.property_types.insert(pt.clone()) {
            return Err(ModelError::DuplicateId {
                kind: "propertyType",
                id: pt.clone(),
            });
        }
    }

    for s in &doc.sensors {
        require_type(&model, &format!("sensor({})", s.id), &s.property_type)?;
        let sensor = Sensor {
            id: s.id.clone(),
            property_type: s.property_type.clone(),
            last_value: None,
        };
        if model.sensors.insert(s.id.clone(), sensor).is_some() {
            return Err(ModelError::DuplicateId {
                kind: "sensor",
                id: s.id.clone(),
            });
        }
    }

    // At most one reading per sensor: a later sensorValue replaces an earlier one.
    for sv in &doc.sensor_values {
        let sensor =
            model
                .sensors
                .get_mut(&sv.sensor)
                .ok_or_else(|| ModelError::DanglingReference {
                    fact: format!("sensorValue({}, {})", sv.sensor, sv.value),
                    target: "sensor",
                    id: sv.sensor.clone(),
                })?;
        if !sv.value.is_finite() {
            return Err(ModelError::NonFinite(format!("sensorValue({})", sv.sensor)));
        }
        sensor.last_value = Some(sv.value);
    }

    for a in &doc.actuators {
        require_type(&model, &format!("actuator({})", a.id), &a.property_type)?;
        let valid_range = match &a.valid_range {
            None => ValidRange::Unbounded,
            Some(RangeDecl::Interval { min, max }) => {
                if min.is_nan() || max.is_nan() || min > max {
                    return Err(ModelError::EmptyRange {
                        actuator: a.id.clone(),
                    });
                }
                ValidRange::Interval {
                    min: *min,
                    max: *max,
                }
            }
            Some(RangeDecl::Discrete { values }) => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::EmptyRange {
                        actuator: a.id.clone(),
                    });
                }
                ValidRange::Discrete(values.clone())
            }
        };
        let actuator = Actuator {
            id: a.id.clone(),
            property_type: a.property_type.clone(),
            valid_range,
            binary: a.binary,
        };
        if model.actuators.insert(a.id.clone(), actuator).is_some() {
            return Err(ModelError::DuplicateId {
                kind: "actuator",
                id: a.id.clone(),
            });
        }
    }

    for z in &doc.zones {
        let zone = Zone {
            id: z.id.clone(),
            mediation_policy: z.mediation_policy.clone(),
        };
        if model.zones.insert(z.id.clone(), zone).is_some() {
            return Err(ModelError::DuplicateId {
                kind: "zone",
                id: z.id.clone(),
            });
        }
    }

    for pi in &doc.property_instances {
        let fact = format!("propertyInstance({}, {})", pi.zone, pi.id);
        if !model.zones.contains_key(&pi.zone) {
            return Err(ModelError::DanglingReference {
                fact,
                target: "zone",
                id: pi.zone.clone(),
            });
        }
        require_type(&model, &fact, &pi.property_type)?;
        for a in &pi.actuators {
            let actuator = model
                .actuators
                .get(a)
                .ok_or_else(|| ModelError::DanglingReference {
                    fact: fact.clone(),
                    target: "actuator",
                    id: a.clone(),
                })?;
            if actuator.property_type != pi.property_type {
                return Err(ModelError::PropertyTypeMismatch {
                    fact,
                    member: "actuator",
                    id: a.clone(),
                    expected: pi.property_type.clone(),
                    found: actuator.property_type.clone(),
                });
            }
        }
        for s in &pi.sensors {
            let sensor = model
                .sensors
                .get(s)
                .ok_or_else(|| ModelError::DanglingReference {
                    fact: fact.clone(),
                    target: "sensor",
                    id: s.clone(),
                })?;
            if sensor.property_type != pi.property_type {
                return Err(ModelError::PropertyTypeMismatch {
                    fact,
                    member: "sensor",
                    id: s.clone(),
                    expected: pi.property_type.clone(),
                    found: sensor.property_type.clone(),
                });
            }
        }
        let key = (pi.zone.clone(), pi.id.clone());
        let instance = PropertyInstance {
            zone: pi.zone.clone(),
            id: pi.id.clone(),
            property_type: pi.property_type.clone(),
            actuators: pi.actuators.clone(),
            sensors: pi.sensors.clone(),
        };
        if model.instances.insert(key, instance).is_some() {
            return Err(ModelError::DuplicateId {
                kind: "propertyInstance",
                id: format!("{}/{}", pi.zone, pi.id),
            });
        }
    }

    for u in &doc.users {
        for z in &u.allowed_zones {
            if !model.zones.contains_key(z) {
                return Err(ModelError::DanglingReference {
                    fact: format!("user({})", u.id),
                    target: "zone",
                    id: z.clone(),
                });
            }
        }
        let user = User {
            id: u.id.clone(),
            allowed_zones: u.allowed_zones.iter().cloned().collect(),
        };
        if model.users.insert(u.id.clone(), user).is_some() {
            return Err(ModelError::DuplicateId {
                kind: "user",
                id: u.id.clone(),
            });
        }
    }

    for fact in &doc.context {
        if fact.name == "season" {
            if model.context.season.is_some() {
                return Err(ModelError::DuplicateId {
                    kind: "context fact",
                    id: "season".into(),
                });
            }
            let season = match &fact.value {
                Scalar::Text(s) => s.parse::<Season>(),
                other => Err(format!("expected a season name, got {other:?}")),
            }
            .map_err(|reason| ModelError::InvalidContext {
                name: "season".into(),
                reason,
            })?;
            model.context.season = Some(season);
        } else if model
            .context
            .facts
            .insert(fact.name.clone(), fact.value.clone())
            .is_some()
        {
            return Err(ModelError::DuplicateId {
                kind: "context fact",
                id: fact.name.clone(),
            });
        }
    }

    let mut goals = GoalStore::new();
    for GoalDecl {
        user,
        zone,
        instance,
        value,
    } in &doc.goals
    {
        if !value.is_finite() {
            return Err(ModelError::NonFinite(format!(
                "set({user}, {zone}, {instance})"
            )));
        }
        goals.set(Goal {
            user: user.clone(),
            zone: zone.clone(),
            instance: instance.clone(),
            value: *value,
        });
    }

    Ok((model, goals))
}

fn require_type(model: &EnvironmentModel, fact: &str, ty: &str) -> Result<(), ModelError> {
    if model.property_types.contains(ty) {
        Ok(())
    } else {
        Err(ModelError::DanglingReference {
            fact: fact.to_owned(),
            target: "propertyType",
            id: ty.to_owned(),
        })
    }
}

/// Model plus goals: everything one reaction reads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub model: EnvironmentModel,
    pub goals: GoalStore,
}

impl Snapshot {
    pub fn from_document(doc: &EnvironmentDocument) -> Result<Self, ModelError> {
        let (model, goals) = load_model(doc)?;
        Ok(Snapshot { model, goals })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{SensorDecl, UserDecl, ZoneDecl};

    fn base_doc() -> EnvironmentDocument {
        EnvironmentDocument {
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
            actuators: vec![ActuatorDecl {
                id: "ac".into(),
                property_type: "temp".into(),
                valid_range: None,
                binary: None,
            }],
            zones: vec![ZoneDecl {
                id: "livingroom".into(),
                mediation_policy: None,
            }],
            property_instances: vec![InstanceDecl {
                zone: "livingroom".into(),
                id: "roomTemp".into(),
                property_type: "temp".into(),
                actuators: vec!["ac".into()],
                sensors: vec!["temperature".into()],
            }],
            users: vec![UserDecl {
                id: "alice".into(),
                allowed_zones: vec!["livingroom".into()],
            }],
            ..Default::default()
        }
    }

    #[test]
    fn empty_document_gives_empty_model() {
        let (model, goals) = load_model(&EnvironmentDocument::default()).unwrap();
        assert_eq!(model, EnvironmentModel::default());
        assert!(goals.is_empty());
    }

    #[test]
    fn sensor_of_wrong_type_in_instance() {
        let mut doc = base_doc();
        doc.property_instances[0].sensors = vec!["brightness".into()];
        let err = load_model(&doc).unwrap_err();
        assert_eq!(err.code(), "property-type-mismatch");
        assert!(err.to_string().contains("brightness"), "{err}");
    }

    #[test]
    fn duplicate_and_dangling_ids() {
        let mut doc = base_doc();
        doc.zones.push(doc.zones[0].clone());
        assert_eq!(load_model(&doc).unwrap_err().code(), "duplicate-id");

        let mut doc = base_doc();
        doc.property_instances[0].actuators.push("heater".into());
        let err = load_model(&doc).unwrap_err();
        assert_eq!(
            err,
            ModelError::DanglingReference {
                fact: "propertyInstance(livingroom, roomTemp)".into(),
                target: "actuator",
                id: "heater".into()
            }
        );

        let mut doc = base_doc();
        doc.users[0].allowed_zones.push("garage".into());
        assert_eq!(load_model(&doc).unwrap_err().code(), "dangling-reference");
    }

    #[test]
    fn instance_ids_only_unique_within_zone() {
        let mut doc = base_doc();
        doc.zones.push(ZoneDecl {
            id: "kitchen".into(),
            mediation_policy: Some("average".into()),
        });
        let mut other = doc.property_instances[0].clone();
        other.zone = "kitchen".into();
        doc.property_instances.push(other);
        let (model, _) = load_model(&doc).unwrap();
        assert!(model.instance("kitchen", "roomTemp").is_some());
        assert!(model.instance("livingroom", "roomTemp").is_some());

        doc.property_instances
            .push(doc.property_instances[0].clone());
        assert_eq!(load_model(&doc).unwrap_err().code(), "duplicate-id");
    }

    #[test]
    fn empty_ranges_rejected() {
        let mut doc = base_doc();
        doc.actuators[0].valid_range = Some(RangeDecl::Discrete { values: vec![] });
        assert_eq!(load_model(&doc).unwrap_err().code(), "empty-range");
        doc.actuators[0].valid_range = Some(RangeDecl::Interval { min: 5.0, max: 1.0 });
        assert_eq!(load_model(&doc).unwrap_err().code(), "empty-range");
    }

    #[test]
    fn goal_replacement_is_last_write_wins() {
        let mut store = GoalStore::new();
        let goal = |v| Goal {
            user: "alice".into(),
            zone: "livingroom".into(),
            instance: "roomTemp".into(),
            value: v,
        };
        set_goal(&mut store, goal(20.0));
        assert_eq!(store.len(), 1);
        set_goal(&mut store, goal(21.0));
        assert_eq!(store.goals(), &[goal(21.0)]);
        set_goal(&mut store, goal(21.0));
        assert_eq!(store.goals(), &[goal(21.0)]);
    }

    #[test]
    fn dangling_goals_are_stored() {
        let mut store = GoalStore::new();
        set_goal(
            &mut store,
            Goal {
                user: "u4".into(),
                zone: "room_E_2".into(),
                instance: "roomTemp".into(),
                value: 18.0,
            },
        );
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn sensor_updates() {
        let (mut model, _) = load_model(&base_doc()).unwrap();
        model.update_sensor("brightness", 20.0).unwrap();
        assert_eq!(model.sensor("brightness").unwrap().last_value, Some(20.0));
        model.update_sensor("brightness", 35.0).unwrap();
        assert_eq!(model.sensor("brightness").unwrap().last_value, Some(35.0));
        assert_eq!(
            model.update_sensor("unknownId", 5.0),
            Err(ModelError::UnknownSensor("unknownId".into()))
        );
    }

    #[test]
    fn season_context() {
        let mut doc = base_doc();
        doc.context.push(ContextFact {
            name: "season".into(),
            value: Scalar::Text("winter".into()),
        });
        doc.context.push(ContextFact {
            name: "sunny".into(),
            value: Scalar::Bool(true),
        });
        let (model, _) = load_model(&doc).unwrap();
        assert_eq!(model.context().season, Some(Season::Winter));
        assert_eq!(model.context().facts["sunny"], Scalar::Bool(true));

        doc.context.push(ContextFact {
            name: "season".into(),
            value: Scalar::Text("summer".into()),
        });
        assert_eq!(load_model(&doc).unwrap_err().code(), "duplicate-id");
    }

    #[test]
    fn document_round_trip() {
        let mut doc = base_doc();
        doc.sensor_values.push(crate::document::SensorValueDecl {
            sensor: "temperature".into(),
            value: 22.0,
        });
        let (model, _) = load_model(&doc).unwrap();
        let (again, _) = load_model(&model.to_document()).unwrap();
        assert_eq!(model, again);
    }
}
