//! JSON form of an environment description. Field names mirror the fact
//! arguments (`propertyInstance(ZId, PIId, TypeId, Actuators, Sensors)` is
//! `{"zone", "id", "propertyType", "actuators", "sensors"}`), every top-level
//! array is optional, and unknown fields are rejected.

use serde::{Deserialize, Serialize};

use crate::model::{BinarySetting, Scalar};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EnvironmentDocument {
    #[serde(default)]
    pub property_types: Vec<String>,
    #[serde(default)]
    pub sensors: Vec<SensorDecl>,
    #[serde(default)]
    pub sensor_values: Vec<SensorValueDecl>,
    #[serde(default)]
    pub actuators: Vec<ActuatorDecl>,
    #[serde(default)]
    pub zones: Vec<ZoneDecl>,
    #[serde(default)]
    pub property_instances: Vec<InstanceDecl>,
    #[serde(default)]
    pub users: Vec<UserDecl>,
    #[serde(default)]
    pub goals: Vec<GoalDecl>,
    #[serde(default)]
    pub context: Vec<ContextFact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SensorDecl {
    pub id: String,
    pub property_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorValueDecl {
    pub sensor: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ActuatorDecl {
    pub id: String,
    pub property_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_range: Option<RangeDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<BinarySetting>,
}

/// `{"min": 0, "max": 100}` or `{"values": [0, 100]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum RangeDecl {
    Interval { min: f64, max: f64 },
    Discrete { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ZoneDecl {
    pub id: String,
    #[serde(default)]
    pub mediation_policy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InstanceDecl {
    pub zone: String,
    pub id: String,
    pub property_type: String,
    #[serde(default)]
    pub actuators: Vec<String>,
    #[serde(default)]
    pub sensors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct UserDecl {
    pub id: String,
    #[serde(default)]
    pub allowed_zones: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalDecl {
    pub user: String,
    pub zone: String,
    pub instance: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextFact {
    pub name: String,
    pub value: Scalar,
}

impl EnvironmentDocument {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
