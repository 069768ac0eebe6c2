//! Scenario files: an environment document plus the policies to use and,
//! optionally, the reaction it is expected to produce.
//!
//! ```json
//! {
//!   "description": "...",
//!   "propertyTypes": [...], "sensors": [...], ...,
//!   "policies": {
//!     "sources": [{ "path": "../policies/east.pol" }],
//!     "defaultMediation": "average",
//!     "actuation": "split_equal_max",
//!     "validation": { "livingroom": "light_range" }
//!   },
//!   "expected": { "requests": [...], "mediated": [...], "actions": [...] }
//! }
//! ```
//!
//! Source paths are resolved against the scenario file's directory.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::document::EnvironmentDocument;
use crate::dsl::{self, DslError, PolicyKind};
use crate::model::{ModelError, Snapshot};
use crate::pipeline::{self, react, ReactionResult};
use crate::policies::PolicyError;
use crate::registry::{PolicyRegistry, RegistryError};

/// Absolute tolerance used when comparing against an expected result.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scenario must be a JSON object")]
    NotAnObject,
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("policy source {origin}: {error}")]
    Dsl { origin: String, error: DslError },
    #[error("policy source {0} must give exactly one of `path` and `source`")]
    SourceSpec(usize),
    #[error("policy source {origin}: {error}")]
    Registry {
        origin: String,
        error: RegistryError,
    },
    #[error("policy binding: {0}")]
    Binding(#[from] PolicyError),
    #[error("expected result is not a valid reaction: {0}")]
    InvalidExpected(String),
}

/// One program to register before reacting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySource {
    /// Required when the source has no header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<PolicyKind>,
    /// Overrides the name in the header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// Which registered policies are active. Absent fields keep the current
/// setting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PolicyBindings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_mediation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actuation: Option<String>,
    /// Zone id to validator name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub validation: BTreeMap<String, String>,
}

impl PolicyBindings {
    /// Applies every binding or none of them.
    pub fn apply(&self, registry: &mut PolicyRegistry) -> Result<(), PolicyError> {
        let mut next = registry.clone();
        if let Some(name) = &self.default_mediation {
            next.set_default_mediation(name)?;
        }
        if let Some(name) = &self.actuation {
            next.set_actuation(name)?;
        }
        for (zone, name) in &self.validation {
            next.bind_validator(zone, name)?;
        }
        *registry = next;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PolicySection {
    #[serde(default)]
    pub sources: Vec<PolicySource>,
    #[serde(default)]
    pub default_mediation: Option<String>,
    #[serde(default)]
    pub actuation: Option<String>,
    #[serde(default)]
    pub validation: BTreeMap<String, String>,
}

impl PolicySection {
    pub fn bindings(&self) -> PolicyBindings {
        PolicyBindings {
            default_mediation: self.default_mediation.clone(),
            actuation: self.actuation.clone(),
            validation: self.validation.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub description: Option<String>,
    pub environment: EnvironmentDocument,
    pub policies: PolicySection,
    pub expected: Option<ReactionResult>,
    /// Directory that relative source paths are resolved against.
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_owned(),
            source,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base_dir)
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ScenarioError> {
        let Value::Object(mut map) = serde_json::from_str(text)? else {
            return Err(ScenarioError::NotAnObject);
        };
        let description = match map.remove("description") {
            Some(v) => Some(serde_json::from_value(v)?),
            None => None,
        };
        let policies = match map.remove("policies") {
            Some(v) => serde_json::from_value(v)?,
            None => PolicySection::default(),
        };
        let expected = match map.remove("expected") {
            Some(v) => Some(serde_json::from_value(v)?),
            None => None,
        };
        let environment = serde_json::from_value(Value::Object(map))?;
        Ok(Scenario {
            description,
            environment,
            policies,
            expected,
            base_dir: base_dir.into(),
        })
    }

    /// Registry with the built-ins, the scenario's programs and bindings.
    pub fn registry(&self) -> Result<PolicyRegistry, ScenarioError> {
        let mut registry = PolicyRegistry::with_builtins();
        for (i, spec) in self.policies.sources.iter().enumerate() {
            let (origin, text) = match (&spec.path, &spec.source) {
                (Some(p), None) => {
                    let full = self.base_dir.join(p);
                    let text = std::fs::read_to_string(&full)
                        .map_err(|source| ScenarioError::Io { path: full, source })?;
                    (p.clone(), text)
                }
                (None, Some(s)) => (format!("#{i}"), s.clone()),
                _ => return Err(ScenarioError::SourceSpec(i)),
            };
            let parsed = match spec.kind {
                Some(kind) => dsl::parse_policy_as(&text, kind),
                None => dsl::parse_policy(&text),
            };
            let mut program = parsed.map_err(|error| ScenarioError::Dsl {
                origin: origin.clone(),
                error,
            })?;
            if let Some(name) = &spec.name {
                program.name = Some(name.clone());
            }
            registry
                .register_program(program)
                .map_err(|error| ScenarioError::Registry { origin, error })?;
        }
        self.policies.bindings().apply(&mut registry)?;
        Ok(registry)
    }

    /// Snapshot and registry ready for [`react`]. Fails if the expected
    /// result does not pass both validators against the model.
    pub fn build(&self) -> Result<(Snapshot, PolicyRegistry), ScenarioError> {
        let snapshot = Snapshot::from_document(&self.environment)?;
        let registry = self.registry()?;
        if let Some(expected) = &self.expected {
            if let Err(v) = pipeline::validate_mediation(&expected.mediated, &snapshot, &registry) {
                return Err(ScenarioError::InvalidExpected(
                    serde_json::to_string(&v).unwrap_or_default(),
                ));
            }
            if let Err(v) = pipeline::validate_actions(&expected.actions, &snapshot) {
                return Err(ScenarioError::InvalidExpected(
                    serde_json::to_string(&v).unwrap_or_default(),
                ));
            }
        }
        Ok((snapshot, registry))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Print,
    Verify,
    Json,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "print" => Ok(Mode::Print),
            "verify" => Ok(Mode::Verify),
            "json" => Ok(Mode::Json),
            other => Err(format!(
                "unknown mode `{other}` (expected print, verify or json)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Mismatch against the expected result, or a failed reaction.
    Failed,
    /// The scenario could not be loaded.
    Invalid,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed => 1,
            Status::Invalid => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub report: String,
}

/// Loads the scenario at `path`, reacts once and reports per `mode`.
pub fn run(path: impl AsRef<Path>, mode: Mode) -> Outcome {
    let invalid = |e: ScenarioError| Outcome {
        status: Status::Invalid,
        report: format!("error: {e}\n"),
    };
    let scenario = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => return invalid(e),
    };
    if mode == Mode::Verify && scenario.expected.is_none() {
        return Outcome {
            status: Status::Invalid,
            report: "error: scenario has no `expected` result to verify against\n".into(),
        };
    }
    let (snapshot, registry) = match scenario.build() {
        Ok(b) => b,
        Err(e) => return invalid(e),
    };
    let result = match react(&snapshot, &registry) {
        Ok(r) => r,
        Err(e) => {
            let mut report = format!("reaction failed [{}]: {e}\n", e.code());
            match &e {
                pipeline::ReactError::MediationInvalid(v) => {
                    for x in v {
                        let _ =
                            writeln!(report, "  {}", serde_json::to_string(x).unwrap_or_default());
                    }
                }
                pipeline::ReactError::ActionsInvalid(v) => {
                    for x in v {
                        let _ =
                            writeln!(report, "  {}", serde_json::to_string(x).unwrap_or_default());
                    }
                }
                pipeline::ReactError::Policy(_) => {}
            }
            return Outcome {
                status: Status::Failed,
                report,
            };
        }
    };
    match mode {
        Mode::Print => Outcome {
            status: Status::Ok,
            report: render_tables(&result),
        },
        Mode::Json => Outcome {
            status: Status::Ok,
            report: serde_json::to_string_pretty(&result).expect("reaction results serialise")
                + "\n",
        },
        Mode::Verify => {
            let expected = scenario.expected.as_ref().expect("checked above");
            let diffs = compare(expected, &result, TOLERANCE);
            if diffs.is_empty() {
                Outcome {
                    status: Status::Ok,
                    report: format!(
                        "PASS: {} requests, {} mediated, {} actions match\n",
                        result.requests.len(),
                        result.mediated.len(),
                        result.actions.len()
                    ),
                }
            } else {
                let mut report = format!("FAIL: {} mismatch(es)\n", diffs.len());
                for d in diffs {
                    let _ = writeln!(report, "  {d}");
                }
                Outcome {
                    status: Status::Failed,
                    report,
                }
            }
        }
    }
}

/// A difference between an expected and an actual reaction.
#[derive(Debug, Clone, PartialEq)]
pub enum Mismatch {
    Missing {
        section: &'static str,
        entry: String,
    },
    Unexpected {
        section: &'static str,
        entry: String,
    },
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::Missing { section, entry } => write!(f, "{section}: missing {entry}"),
            Mismatch::Unexpected { section, entry } => write!(f, "{section}: unexpected {entry}"),
        }
    }
}

type Row = (Vec<String>, f64);

fn rows(result: &ReactionResult) -> [(&'static str, Vec<Row>); 3] {
    let mut requests: Vec<Row> = result
        .requests
        .iter()
        .map(|r| {
            (
                vec![r.zone.clone(), r.instance.clone(), r.user.clone()],
                r.value,
            )
        })
        .collect();
    let mut mediated: Vec<Row> = result
        .mediated
        .iter()
        .map(|m| (vec![m.zone.clone(), m.instance.clone()], m.value))
        .collect();
    let mut actions: Vec<Row> = result
        .actions
        .iter()
        .map(|a| (vec![a.actuator.clone()], a.value))
        .collect();
    for v in [&mut requests, &mut mediated, &mut actions] {
        v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
    [
        ("requests", requests),
        ("mediated", mediated),
        ("actions", actions),
    ]
}

fn describe(row: &Row) -> String {
    format!("({}, {})", row.0.join(", "), row.1)
}

/// Multiset comparison of each section; values match within `tolerance`.
pub fn compare(
    expected: &ReactionResult,
    actual: &ReactionResult,
    tolerance: f64,
) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for ((section, want), (_, got)) in rows(expected).into_iter().zip(rows(actual)) {
        let mut unused: Vec<Option<&Row>> = got.iter().map(Some).collect();
        for w in &want {
            let hit = unused
                .iter_mut()
                .find(|slot| slot.is_some_and(|g| g.0 == w.0 && (g.1 - w.1).abs() <= tolerance));
            match hit {
                Some(slot) => *slot = None,
                None => out.push(Mismatch::Missing {
                    section,
                    entry: describe(w),
                }),
            }
        }
        for g in unused.into_iter().flatten() {
            out.push(Mismatch::Unexpected {
                section,
                entry: describe(g),
            });
        }
    }
    out
}

/// Plain-text tables, one per section, rows sorted.
pub fn render_tables(result: &ReactionResult) -> String {
    let headers: [&[&str]; 3] = [
        &["zone", "instance", "user", "value"],
        &["zone", "instance", "value"],
        &["actuator", "value"],
    ];
    let mut out = String::new();
    for ((section, rows), header) in rows(result).into_iter().zip(headers) {
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|(key, value)| {
                let mut cells = key.clone();
                cells.push(value.to_string());
                cells
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for cells in &body {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.len());
            }
        }
        let _ = writeln!(out, "{section} ({})", body.len());
        let line = |cells: &[String]| {
            let mut s = String::from(" ");
            for (c, w) in cells.iter().zip(&widths) {
                let _ = write!(s, " {c:<w$}");
            }
            s.trim_end().to_owned()
        };
        let header: Vec<String> = header.iter().map(|h| h.to_string()).collect();
        let _ = writeln!(out, "{}", line(&header));
        for cells in &body {
            let _ = writeln!(out, "{}", line(cells));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{Action, MediatedRequest};

    const MINIMAL: &str = r#"{
        "propertyTypes": ["temp"],
        "actuators": [{"id": "ac", "propertyType": "temp"}],
        "zones": [{"id": "z"}],
        "propertyInstances": [{"zone": "z", "id": "t", "propertyType": "temp", "actuators": ["ac"]}],
        "users": [{"id": "u", "allowedZones": ["z"]}],
        "goals": [{"user": "u", "zone": "z", "instance": "t", "value": 21}]
    }"#;

    #[test]
    fn extras_are_split_from_the_environment() {
        let text = r#"{"description": "d", "propertyTypes": ["temp"],
            "policies": {"actuation": "split_equal_min_unbounded"},
            "expected": {"requests": [], "mediated": [], "actions": []}}"#;
        let s = Scenario::from_json(text, ".").unwrap();
        assert_eq!(s.description.as_deref(), Some("d"));
        assert_eq!(s.environment.property_types, vec!["temp"]);
        assert_eq!(
            s.policies.actuation.as_deref(),
            Some("split_equal_min_unbounded")
        );
        assert_eq!(s.expected, Some(ReactionResult::default()));
    }

    #[test]
    fn unknown_top_level_keys_are_rejected() {
        assert!(matches!(
            Scenario::from_json(r#"{"zonez": []}"#, "."),
            Err(ScenarioError::Json(_))
        ));
        assert!(matches!(
            Scenario::from_json("[]", "."),
            Err(ScenarioError::NotAnObject)
        ));
    }

    #[test]
    fn inline_sources_are_registered() {
        let mut s = Scenario::from_json(MINIMAL, ".").unwrap();
        s.policies.sources.push(PolicySource {
            kind: None,
            name: Some("fixed".into()),
            path: None,
            source: Some("mediation\nconstant(19)".into()),
        });
        s.policies.default_mediation = Some("fixed".into());
        let (snap, reg) = s.build().unwrap();
        let r = react(&snap, &reg).unwrap();
        assert_eq!(r.mediated[0].value, 19.0);
    }

    #[test]
    fn source_needs_exactly_one_origin() {
        let mut s = Scenario::from_json(MINIMAL, ".").unwrap();
        s.policies.sources.push(PolicySource {
            kind: None,
            name: None,
            path: None,
            source: None,
        });
        assert!(matches!(s.registry(), Err(ScenarioError::SourceSpec(0))));
    }

    #[test]
    fn unknown_binding_is_rejected() {
        let mut s = Scenario::from_json(MINIMAL, ".").unwrap();
        s.policies.actuation = Some("nope".into());
        assert!(matches!(s.build(), Err(ScenarioError::Binding(_))));
    }

    #[test]
    fn invalid_expected_is_rejected() {
        let mut s = Scenario::from_json(MINIMAL, ".").unwrap();
        s.expected = Some(ReactionResult {
            actions: vec![
                Action {
                    actuator: "ac".into(),
                    value: 1.0,
                },
                Action {
                    actuator: "ac".into(),
                    value: 2.0,
                },
            ],
            ..Default::default()
        });
        assert!(matches!(s.build(), Err(ScenarioError::InvalidExpected(_))));
    }

    #[test]
    fn bindings_apply_atomically() {
        let mut reg = PolicyRegistry::with_builtins();
        let bad = PolicyBindings {
            default_mediation: Some("east".into()),
            actuation: Some("missing".into()),
            validation: BTreeMap::new(),
        };
        assert!(bad.apply(&mut reg).is_err());
        assert_eq!(reg.default_mediation(), "average");
    }

    #[test]
    fn compare_is_order_insensitive_with_tolerance() {
        let a = ReactionResult {
            mediated: vec![
                MediatedRequest {
                    zone: "z".into(),
                    instance: "a".into(),
                    value: 1.0,
                },
                MediatedRequest {
                    zone: "z".into(),
                    instance: "b".into(),
                    value: 2.0,
                },
            ],
            ..Default::default()
        };
        let mut b = a.clone();
        b.mediated.reverse();
        b.mediated[0].value += 5e-10;
        assert!(compare(&a, &b, TOLERANCE).is_empty());
        b.mediated[0].value += 1e-6;
        let diffs = compare(&a, &b, TOLERANCE);
        assert_eq!(diffs.len(), 2);
        assert!(diffs[0]
            .to_string()
            .starts_with("mediated: missing (z, b, 2)"));
    }

    #[test]
    fn tables_have_three_sections_when_empty() {
        let out = render_tables(&ReactionResult::default());
        assert_eq!(
            out,
            "requests (0)\n  zone instance user value\n\nmediated (0)\n  zone instance value\n\nactions (0)\n  actuator value\n\n"
        );
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("verify".parse::<Mode>(), Ok(Mode::Verify));
        assert!("check".parse::<Mode>().is_err());
    }
}
