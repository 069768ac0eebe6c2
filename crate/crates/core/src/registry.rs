//! Named mediation, actuation and request-validation policies, native or
//! written in the policy DSL, plus the bindings that pick which one runs.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::dsl::{self, PolicyKind, PolicyProgram};
use crate::model::{EnvironmentModel, PropertyInstance, Zone};
use crate::pipeline::{Action, MediatedRequest};
use crate::policies::{
    mediate_average, mediate_contextual, resolve_conflicts, split_equal, threshold_binary,
    Combiner, ConflictRule, GroupedRequests, MediationContext, PolicyError,
};

pub const AVERAGE: &str = "average";
pub const EAST: &str = "east";
pub const WEST: &str = "west";
pub const SPLIT_EQUAL_MAX: &str = "split_equal_max";
pub const SPLIT_EQUAL_MIN_UNBOUNDED: &str = "split_equal_min_unbounded";

pub trait MediationPolicy: Send + Sync + fmt::Debug {
    fn mediate(
        &self,
        group: &GroupedRequests,
        ctx: &MediationContext,
    ) -> Result<MediatedRequest, PolicyError>;
}

pub trait ActuationPolicy: Send + Sync + fmt::Debug {
    /// Raw, possibly conflicting, settings for the actuators of `instance`.
    fn actuate(
        &self,
        mediated: &MediatedRequest,
        instance: &PropertyInstance,
        model: &EnvironmentModel,
    ) -> Result<Vec<Action>, PolicyError>;

    fn conflict_rule(&self) -> ConflictRule;

    fn resolve(&self, raw: &[Action]) -> Vec<Action> {
        resolve_conflicts(raw, &self.conflict_rule())
    }
}

pub trait RequestValidator: Send + Sync + fmt::Debug {
    fn is_valid(
        &self,
        zone: &str,
        instance: &PropertyInstance,
        value: f64,
        model: &EnvironmentModel,
    ) -> Result<bool, PolicyError>;
}

#[derive(Debug)]
pub struct AverageMediation;

impl MediationPolicy for AverageMediation {
    fn mediate(
        &self,
        group: &GroupedRequests,
        _: &MediationContext,
    ) -> Result<MediatedRequest, PolicyError> {
        mediate_average(group)
    }
}

/// Averaging followed by the seasonal and per-wing bounds keyed on the
/// zone's policy name.
#[derive(Debug)]
pub struct ContextualMediation;

impl MediationPolicy for ContextualMediation {
    fn mediate(
        &self,
        group: &GroupedRequests,
        ctx: &MediationContext,
    ) -> Result<MediatedRequest, PolicyError> {
        mediate_contextual(group, ctx)
    }
}

/// Splits the target equally over all actuators of the instance. With
/// `threshold_binaries`, actuators declared binary are switched on or off
/// instead but still count towards the split.
#[derive(Debug)]
pub struct SplitEqualActuation {
    pub threshold_binaries: bool,
    pub rule: ConflictRule,
}

impl ActuationPolicy for SplitEqualActuation {
    fn actuate(
        &self,
        mediated: &MediatedRequest,
        instance: &PropertyInstance,
        model: &EnvironmentModel,
    ) -> Result<Vec<Action>, PolicyError> {
        let mut actions = split_equal(mediated.value, &instance.actuators)?;
        if self.threshold_binaries {
            for action in &mut actions {
                if let Some(setting) = model.actuator(&action.actuator).and_then(|a| a.binary) {
                    *action = threshold_binary(mediated.value, &action.actuator, setting);
                }
            }
        }
        Ok(actions)
    }

    fn conflict_rule(&self) -> ConflictRule {
        self.rule
    }
}

fn eval_error(program: &PolicyProgram, e: dsl::EvalError) -> PolicyError {
    PolicyError::Evaluation {
        policy: program.name.clone().unwrap_or_else(|| "<anonymous>".into()),
        message: e.to_string(),
    }
}

#[derive(Debug)]
struct ProgramMediation(PolicyProgram);

impl MediationPolicy for ProgramMediation {
    fn mediate(
        &self,
        group: &GroupedRequests,
        ctx: &MediationContext,
    ) -> Result<MediatedRequest, PolicyError> {
        dsl::eval_mediation(&self.0, group, ctx).map_err(|e| eval_error(&self.0, e))
    }
}

#[derive(Debug)]
struct ProgramActuation {
    program: PolicyProgram,
    rule: ConflictRule,
}

impl ActuationPolicy for ProgramActuation {
    fn actuate(
        &self,
        mediated: &MediatedRequest,
        instance: &PropertyInstance,
        _: &EnvironmentModel,
    ) -> Result<Vec<Action>, PolicyError> {
        dsl::eval_actuation(&self.program, mediated, instance)
            .map(|(raw, _)| raw)
            .map_err(|e| eval_error(&self.program, e))
    }

    fn conflict_rule(&self) -> ConflictRule {
        self.rule
    }
}

#[derive(Debug)]
struct ProgramValidator(PolicyProgram);

impl RequestValidator for ProgramValidator {
    fn is_valid(
        &self,
        zone: &str,
        instance: &PropertyInstance,
        value: f64,
        model: &EnvironmentModel,
    ) -> Result<bool, PolicyError> {
        dsl::eval_validation(&self.0, zone, instance, value, model.context().season)
            .map_err(|e| eval_error(&self.0, e))
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum RegistryError {
    #[error("policy program has no name")]
    Unnamed,
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Cheap to clone: policies are shared behind `Arc`s, so a reaction can
/// work on a copy while the original keeps accepting uploads.
#[derive(Debug, Clone)]
pub struct PolicyRegistry {
    mediation: BTreeMap<String, Arc<dyn MediationPolicy>>,
    actuation: BTreeMap<String, Arc<dyn ActuationPolicy>>,
    validation: BTreeMap<String, Arc<dyn RequestValidator>>,
    sources: BTreeMap<(PolicyKind, String), PolicyProgram>,
    default_mediation: String,
    active_actuation: String,
    zone_validators: BTreeMap<String, String>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl PolicyRegistry {
    /// Registry holding the native policies; `average` is the default
    /// mediation policy and `split_equal_max` the active actuation policy.
    pub fn with_builtins() -> Self {
        let mut r = PolicyRegistry {
            mediation: BTreeMap::new(),
            actuation: BTreeMap::new(),
            validation: BTreeMap::new(),
            sources: BTreeMap::new(),
            default_mediation: AVERAGE.into(),
            active_actuation: SPLIT_EQUAL_MAX.into(),
            zone_validators: BTreeMap::new(),
        };
        r.register_mediation(AVERAGE, Arc::new(AverageMediation));
        r.register_mediation(EAST, Arc::new(ContextualMediation));
        r.register_mediation(WEST, Arc::new(ContextualMediation));
        r.register_actuation(
            SPLIT_EQUAL_MAX,
            Arc::new(SplitEqualActuation {
                threshold_binaries: false,
                rule: ConflictRule {
                    combiner: Combiner::Max,
                    lower_bound: 0.0,
                    upper_bound: 100.0,
                },
            }),
        );
        // Named after the listed predicate; resolves conflicts with max.
        r.register_actuation(
            SPLIT_EQUAL_MIN_UNBOUNDED,
            Arc::new(SplitEqualActuation {
                threshold_binaries: true,
                rule: ConflictRule::unbounded(Combiner::Max),
            }),
        );
        r
    }

    pub fn register_mediation(
        &mut self,
        name: impl Into<String>,
        policy: Arc<dyn MediationPolicy>,
    ) {
        let name = name.into();
        self.sources.remove(&(PolicyKind::Mediation, name.clone()));
        self.mediation.insert(name, policy);
    }

    pub fn register_actuation(
        &mut self,
        name: impl Into<String>,
        policy: Arc<dyn ActuationPolicy>,
    ) {
        let name = name.into();
        self.sources.remove(&(PolicyKind::Actuation, name.clone()));
        self.actuation.insert(name, policy);
    }

    pub fn register_validator(
        &mut self,
        name: impl Into<String>,
        policy: Arc<dyn RequestValidator>,
    ) {
        let name = name.into();
        self.sources.remove(&(PolicyKind::Validation, name.clone()));
        self.validation.insert(name, policy);
    }

    /// Registers a DSL program under its own name, replacing any policy of
    /// the same kind and name.
    pub fn register_program(&mut self, program: PolicyProgram) -> Result<(), RegistryError> {
        let name = program.name.clone().ok_or(RegistryError::Unnamed)?;
        let key = (program.kind, name.clone());
        match program.kind {
            PolicyKind::Mediation => {
                self.register_mediation(name, Arc::new(ProgramMediation(program.clone())))
            }
            PolicyKind::Actuation => {
                let dsl::PolicyBody::Actuation { combine, .. } = &program.body else {
                    unreachable!("parser builds actuation bodies for actuation programs")
                };
                let rule = ConflictRule::new(combine.combiner, combine.lower, combine.upper)?;
                self.register_actuation(
                    name,
                    Arc::new(ProgramActuation {
                        program: program.clone(),
                        rule,
                    }),
                )
            }
            PolicyKind::Validation => {
                self.register_validator(name, Arc::new(ProgramValidator(program.clone())))
            }
        }
        self.sources.insert(key, program);
        Ok(())
    }

    /// DSL source of a registered program, if it was registered from one.
    pub fn program(&self, kind: PolicyKind, name: &str) -> Option<&PolicyProgram> {
        self.sources.get(&(kind, name.to_owned()))
    }

    pub fn contains(&self, kind: PolicyKind, name: &str) -> bool {
        match kind {
            PolicyKind::Mediation => self.mediation.contains_key(name),
            PolicyKind::Actuation => self.actuation.contains_key(name),
            PolicyKind::Validation => self.validation.contains_key(name),
        }
    }

    pub fn names(&self, kind: PolicyKind) -> Vec<String> {
        match kind {
            PolicyKind::Mediation => self.mediation.keys().cloned().collect(),
            PolicyKind::Actuation => self.actuation.keys().cloned().collect(),
            PolicyKind::Validation => self.validation.keys().cloned().collect(),
        }
    }

    fn require(&self, kind: PolicyKind, name: &str) -> Result<(), PolicyError> {
        if self.contains(kind, name) {
            Ok(())
        } else {
            Err(unknown(kind, name))
        }
    }

    pub fn set_default_mediation(&mut self, name: &str) -> Result<(), PolicyError> {
        self.require(PolicyKind::Mediation, name)?;
        self.default_mediation = name.to_owned();
        Ok(())
    }

    pub fn set_actuation(&mut self, name: &str) -> Result<(), PolicyError> {
        self.require(PolicyKind::Actuation, name)?;
        self.active_actuation = name.to_owned();
        Ok(())
    }

    pub fn bind_validator(&mut self, zone: &str, name: &str) -> Result<(), PolicyError> {
        self.require(PolicyKind::Validation, name)?;
        self.zone_validators
            .insert(zone.to_owned(), name.to_owned());
        Ok(())
    }

    pub fn default_mediation(&self) -> &str {
        &self.default_mediation
    }

    pub fn active_actuation(&self) -> &str {
        &self.active_actuation
    }

    pub fn zone_validators(&self) -> &BTreeMap<String, String> {
        &self.zone_validators
    }

    /// Policy name and implementation mediating `zone`; unbound zones use
    /// the default. A bound but unregistered name is an error.
    pub fn mediation_for(
        &self,
        zone: &Zone,
    ) -> Result<(&str, &Arc<dyn MediationPolicy>), PolicyError> {
        let name = zone
            .mediation_policy
            .as_deref()
            .unwrap_or(&self.default_mediation);
        self.mediation
            .get_key_value(name)
            .map(|(k, v)| (k.as_str(), v))
            .ok_or_else(|| unknown(PolicyKind::Mediation, name))
    }

    pub fn actuation(&self) -> Result<&Arc<dyn ActuationPolicy>, PolicyError> {
        self.actuation
            .get(&self.active_actuation)
            .ok_or_else(|| unknown(PolicyKind::Actuation, &self.active_actuation))
    }

    pub fn validator_for(
        &self,
        zone: &str,
    ) -> Result<Option<&Arc<dyn RequestValidator>>, PolicyError> {
        match self.zone_validators.get(zone) {
            None => Ok(None),
            Some(name) => self
                .validation
                .get(name)
                .map(Some)
                .ok_or_else(|| unknown(PolicyKind::Validation, name)),
        }
    }
}

fn unknown(kind: PolicyKind, name: &str) -> PolicyError {
    PolicyError::UnknownPolicy {
        kind: kind.as_str(),
        name: name.to_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_policy;

    #[test]
    fn builtins_and_defaults() {
        let r = PolicyRegistry::with_builtins();
        assert_eq!(r.names(PolicyKind::Mediation), ["average", "east", "west"]);
        assert_eq!(
            r.names(PolicyKind::Actuation),
            ["split_equal_max", "split_equal_min_unbounded"]
        );
        let anon = Zone {
            id: "livingroom".into(),
            mediation_policy: None,
        };
        assert_eq!(r.mediation_for(&anon).unwrap().0, "average");
        let bound = Zone {
            id: "room".into(),
            mediation_policy: Some("north".into()),
        };
        assert!(matches!(
            r.mediation_for(&bound),
            Err(PolicyError::UnknownPolicy { .. })
        ));
    }

    #[test]
    fn programs_replace_by_name() {
        let mut r = PolicyRegistry::with_builtins();
        r.register_program(parse_policy("mediation average\n21").unwrap())
            .unwrap();
        assert!(r.program(PolicyKind::Mediation, "average").is_some());
        r.register_mediation(AVERAGE, Arc::new(AverageMediation));
        assert!(r.program(PolicyKind::Mediation, "average").is_none());

        assert_eq!(
            r.register_program(parse_policy("21").unwrap()),
            Err(RegistryError::Unnamed)
        );
    }

    #[test]
    fn bindings_must_resolve() {
        let mut r = PolicyRegistry::with_builtins();
        assert!(r.set_actuation("nope").is_err());
        assert!(r.set_default_mediation("nope").is_err());
        assert!(r.bind_validator("z", "nope").is_err());
        r.register_program(parse_policy("validation positive\ncandidate > 0").unwrap())
            .unwrap();
        r.bind_validator("z", "positive").unwrap();
        assert!(r.validator_for("z").unwrap().is_some());
        assert!(r.validator_for("other").unwrap().is_none());
    }
}
