use thiserror::Error;

use super::ast::*;
use crate::model::{PropertyInstance, Season};
use crate::pipeline::{Action, MediatedRequest};
use crate::policies::{mean, ConflictRule, GroupedRequests, MediationContext};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{message} (at {pos})")]
pub struct EvalError {
    pub pos: Pos,
    pub message: String,
}

impl EvalError {
    fn new(pos: Pos, message: impl Into<String>) -> Self {
        EvalError {
            pos,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Bool(bool),
    Text(String),
    List(Vec<f64>),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Bool(_) => "boolean",
            Value::Text(_) => "string",
            Value::List(_) => "request list",
        }
    }
}

#[derive(Debug, Default)]
struct Scope<'a> {
    candidate: Option<f64>,
    sensed: Option<f64>,
    season: Option<Season>,
    property_type: Option<&'a str>,
    zone: Option<&'a str>,
    instance: Option<&'a str>,
    policy: Option<&'a str>,
    requests: Option<Vec<f64>>,
    actuator: Option<&'a str>,
    actuator_count: Option<usize>,
}

impl Scope<'_> {
    fn lookup(&self, r: Reference, pos: Pos) -> Result<Value, EvalError> {
        let missing = || EvalError::new(pos, format!("`{}` has no value here", r.name()));
        let text = |s: Option<&str>| s.map(|s| Value::Text(s.to_owned())).ok_or_else(missing);
        match r {
            Reference::Candidate => self.candidate.map(Value::Num).ok_or_else(missing),
            Reference::Sensed => self.sensed.map(Value::Num).ok_or_else(missing),
            Reference::Season => self
                .season
                .map(|s| Value::Text(s.as_str().to_owned()))
                .ok_or_else(missing),
            Reference::PropertyType => text(self.property_type),
            Reference::Zone => text(self.zone),
            Reference::Instance => text(self.instance),
            Reference::Policy => text(self.policy),
            Reference::Actuator => text(self.actuator),
            Reference::Requests => self.requests.clone().map(Value::List).ok_or_else(missing),
            Reference::ActuatorCount => self
                .actuator_count
                .map(|n| Value::Num(n as f64))
                .ok_or_else(missing),
        }
    }
}

fn num(v: Value, pos: Pos) -> Result<f64, EvalError> {
    match v {
        Value::Num(n) => Ok(n),
        other => Err(EvalError::new(
            pos,
            format!("expected a number, found a {}", other.type_name()),
        )),
    }
}

fn boolean(v: Value, pos: Pos) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::new(
            pos,
            format!("expected a boolean, found a {}", other.type_name()),
        )),
    }
}

fn checked(n: f64, pos: Pos) -> Result<Value, EvalError> {
    if n.is_nan() {
        Err(EvalError::new(
            pos,
            "arithmetic produced an undefined value",
        ))
    } else {
        Ok(Value::Num(n))
    }
}

fn eval(expr: &Expr, scope: &Scope) -> Result<Value, EvalError> {
    let pos = expr.pos;
    match &expr.kind {
        ExprKind::Number(n) => Ok(Value::Num(*n)),
        ExprKind::Bool(b) => Ok(Value::Bool(*b)),
        ExprKind::Text(s) => Ok(Value::Text(s.clone())),
        ExprKind::Ref(r) => scope.lookup(*r, pos),
        ExprKind::Unary(UnaryOp::Neg, e) => Ok(Value::Num(-num(eval(e, scope)?, e.pos)?)),
        ExprKind::Unary(UnaryOp::Not, e) => Ok(Value::Bool(!boolean(eval(e, scope)?, e.pos)?)),
        ExprKind::Binary(op, l, r) => binary(*op, l, r, scope, pos),
        ExprKind::Aggregate(agg, args) => {
            let mut values = Vec::new();
            for a in args {
                match eval(a, scope)? {
                    Value::Num(n) => values.push(n),
                    Value::List(list) => values.extend(list),
                    other => {
                        return Err(EvalError::new(
                            a.pos,
                            format!("cannot aggregate a {}", other.type_name()),
                        ))
                    }
                }
            }
            let empty = || EvalError::new(pos, format!("`{}` over no values", agg.name()));
            let result = match agg {
                Aggregate::Count => values.len() as f64,
                Aggregate::Sum => values.iter().sum(),
                Aggregate::Avg => mean(values.iter().copied()).ok_or_else(empty)?,
                Aggregate::Min => values.iter().copied().reduce(f64::min).ok_or_else(empty)?,
                Aggregate::Max => values.iter().copied().reduce(f64::max).ok_or_else(empty)?,
            };
            checked(result, pos)
        }
        ExprKind::Clamp(x, lo, hi) => {
            let x = num(eval(x, scope)?, x.pos)?;
            let lo = num(eval(lo, scope)?, lo.pos)?;
            let hi = num(eval(hi, scope)?, hi.pos)?;
            if lo > hi {
                return Err(EvalError::new(
                    pos,
                    format!("clamp bounds [{lo}, {hi}] are empty"),
                ));
            }
            Ok(Value::Num(if x > hi {
                hi
            } else if x < lo {
                lo
            } else {
                x
            }))
        }
        ExprKind::Cond {
            branches,
            otherwise,
        } => {
            for (cond, value) in branches {
                if boolean(eval(cond, scope)?, cond.pos)? {
                    return eval(value, scope);
                }
            }
            eval(otherwise, scope)
        }
        ExprKind::SplitEqual => {
            let target = num(scope.lookup(Reference::Candidate, pos)?, pos)?;
            let count = num(scope.lookup(Reference::ActuatorCount, pos)?, pos)?;
            if count == 0.0 {
                return Err(EvalError::new(pos, "split over zero actuators"));
            }
            checked(target / count, pos)
        }
        ExprKind::Switch { on, off, threshold } => {
            let target = num(scope.lookup(Reference::Candidate, pos)?, pos)?;
            let threshold = num(eval(threshold, scope)?, threshold.pos)?;
            if target > threshold {
                Ok(Value::Num(num(eval(on, scope)?, on.pos)?))
            } else {
                Ok(Value::Num(num(eval(off, scope)?, off.pos)?))
            }
        }
        ExprKind::Constant(e) => Ok(Value::Num(num(eval(e, scope)?, e.pos)?)),
        ExprKind::Fail(message) => Err(EvalError::new(pos, message.clone())),
    }
}

fn binary(op: BinaryOp, l: &Expr, r: &Expr, scope: &Scope, pos: Pos) -> Result<Value, EvalError> {
    match op {
        BinaryOp::And => Ok(Value::Bool(
            boolean(eval(l, scope)?, l.pos)? && boolean(eval(r, scope)?, r.pos)?,
        )),
        BinaryOp::Or => Ok(Value::Bool(
            boolean(eval(l, scope)?, l.pos)? || boolean(eval(r, scope)?, r.pos)?,
        )),
        BinaryOp::Eq | BinaryOp::Ne => {
            let a = eval(l, scope)?;
            let b = eval(r, scope)?;
            let equal = match (&a, &b) {
                (Value::Num(x), Value::Num(y)) => x == y,
                (Value::Bool(x), Value::Bool(y)) => x == y,
                (Value::Text(x), Value::Text(y)) => x == y,
                _ => {
                    return Err(EvalError::new(
                        pos,
                        format!(
                            "cannot compare a {} with a {}",
                            a.type_name(),
                            b.type_name()
                        ),
                    ))
                }
            };
            Ok(Value::Bool(if op == BinaryOp::Eq { equal } else { !equal }))
        }
        _ => {
            let a = num(eval(l, scope)?, l.pos)?;
            let b = num(eval(r, scope)?, r.pos)?;
            match op {
                BinaryOp::Lt => Ok(Value::Bool(a < b)),
                BinaryOp::Le => Ok(Value::Bool(a <= b)),
                BinaryOp::Gt => Ok(Value::Bool(a > b)),
                BinaryOp::Ge => Ok(Value::Bool(a >= b)),
                BinaryOp::Add => checked(a + b, pos),
                BinaryOp::Sub => checked(a - b, pos),
                BinaryOp::Mul => checked(a * b, pos),
                BinaryOp::Div => {
                    if b == 0.0 {
                        Err(EvalError::new(pos, "division by zero"))
                    } else {
                        checked(a / b, pos)
                    }
                }
                _ => unreachable!("logical and equality operators handled above"),
            }
        }
    }
}

fn expect_kind(program: &PolicyProgram, kind: PolicyKind) -> Result<&Expr, EvalError> {
    match (&program.body, program.kind == kind) {
        (PolicyBody::Expr(e), true) => Ok(e),
        (PolicyBody::Actuation { emit, .. }, true) => Ok(emit),
        _ => Err(EvalError::new(
            Pos::default(),
            format!("a {} program cannot be used for {kind}", program.kind),
        )),
    }
}

fn finite(value: f64, pos: Pos, what: &str) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::new(
            pos,
            format!("{what} must be finite, got {value}"),
        ))
    }
}

/// Runs a mediation program over one group of requests. `candidate` is the
/// mean of the group.
pub fn eval_mediation(
    program: &PolicyProgram,
    group: &GroupedRequests,
    ctx: &MediationContext,
) -> Result<MediatedRequest, EvalError> {
    let body = expect_kind(program, PolicyKind::Mediation)?;
    let values: Vec<f64> = group.values().collect();
    let candidate = mean(values.iter().copied())
        .ok_or_else(|| EvalError::new(Pos::default(), "empty request group"))?;
    let scope = Scope {
        candidate: Some(candidate),
        sensed: ctx.sensed_value,
        season: ctx.season,
        property_type: Some(&ctx.property_type),
        zone: Some(&group.zone),
        instance: Some(&group.instance),
        policy: Some(&ctx.policy_id),
        requests: Some(values),
        ..Default::default()
    };
    let value = num(eval(body, &scope)?, body.pos)?;
    Ok(MediatedRequest {
        zone: group.zone.clone(),
        instance: group.instance.clone(),
        value: finite(value, body.pos, "mediated value")?,
    })
}

/// Runs an actuation program for one mediated target: one raw action per
/// actuator of the instance, plus the program's conflict rule.
pub fn eval_actuation(
    program: &PolicyProgram,
    mediated: &MediatedRequest,
    instance: &PropertyInstance,
) -> Result<(Vec<Action>, ConflictRule), EvalError> {
    let PolicyBody::Actuation { emit, combine } = &program.body else {
        return Err(EvalError::new(
            Pos::default(),
            format!("a {} program cannot be used for actuation", program.kind),
        ));
    };
    let rule = ConflictRule::new(combine.combiner, combine.lower, combine.upper)
        .map_err(|e| EvalError::new(Pos::default(), e.to_string()))?;
    let mut actions = Vec::with_capacity(instance.actuators.len());
    for actuator in &instance.actuators {
        let scope = Scope {
            candidate: Some(mediated.value),
            property_type: Some(&instance.property_type),
            zone: Some(&mediated.zone),
            instance: Some(&mediated.instance),
            actuator: Some(actuator),
            actuator_count: Some(instance.actuators.len()),
            ..Default::default()
        };
        let value = num(eval(emit, &scope)?, emit.pos)?;
        actions.push(Action {
            actuator: actuator.clone(),
            value: finite(value, emit.pos, "actuator setting")?,
        });
    }
    Ok((actions, rule))
}

/// Runs a request-validation predicate.
pub fn eval_validation(
    program: &PolicyProgram,
    zone: &str,
    instance: &PropertyInstance,
    value: f64,
    season: Option<Season>,
) -> Result<bool, EvalError> {
    let body = expect_kind(program, PolicyKind::Validation)?;
    let scope = Scope {
        candidate: Some(value),
        season,
        property_type: Some(&instance.property_type),
        zone: Some(zone),
        instance: Some(&instance.id),
        ..Default::default()
    };
    boolean(eval(body, &scope)?, body.pos)
}
