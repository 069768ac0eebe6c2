use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::policies::Combiner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Mediation,
    Actuation,
    Validation,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Mediation => "mediation",
            PolicyKind::Actuation => "actuation",
            PolicyKind::Validation => "validation",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mediation" => Ok(PolicyKind::Mediation),
            "actuation" => Ok(PolicyKind::Actuation),
            "validation" | "request-validation" => Ok(PolicyKind::Validation),
            other => Err(format!("unknown policy kind `{other}`")),
        }
    }
}

/// 1-based source position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Names that programs can read. Which ones are bound depends on the kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reference {
    Candidate,
    Sensed,
    Season,
    PropertyType,
    Zone,
    Instance,
    Policy,
    Requests,
    Actuator,
    ActuatorCount,
}

impl Reference {
    pub const ALL: [Reference; 10] = [
        Reference::Candidate,
        Reference::Sensed,
        Reference::Season,
        Reference::PropertyType,
        Reference::Zone,
        Reference::Instance,
        Reference::Policy,
        Reference::Requests,
        Reference::Actuator,
        Reference::ActuatorCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Reference::Candidate => "candidate",
            Reference::Sensed => "sensed",
            Reference::Season => "season",
            Reference::PropertyType => "property_type",
            Reference::Zone => "zone",
            Reference::Instance => "instance",
            Reference::Policy => "policy",
            Reference::Requests => "requests",
            Reference::Actuator => "actuator",
            Reference::ActuatorCount => "actuator_count",
        }
    }

    pub fn from_name(name: &str) -> Option<Reference> {
        Reference::ALL.into_iter().find(|r| r.name() == name)
    }

    pub fn bound_in(self, kind: PolicyKind) -> bool {
        use Reference::*;
        match kind {
            PolicyKind::Mediation => matches!(
                self,
                Candidate | Sensed | Season | PropertyType | Zone | Instance | Policy | Requests
            ),
            PolicyKind::Actuation => matches!(
                self,
                Candidate | PropertyType | Zone | Instance | Actuator | ActuatorCount
            ),
            PolicyKind::Validation => {
                matches!(self, Candidate | Season | PropertyType | Zone | Instance)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Avg,
    Min,
    Max,
    Sum,
    Count,
}

impl Aggregate {
    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Avg => "avg",
            Aggregate::Min => "min",
            Aggregate::Max => "max",
            Aggregate::Sum => "sum",
            Aggregate::Count => "count",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "or",
            BinaryOp::And => "and",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

/// Expression node. Equality ignores source positions.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr {
            kind,
            pos: Pos::default(),
        }
    }

    pub fn at(kind: ExprKind, pos: Pos) -> Self {
        Expr { kind, pos }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    /// Non-negative literal; `inf` is `Number(f64::INFINITY)`.
    Number(f64),
    Bool(bool),
    Text(String),
    Ref(Reference),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Aggregate(Aggregate, Vec<Expr>),
    Clamp(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `if c then e elif c then e ... else e`
    Cond {
        branches: Vec<(Expr, Expr)>,
        otherwise: Box<Expr>,
    },
    /// Actuation only: `candidate / actuator_count`.
    SplitEqual,
    /// Actuation only: `on` when `candidate > threshold`, else `off`.
    Switch {
        on: Box<Expr>,
        off: Box<Expr>,
        threshold: Box<Expr>,
    },
    Constant(Box<Expr>),
    Fail(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConflictDirective {
    pub combiner: Combiner,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyBody {
    /// Mediation value or validation predicate.
    Expr(Expr),
    Actuation {
        emit: Expr,
        combine: ConflictDirective,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyProgram {
    pub name: Option<String>,
    pub kind: PolicyKind,
    pub body: PolicyBody,
}

impl PolicyProgram {
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }
}
