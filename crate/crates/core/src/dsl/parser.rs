use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::DslError;
use crate::policies::Combiner;

const MAX_DEPTH: usize = 32;

const KEYWORDS: &[&str] = &[
    "if", "then", "elif", "else", "and", "or", "not", "true", "false", "inf", "emit", "combine",
    "within",
];

/// Parses a program, inferring its kind from the header or, without one,
/// from the body (`emit ...` is actuation, anything else mediation).
pub fn parse_policy(source: &str) -> Result<PolicyProgram, DslError> {
    parse(source, None)
}

/// Parses a program that must be of `kind`. A header naming another kind is
/// rejected; a headerless program is checked against `kind`.
pub fn parse_policy_as(source: &str, kind: PolicyKind) -> Result<PolicyProgram, DslError> {
    parse(source, Some(kind))
}

fn parse(source: &str, expected: Option<PolicyKind>) -> Result<PolicyProgram, DslError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        i: 0,
        kind: PolicyKind::Mediation,
        depth: 0,
    };

    let (header_kind, name) = p.header()?;
    let kind = match (header_kind, expected) {
        (Some(declared), Some(expected)) if declared != expected => {
            return Err(DslError::KindMismatch { declared, expected })
        }
        (Some(k), _) => k,
        (None, Some(k)) => k,
        (None, None) => {
            if p.peek_ident("emit") {
                PolicyKind::Actuation
            } else {
                PolicyKind::Mediation
            }
        }
    };
    p.kind = kind;

    let body = match kind {
        PolicyKind::Actuation => {
            p.expect_ident("emit")?;
            let emit = p.expr()?;
            p.expect_ident("combine")?;
            let combiner = match p.peek().tok.clone() {
                Tok::Ident(s) if s == "max" => Combiner::Max,
                Tok::Ident(s) if s == "min" => Combiner::Min,
                _ => return Err(p.unexpected(&["`max`", "`min`"])),
            };
            p.bump();
            p.expect_ident("within")?;
            p.expect(Tok::LBracket, "`[`")?;
            let lower = p.bound()?;
            p.expect(Tok::Comma, "`,`")?;
            let upper = p.bound()?;
            p.expect(Tok::RBracket, "`]`")?;
            if lower > upper {
                return Err(DslError::Syntax {
                    pos: p.peek().pos,
                    expected: vec!["lower bound <= upper bound".into()],
                    found: format!("[{lower}, {upper}]"),
                });
            }
            PolicyBody::Actuation {
                emit,
                combine: ConflictDirective {
                    combiner,
                    lower,
                    upper,
                },
            }
        }
        PolicyKind::Mediation | PolicyKind::Validation => PolicyBody::Expr(p.expr()?),
    };
    if p.peek().tok != Tok::Eof {
        return Err(p.unexpected(&["end of input"]));
    }
    Ok(PolicyProgram { name, kind, body })
}

struct Parser {
    tokens: Vec<Token>,
    i: usize,
    kind: PolicyKind,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.i]
    }

    fn peek_at(&self, offset: usize) -> &Token {
        let idx = (self.i + offset).min(self.tokens.len() - 1);
        &self.tokens[idx]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.i].clone();
        if self.i < self.tokens.len() - 1 {
            self.i += 1;
        }
        t
    }

    fn peek_ident(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == word)
    }

    fn unexpected(&self, expected: &[&str]) -> DslError {
        DslError::Syntax {
            pos: self.peek().pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok, label: &str) -> Result<Token, DslError> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[label]))
        }
    }

    fn expect_ident(&mut self, word: &str) -> Result<Token, DslError> {
        if self.peek_ident(word) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[&format!("`{word}`")]))
        }
    }

    /// `KIND [NAME]` alone on the first line.
    fn header(&mut self) -> Result<(Option<PolicyKind>, Option<String>), DslError> {
        let kind = match &self.peek().tok {
            Tok::Ident(s) => match s.as_str() {
                "mediation" => PolicyKind::Mediation,
                "actuation" => PolicyKind::Actuation,
                "validation" => PolicyKind::Validation,
                _ => return Ok((None, None)),
            },
            _ => return Ok((None, None)),
        };
        let line = self.bump().pos.line;
        let mut name = None;
        if let Tok::Ident(s) = &self.peek().tok {
            if self.peek().pos.line == line {
                if KEYWORDS.contains(&s.as_str()) {
                    return Err(self.unexpected(&["policy name"]));
                }
                name = Some(s.clone());
                self.bump();
            }
        }
        if self.peek().tok != Tok::Eof && self.peek().pos.line == line {
            return Err(self.unexpected(&["newline after header"]));
        }
        Ok((Some(kind), name))
    }

    fn bound(&mut self) -> Result<f64, DslError> {
        let sign = match self.peek().tok {
            Tok::Minus => {
                self.bump();
                -1.0
            }
            Tok::Plus => {
                self.bump();
                1.0
            }
            _ => 1.0,
        };
        match self.peek().tok.clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(sign * n)
            }
            Tok::Ident(s) if s == "inf" => {
                self.bump();
                Ok(sign * f64::INFINITY)
            }
            _ => Err(self.unexpected(&["number", "`inf`"])),
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(DslError::Syntax {
                pos: self.peek().pos,
                expected: vec![format!("at most {MAX_DEPTH} levels of nesting")],
                found: "deeper nesting".into(),
            });
        }
        let result = if self.peek_ident("if") {
            self.conditional()
        } else {
            self.or_expr()
        };
        self.depth -= 1;
        result
    }

    fn conditional(&mut self) -> Result<Expr, DslError> {
        let pos = self.expect_ident("if")?.pos;
        let mut branches = Vec::new();
        loop {
            let cond = self.expr()?;
            self.expect_ident("then")?;
            let value = self.expr()?;
            branches.push((cond, value));
            if self.peek_ident("elif") {
                self.bump();
                continue;
            }
            if self.peek_ident("else") {
                self.bump();
                let otherwise = Box::new(self.expr()?);
                return Ok(Expr::at(
                    ExprKind::Cond {
                        branches,
                        otherwise,
                    },
                    pos,
                ));
            }
            return Err(DslError::NonExhaustive { pos });
        }
    }

    fn comparison_op(&self) -> Option<BinaryOp> {
        Some(match &self.peek().tok {
            Tok::EqEq => BinaryOp::Eq,
            Tok::NotEq => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            _ => return None,
        })
    }

    fn left_assoc(
        &mut self,
        op_at: impl Fn(&Tok) -> Option<BinaryOp>,
        operand: fn(&mut Self) -> Result<Expr, DslError>,
    ) -> Result<Expr, DslError> {
        let mut lhs = operand(self)?;
        while let Some(op) = op_at(&self.peek().tok) {
            let pos = self.bump().pos;
            let rhs = operand(self)?;
            lhs = Expr::at(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> Result<Expr, DslError> {
        self.left_assoc(
            |t| matches!(t, Tok::Ident(s) if s == "or").then_some(BinaryOp::Or),
            Self::and_expr,
        )
    }

    fn and_expr(&mut self) -> Result<Expr, DslError> {
        self.left_assoc(
            |t| matches!(t, Tok::Ident(s) if s == "and").then_some(BinaryOp::And),
            Self::not_expr,
        )
    }

    fn not_expr(&mut self) -> Result<Expr, DslError> {
        if self.peek_ident("not") {
            let pos = self.bump().pos;
            let operand = self.nested(Self::not_expr)?;
            return Ok(Expr::at(
                ExprKind::Unary(UnaryOp::Not, Box::new(operand)),
                pos,
            ));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, DslError> {
        let lhs = self.add_expr()?;
        let Some(op) = self.comparison_op() else {
            return Ok(lhs);
        };
        let pos = self.bump().pos;
        let rhs = self.add_expr()?;
        if self.comparison_op().is_some() {
            return Err(self.unexpected(&["end of comparison"]));
        }
        Ok(Expr::at(
            ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            pos,
        ))
    }

    fn add_expr(&mut self) -> Result<Expr, DslError> {
        self.left_assoc(
            |t| match t {
                Tok::Plus => Some(BinaryOp::Add),
                Tok::Minus => Some(BinaryOp::Sub),
                _ => None,
            },
            Self::mul_expr,
        )
    }

    fn mul_expr(&mut self) -> Result<Expr, DslError> {
        self.left_assoc(
            |t| match t {
                Tok::Star => Some(BinaryOp::Mul),
                Tok::Slash => Some(BinaryOp::Div),
                _ => None,
            },
            Self::unary,
        )
    }

    fn nested<T>(
        &mut self,
        f: impl FnOnce(&mut Self) -> Result<T, DslError>,
    ) -> Result<T, DslError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(DslError::Syntax {
                pos: self.peek().pos,
                expected: vec![format!("at most {MAX_DEPTH} levels of nesting")],
                found: "deeper nesting".into(),
            });
        }
        let r = f(self);
        self.depth -= 1;
        r
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.peek().tok == Tok::Minus {
            let pos = self.bump().pos;
            let operand = self.nested(Self::unary)?;
            return Ok(Expr::at(
                ExprKind::Unary(UnaryOp::Neg, Box::new(operand)),
                pos,
            ));
        }
        self.primary()
    }

    fn args(&mut self) -> Result<Vec<Expr>, DslError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.peek().tok == Tok::RParen {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek().tok {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    return Ok(args);
                }
                _ => return Err(self.unexpected(&["`,`", "`)`"])),
            }
        }
    }

    fn arity(&self, name: &str, pos: Pos, args: &[Expr], n: usize) -> Result<(), DslError> {
        if args.len() == n {
            Ok(())
        } else {
            Err(DslError::Syntax {
                pos,
                expected: vec![format!("{n} argument(s) to `{name}`")],
                found: format!("{} argument(s)", args.len()),
            })
        }
    }

    fn actuation_only(&self, name: &str, pos: Pos) -> Result<(), DslError> {
        if self.kind == PolicyKind::Actuation {
            Ok(())
        } else {
            Err(DslError::UnboundReference {
                pos,
                name: name.to_owned(),
                kind: self.kind,
            })
        }
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let token = self.peek().clone();
        let pos = token.pos;
        match token.tok {
            Tok::Number(n) => {
                self.bump();
                Ok(Expr::at(ExprKind::Number(n), pos))
            }
            Tok::Text(s) => {
                self.bump();
                Ok(Expr::at(ExprKind::Text(s), pos))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(word) => {
                let is_call = self.peek_at(1).tok == Tok::LParen;
                match word.as_str() {
                    "true" | "false" => {
                        self.bump();
                        Ok(Expr::at(ExprKind::Bool(word == "true"), pos))
                    }
                    "inf" => {
                        self.bump();
                        Ok(Expr::at(ExprKind::Number(f64::INFINITY), pos))
                    }
                    "if" => self.conditional(),
                    "split_equal" => {
                        self.actuation_only(&word, pos)?;
                        self.bump();
                        Ok(Expr::at(ExprKind::SplitEqual, pos))
                    }
                    "avg" | "min" | "max" | "sum" | "count" if is_call => {
                        self.bump();
                        let agg = match word.as_str() {
                            "avg" => Aggregate::Avg,
                            "min" => Aggregate::Min,
                            "max" => Aggregate::Max,
                            "sum" => Aggregate::Sum,
                            _ => Aggregate::Count,
                        };
                        let args = self.args()?;
                        if args.is_empty() {
                            return Err(DslError::Syntax {
                                pos,
                                expected: vec![format!("at least one argument to `{word}`")],
                                found: "`()`".into(),
                            });
                        }
                        Ok(Expr::at(ExprKind::Aggregate(agg, args), pos))
                    }
                    "clamp" if is_call => {
                        self.bump();
                        let mut args = self.args()?;
                        self.arity(&word, pos, &args, 3)?;
                        let hi = args.pop().unwrap();
                        let lo = args.pop().unwrap();
                        let x = args.pop().unwrap();
                        Ok(Expr::at(
                            ExprKind::Clamp(Box::new(x), Box::new(lo), Box::new(hi)),
                            pos,
                        ))
                    }
                    "binary" if is_call => {
                        self.actuation_only(&word, pos)?;
                        self.bump();
                        let mut args = self.args()?;
                        self.arity(&word, pos, &args, 3)?;
                        let threshold = args.pop().unwrap();
                        let off = args.pop().unwrap();
                        let on = args.pop().unwrap();
                        Ok(Expr::at(
                            ExprKind::Switch {
                                on: Box::new(on),
                                off: Box::new(off),
                                threshold: Box::new(threshold),
                            },
                            pos,
                        ))
                    }
                    "constant" if is_call => {
                        self.bump();
                        let mut args = self.args()?;
                        self.arity(&word, pos, &args, 1)?;
                        Ok(Expr::at(
                            ExprKind::Constant(Box::new(args.pop().unwrap())),
                            pos,
                        ))
                    }
                    "fail" if is_call => {
                        self.bump();
                        self.expect(Tok::LParen, "`(`")?;
                        let message = match self.peek().tok.clone() {
                            Tok::Text(s) => {
                                self.bump();
                                s
                            }
                            _ => return Err(self.unexpected(&["string"])),
                        };
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Expr::at(ExprKind::Fail(message), pos))
                    }
                    w if KEYWORDS.contains(&w) => Err(self.unexpected(&["expression"])),
                    _ => match Reference::from_name(&word) {
                        Some(r) if !is_call && r.bound_in(self.kind) => {
                            self.bump();
                            Ok(Expr::at(ExprKind::Ref(r), pos))
                        }
                        _ => Err(DslError::UnboundReference {
                            pos,
                            name: word,
                            kind: self.kind,
                        }),
                    },
                }
            }
            _ => Err(self.unexpected(&["expression"])),
        }
    }
}
