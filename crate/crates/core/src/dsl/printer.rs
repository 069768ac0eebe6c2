//! Canonical source form. Output is byte-stable and re-parses to a
//! structurally equal program.

use super::ast::*;
use crate::policies::Combiner;

const INDENT: &str = "  ";

pub fn print_policy(program: &PolicyProgram) -> String {
    let mut out = String::new();
    if program.name.is_some() || program.kind == PolicyKind::Validation {
        out.push_str(program.kind.as_str());
        if let Some(name) = &program.name {
            out.push(' ');
            out.push_str(name);
        }
        out.push('\n');
    }
    match &program.body {
        PolicyBody::Expr(e) => {
            block(e, 0, &mut out);
            out.push('\n');
        }
        PolicyBody::Actuation { emit, combine } => {
            out.push_str("emit");
            if matches!(emit.kind, ExprKind::Cond { .. }) {
                out.push('\n');
                block(emit, 1, &mut out);
            } else {
                out.push(' ');
                out.push_str(&print_expr(emit));
            }
            out.push('\n');
            let combiner = match combine.combiner {
                Combiner::Max => "max",
                Combiner::Min => "min",
            };
            out.push_str(&format!(
                "combine {combiner} within [{}, {}]\n",
                bound(combine.lower),
                bound(combine.upper)
            ));
        }
    }
    out
}

/// Single-line form of an expression.
pub fn print_expr(expr: &Expr) -> String {
    let mut out = String::new();
    inline(expr, 0, &mut out);
    out
}

fn bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        number(v)
    }
}

fn number(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

fn text(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str(INDENT);
    }
}

/// Multi-line layout for conditionals in statement position.
fn block(expr: &Expr, indent: usize, out: &mut String) {
    pad(indent, out);
    match &expr.kind {
        ExprKind::Cond {
            branches,
            otherwise,
        } => {
            for (i, (cond, value)) in branches.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                    pad(indent, out);
                    out.push_str("elif ");
                } else {
                    out.push_str("if ");
                }
                inline(cond, 0, out);
                out.push_str(" then\n");
                block(value, indent + 1, out);
            }
            out.push('\n');
            pad(indent, out);
            out.push_str("else\n");
            block(otherwise, indent + 1, out);
        }
        _ => inline(expr, 0, out),
    }
}

const LEVEL_COND: u8 = 0;
const LEVEL_NOT: u8 = 3;
const LEVEL_NEG: u8 = 7;
const LEVEL_ATOM: u8 = 8;

fn level(expr: &Expr) -> u8 {
    match &expr.kind {
        ExprKind::Cond { .. } => LEVEL_COND,
        ExprKind::Binary(op, _, _) => op.precedence(),
        ExprKind::Unary(UnaryOp::Not, _) => LEVEL_NOT,
        ExprKind::Unary(UnaryOp::Neg, _) => LEVEL_NEG,
        _ => LEVEL_ATOM,
    }
}

fn args(items: &[&Expr], out: &mut String) {
    out.push('(');
    for (i, e) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        inline(e, 0, out);
    }
    out.push(')');
}

fn inline(expr: &Expr, min_level: u8, out: &mut String) {
    let wrap = level(expr) < min_level;
    if wrap {
        out.push('(');
    }
    match &expr.kind {
        ExprKind::Number(n) => out.push_str(&number(*n)),
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Text(s) => out.push_str(&text(s)),
        ExprKind::Ref(r) => out.push_str(r.name()),
        ExprKind::SplitEqual => out.push_str("split_equal"),
        ExprKind::Unary(UnaryOp::Neg, e) => {
            out.push('-');
            inline(e, LEVEL_NEG, out);
        }
        ExprKind::Unary(UnaryOp::Not, e) => {
            out.push_str("not ");
            inline(e, LEVEL_NOT, out);
        }
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            let (lmin, rmin) = if op.is_comparison() {
                (p + 1, p + 1)
            } else {
                (p, p + 1)
            };
            inline(l, lmin, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            inline(r, rmin, out);
        }
        ExprKind::Aggregate(agg, items) => {
            out.push_str(agg.name());
            args(&items.iter().collect::<Vec<_>>(), out);
        }
        ExprKind::Clamp(x, lo, hi) => {
            out.push_str("clamp");
            args(&[x, lo, hi], out);
        }
        ExprKind::Switch { on, off, threshold } => {
            out.push_str("binary");
            args(&[on, off, threshold], out);
        }
        ExprKind::Constant(e) => {
            out.push_str("constant");
            args(&[e], out);
        }
        ExprKind::Fail(msg) => {
            out.push_str("fail(");
            out.push_str(&text(msg));
            out.push(')');
        }
        ExprKind::Cond {
            branches,
            otherwise,
        } => {
            for (i, (cond, value)) in branches.iter().enumerate() {
                out.push_str(if i == 0 { "if " } else { " elif " });
                inline(cond, 0, out);
                out.push_str(" then ");
                inline(value, 0, out);
            }
            out.push_str(" else ");
            inline(otherwise, 0, out);
        }
    }
    if wrap {
        out.push(')');
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_policy;

    fn canon(src: &str) -> String {
        print_policy(&parse_policy(src).unwrap())
    }

    #[test]
    fn literal() {
        assert_eq!(canon("42"), "42\n");
        assert_eq!(print_expr(&Expr::new(ExprKind::Number(42.0))), "42");
    }

    #[test]
    fn minimal_parentheses() {
        assert_eq!(canon("(1 - (2 - 3)) * (4)"), "(1 - (2 - 3)) * 4\n");
        assert_eq!(canon("((1 + 2) + 3)"), "1 + 2 + 3\n");
        assert_eq!(
            canon("not (candidate > 1 or false)"),
            "not (candidate > 1 or false)\n"
        );
        assert_eq!(canon("- (1 + 2)"), "-(1 + 2)\n");
        assert_eq!(
            canon("1 + (if true then 2 else 3)"),
            "1 + (if true then 2 else 3)\n"
        );
    }

    #[test]
    fn nested_conditional_layout() {
        let src = "mediation w\nif property_type == \"light\" then if sensed > 100 then clamp(candidate, 100, 255) else clamp(candidate, 180, 255) else fail(\"no rule\")";
        let once = canon(src);
        assert_eq!(
            once,
            "mediation w
if property_type == \"light\" then
  if sensed > 100 then
    clamp(candidate, 100, 255)
  else
    clamp(candidate, 180, 255)
else
  fail(\"no rule\")
"
        );
        assert_eq!(canon(&once), once);
    }

    #[test]
    fn actuation_layout() {
        assert_eq!(
            canon("emit split_equal combine max within [0,100]"),
            "emit split_equal\ncombine max within [0, 100]\n"
        );
        assert_eq!(
            canon("actuation b\nemit if actuator == \"heater\" then binary(100, 0, 0) else split_equal\ncombine max within [-inf, inf]"),
            "actuation b\nemit\n  if actuator == \"heater\" then\n    binary(100, 0, 0)\n  else\n    split_equal\ncombine max within [-inf, +inf]\n"
        );
    }

    #[test]
    fn strings_are_escaped() {
        assert_eq!(
            canon(r#"fail("say \"hi\" \\ bye")"#),
            "fail(\"say \\\"hi\\\" \\\\ bye\")\n"
        );
    }
}
