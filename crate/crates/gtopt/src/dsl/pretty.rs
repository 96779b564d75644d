//! Canonical pretty-printer. `parse(pretty(parse(t)))` is structurally equal
//! to `parse(t)` for valid specs.

use std::fmt::Write;

use crate::expr::Expr;
use crate::ilp::Sense;

use super::ast::*;

pub fn pretty(spec: &Spec) -> String {
    let mut out = String::new();
    for p in &spec.patterns {
        writeln!(out, "pattern {} {{", p.name).unwrap();
        write_body(&mut out, &p.body, "  ");
        out.push_str("}\n\n");
    }
    for r in &spec.rules {
        writeln!(out, "rule {} {{", r.name).unwrap();
        out.push_str("  lhs {\n");
        write_body(&mut out, &r.lhs, "    ");
        out.push_str("  }\n  do {\n");
        for a in &r.actions {
            out.push_str("    ");
            write_action(&mut out, a);
        }
        out.push_str("  }\n}\n\n");
    }
    for m in &spec.mappings {
        writeln!(out, "mapping {} to {}", m.name, m.target).unwrap();
    }
    if !spec.mappings.is_empty() {
        out.push('\n');
    }
    for c in &spec.constraints {
        out.push_str("constraint");
        if let Some(p) = &c.for_each {
            write!(out, " forEach {p}").unwrap();
        }
        out.push_str(": ");
        write_template(&mut out, &c.lhs);
        write!(out, " {} ", c.op).unwrap();
        write_template(&mut out, &c.rhs);
        out.push('\n');
    }
    if !spec.constraints.is_empty() {
        out.push('\n');
    }
    out.push_str(match spec.objective.sense {
        Sense::Minimize => "minimize: ",
        Sense::Maximize => "maximize: ",
    });
    write_template(&mut out, &spec.objective.expr);
    out.push('\n');
    out
}

fn write_body(out: &mut String, body: &PatternBody, indent: &str) {
    for v in &body.vars {
        writeln!(out, "{indent}{}: {};", v.var, v.ty).unwrap();
    }
    for e in &body.edges {
        writeln!(out, "{indent}{} -{}-> {};", e.src, e.ty, e.tgt).unwrap();
    }
    for r in &body.requires {
        writeln!(out, "{indent}require {} {} {};", r.lhs, r.op, r.rhs).unwrap();
    }
}

fn write_action(out: &mut String, action: &ActionDecl) {
    match action {
        ActionDecl::CreateNode { var, ty, attrs, .. } => {
            write!(out, "create {var}: {ty}").unwrap();
            if !attrs.is_empty() {
                out.push_str(" { ");
                for (i, (name, expr)) in attrs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write!(out, "{name} = {expr}").unwrap();
                }
                out.push_str(" }");
            }
            out.push_str(";\n");
        }
        ActionDecl::CreateEdge { src, ty, tgt, .. } => {
            writeln!(out, "create {src} -{ty}-> {tgt};").unwrap();
        }
        ActionDecl::DeleteNode { var, .. } => writeln!(out, "delete {var};").unwrap(),
        ActionDecl::DeleteEdge { src, ty, tgt, .. } => {
            writeln!(out, "delete {src} -{ty}-> {tgt};").unwrap();
        }
        ActionDecl::SetAttr {
            var, attr, value, ..
        } => {
            writeln!(out, "set {var}.{attr} := {value};").unwrap();
        }
    }
}

fn write_template(out: &mut String, tpl: &TemplateExpr) {
    for (i, term) in tpl.terms.iter().enumerate() {
        let (negated, body) = term_text(term);
        if i == 0 {
            if negated {
                out.push_str("- ");
            }
        } else if negated {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(&body);
    }
}

/// Render a term, pulling a top-level negation out as a sign.
fn term_text(term: &TemplateTerm) -> (bool, String) {
    match term {
        TemplateTerm::Scalar { expr, .. } => match expr {
            Expr::Neg(inner) => (true, format!("{inner}")),
            other => (false, format!("{other}")),
        },
        TemplateTerm::Sum {
            coeff,
            mapping,
            filters,
            ..
        } => {
            let mut s = String::new();
            let mut negated = false;
            if let Some(coeff) = coeff {
                let coeff = match coeff {
                    Expr::Neg(inner) => {
                        negated = true;
                        inner.as_ref()
                    }
                    other => other,
                };
                // parenthesize additive coefficients so `a + b * sum(..)`
                // round-trips unambiguously
                match coeff {
                    Expr::Bin {
                        op: crate::expr::BinOp::Add | crate::expr::BinOp::Sub,
                        ..
                    } => write!(s, "({coeff}) * ").unwrap(),
                    Expr::Int(1) => {}
                    other => write!(s, "{other} * ").unwrap(),
                }
            }
            write!(s, "sum({mapping}").unwrap();
            if !filters.is_empty() {
                s.push_str(" where ");
                for (i, (a, b)) in filters.iter().enumerate() {
                    if i > 0 {
                        s.push_str(" && ");
                    }
                    write!(s, "{a} == ctx.{b}").unwrap();
                }
            }
            s.push(')');
            (negated, s)
        }
    }
}
