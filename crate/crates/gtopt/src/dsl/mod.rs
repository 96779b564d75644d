//! The `.gspec` specification language: patterns, rules, mappings, linear
//! constraints, and one objective, in a small LL(1) syntax.
//!
//! ```text
//! pattern waiting {
//!     s: Server; c: Client;
//!     s -clients-> c;
//!     require c.connected == false;
//! }
//! rule connect {
//!     lhs { s: Server; c: Client; s -clients-> c; require c.connected == false; }
//!     do  { create k: Connection { bw = min(s.upload, c.download) };
//!           create k -source-> s; create k -target-> c;
//!           set c.connected := true; }
//! }
//! mapping m to connect
//! constraint forEach waiting: sum(m where c == ctx.c) = 1
//! minimize: 2 * sum(m)
//! ```
//!
//! [`parse`] turns text into an AST (collecting diagnostics instead of
//! stopping at the first error), [`typecheck`] validates it against a
//! metamodel, and [`compile`] lowers it into patterns, rules, and constraint
//! templates ready for the pipeline.

mod ast;
mod parser;
mod pretty;
mod token;
mod typecheck;

pub use ast::{
    ActionDecl, ConstraintDecl, Diagnostic, EdgeDecl, MappingDecl, ObjectiveDecl, PatternBody,
    PatternDecl, RequireDecl, RuleDecl, Severity, Spec, TemplateExpr, TemplateTerm, VarDecl,
};
pub use parser::parse;
pub use pretty::pretty;
pub use token::Span;
pub use typecheck::{
    compile, typecheck, CompiledConstraint, CompiledObjective, CompiledSpec, MappingDef,
    MappingTarget, SumTerm,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttrDef, AttrKind, EdgeTypeDef, Metamodel, NodeTypeDef};

    fn mm() -> Metamodel {
        Metamodel::new(
            vec![
                NodeTypeDef {
                    name: "Server".into(),
                    attrs: vec![AttrDef {
                        name: "upload".into(),
                        kind: AttrKind::Real,
                    }],
                },
                NodeTypeDef {
                    name: "Client".into(),
                    attrs: vec![
                        AttrDef {
                            name: "rc".into(),
                            kind: AttrKind::Bool,
                        },
                        AttrDef {
                            name: "connected".into(),
                            kind: AttrKind::Bool,
                        },
                        AttrDef {
                            name: "download".into(),
                            kind: AttrKind::Real,
                        },
                    ],
                },
                NodeTypeDef {
                    name: "Connection".into(),
                    attrs: vec![AttrDef {
                        name: "bw".into(),
                        kind: AttrKind::Real,
                    }],
                },
            ],
            vec![
                EdgeTypeDef {
                    name: "clients".into(),
                    src: "Server".into(),
                    tgt: "Client".into(),
                },
                EdgeTypeDef {
                    name: "source".into(),
                    src: "Connection".into(),
                    tgt: "Server".into(),
                },
                EdgeTypeDef {
                    name: "target".into(),
                    src: "Connection".into(),
                    tgt: "Client".into(),
                },
            ],
        )
        .unwrap()
    }

    const GOOD: &str = r#"
// depth-1 toy: connect every waiting client once
pattern waiting {
    s: Server;
    c: Client;
    s -clients-> c;
    require c.connected == false;
}

rule connect {
    lhs {
        s: Server;
        c: Client;
        s -clients-> c;
        require c.connected == false;
    }
    do {
        create k: Connection { bw = min(s.upload, c.download) };
        create k -source-> s;
        create k -target-> c;
        set c.connected := true;
    }
}

mapping m to connect

constraint forEach waiting: sum(m where c == ctx.c) = 1
constraint: min(1, 2) * sum(m) <= 10

minimize: 2 * sum(m)
"#;

    #[test]
    fn parses_and_typechecks_a_complete_spec() {
        let spec = parse(GOOD).unwrap();
        assert_eq!(spec.patterns.len(), 1);
        assert_eq!(spec.rules.len(), 1);
        assert_eq!(spec.mappings.len(), 1);
        assert_eq!(spec.constraints.len(), 2);
        let diags = typecheck(&spec, &mm());
        assert!(diags.is_empty(), "unexpected diagnostics: {diags:?}");
        let compiled = compile(&spec, &mm()).unwrap();
        assert_eq!(compiled.patterns.len(), 2); // waiting + connect's LHS
        assert!(matches!(
            compiled.mappings[0].target,
            MappingTarget::Rule(_)
        ));
    }

    #[test]
    fn minimal_spec_parses() {
        let text = "rule r { lhs { c: Client; } do { set c.rc := true; } }\n\
                    mapping m to r\n\
                    constraint: sum(m) = 1\n\
                    minimize: sum(m)";
        let spec = parse(text).unwrap();
        assert_eq!(spec.mappings.len(), 1);
        assert_eq!(spec.constraints.len(), 1);
        assert!(typecheck(&spec, &mm()).is_empty());
    }

    #[test]
    fn empty_input_reports_missing_objective() {
        let diags = parse("").unwrap_err();
        assert!(
            diags
                .iter()
                .any(|d| d.message.contains("missing objective")),
            "{diags:?}"
        );
    }

    #[test]
    fn unknown_mapping_in_sum_is_named_with_span() {
        let text = "constraint: sum(unknown) = 1\nminimize: 0";
        let diags = parse(text).unwrap_err();
        let hit = diags
            .iter()
            .find(|d| d.message.contains("`unknown`"))
            .expect("diagnostic names the mapping");
        assert_eq!(hit.span.line, 1);
        assert!(hit.span.col > 1);
    }

    #[test]
    fn error_recovery_scans_past_first_error() {
        let text = "pattern p { c: Client; q error here; d: Client; }\nconstraint: sum(nope) = 1\nminimize: 0";
        let diags = parse(text).unwrap_err();
        // both the bad statement and the unknown mapping are reported
        assert!(diags.iter().any(|d| d.span.line == 1));
        assert!(diags.iter().any(|d| d.message.contains("nope")));
    }

    #[test]
    fn typecheck_flags_unknown_node_type() {
        let text = "pattern p { c: Clientt; }\nminimize: 0";
        let spec = parse(text).unwrap();
        let diags = typecheck(&spec, &mm());
        assert_eq!(
            diags
                .iter()
                .filter(|d| d.severity == Severity::Error)
                .count(),
            1
        );
        assert!(diags[0].message.contains("Clientt"));
    }

    #[test]
    fn typecheck_flags_bool_arithmetic_in_require() {
        let text = "pattern p { c: Client; require c.rc + 1 = 2; }\nminimize: 0";
        let spec = parse(text).unwrap();
        let diags = typecheck(&spec, &mm());
        assert!(
            diags.iter().any(|d| d.message.contains("bool")),
            "expected a kind-mismatch diagnostic, got {diags:?}"
        );
    }

    #[test]
    fn typecheck_rejects_strict_constraint_senses() {
        let text = "rule r { lhs { c: Client; } do { set c.rc := true; } }\nmapping m to r\nconstraint: sum(m) < 1\nminimize: sum(m)";
        let spec = parse(text).unwrap();
        let diags = typecheck(&spec, &mm());
        assert!(diags
            .iter()
            .any(|d| d.message.contains("not a valid linear constraint")));
    }

    #[test]
    fn spans_index_real_source_text() {
        let text = "pattern p { c: Clientt; require c.rc + 1 = 2; }\nconstraint: sum(ghost) < x\nminimize: 0";
        let lines: Vec<&str> = text.lines().collect();
        let mut all = Vec::new();
        match parse(text) {
            Ok(spec) => all.extend(typecheck(&spec, &mm())),
            Err(diags) => all.extend(diags),
        }
        assert!(!all.is_empty());
        for d in &all {
            let line = (d.span.line as usize).checked_sub(1).unwrap();
            assert!(line < lines.len(), "line {} out of range", d.span.line);
            assert!(
                (d.span.col as usize) <= lines[line].chars().count() + 1,
                "col {} out of range on line {}",
                d.span.col,
                d.span.line
            );
        }
    }

    #[test]
    fn pretty_print_parse_is_a_fixpoint() {
        let spec = parse(GOOD).unwrap();
        let printed = pretty(&spec);
        let reparsed = parse(&printed)
            .unwrap_or_else(|d| panic!("pretty output must parse: {d:?}\n{printed}"));
        let strip = |mut s: Spec| {
            // spans differ between layouts; compare structure only
            fn zero(span: &mut Span) {
                *span = Span { line: 1, col: 1 };
            }
            for p in &mut s.patterns {
                zero(&mut p.span);
                for v in &mut p.body.vars {
                    zero(&mut v.span);
                }
                for e in &mut p.body.edges {
                    zero(&mut e.span);
                }
                for r in &mut p.body.requires {
                    zero(&mut r.span);
                }
            }
            for r in &mut s.rules {
                zero(&mut r.span);
                for v in &mut r.lhs.vars {
                    zero(&mut v.span);
                }
                for e in &mut r.lhs.edges {
                    zero(&mut e.span);
                }
                for rq in &mut r.lhs.requires {
                    zero(&mut rq.span);
                }
                for a in &mut r.actions {
                    match a {
                        ActionDecl::CreateNode { span, .. }
                        | ActionDecl::CreateEdge { span, .. }
                        | ActionDecl::DeleteNode { span, .. }
                        | ActionDecl::DeleteEdge { span, .. }
                        | ActionDecl::SetAttr { span, .. } => zero(span),
                    }
                }
            }
            for m in &mut s.mappings {
                zero(&mut m.span);
            }
            for c in &mut s.constraints {
                zero(&mut c.span);
                for t in c.lhs.terms.iter_mut().chain(c.rhs.terms.iter_mut()) {
                    match t {
                        TemplateTerm::Sum { span, .. } | TemplateTerm::Scalar { span, .. } => {
                            zero(span)
                        }
                    }
                }
            }
            zero(&mut s.objective.span);
            for t in &mut s.objective.expr.terms {
                match t {
                    TemplateTerm::Sum { span, .. } | TemplateTerm::Scalar { span, .. } => {
                        zero(span)
                    }
                }
            }
            s
        };
        assert_eq!(strip(spec), strip(reparsed));
    }

    #[test]
    fn template_products_fold_into_coefficients() {
        let text = "rule r { lhs { c: Client; } do { set c.rc := true; } }\n\
                    mapping m to r\n\
                    constraint: 2 * sum(m) / 4 <= 1 - 0.5\n\
                    minimize: sum(m) * 3";
        let spec = parse(text).unwrap();
        assert!(typecheck(&spec, &mm()).is_empty());
        let compiled = compile(&spec, &mm()).unwrap();
        assert_eq!(compiled.constraints[0].sums.len(), 1);
        assert_eq!(compiled.constraints[0].scalars.len(), 2);
    }

    #[test]
    fn nonlinear_templates_are_rejected() {
        for bad in [
            "constraint: sum(m) * sum(m) <= 1",
            "constraint: 1 / sum(m) <= 1",
        ] {
            let text = format!(
                "rule r {{ lhs {{ c: Client; }} do {{ set c.rc := true; }} }}\nmapping m to r\n{bad}\nminimize: sum(m)"
            );
            assert!(parse(&text).is_err(), "{bad} should not parse");
        }
    }
}
