//! Graph transformation rules: an LHS pattern plus an ordered action list.
//!
//! Applying a rule at a match first re-validates the match against the
//! current model (`precheck`), then executes the actions. A failed
//! application rolls the model back to its pre-call state, journal included.
//! Created elements get deterministic ids derived from the rule name and the
//! match fingerprint, so equal applications on equal models yield equal
//! models.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::Expr;
use crate::model::{AttrKind, Change, ChangeRecord, Metamodel, Model};
use crate::pattern::{condition_holds, Match, Pattern};

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Create a node bound to a fresh variable, with all declared attributes
    /// initialized.
    CreateNode {
        var: String,
        ty: String,
        attrs: Vec<(String, Expr)>,
    },
    CreateEdge {
        ty: String,
        src: String,
        tgt: String,
    },
    /// Delete all edges of the given type between two bound nodes.
    DeleteEdge {
        ty: String,
        src: String,
        tgt: String,
    },
    /// Delete a bound node. Fails unless the node is isolated by now, so a
    /// rule must delete incident edges first.
    DeleteNode { var: String },
    SetAttr {
        var: String,
        attr: String,
        value: Expr,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtRule {
    pub name: String,
    pub lhs: Pattern,
    pub actions: Vec<Action>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("rule `{rule}`: match {fingerprint} is no longer valid")]
    InvalidMatch { rule: String, fingerprint: String },
    #[error("rule `{rule}` at {fingerprint}: {detail}")]
    Apply {
        rule: String,
        fingerprint: String,
        detail: String,
    },
    #[error("rule `{rule}`: {detail}")]
    Type { rule: String, detail: String },
}

impl GtRule {
    /// Static well-formedness: LHS checks out and every action references
    /// only LHS variables or variables created by earlier actions.
    pub fn check(&self, mm: &Metamodel) -> Result<(), RuleError> {
        self.lhs.check(mm).map_err(|e| RuleError::Type {
            rule: self.name.clone(),
            detail: e.to_string(),
        })?;
        let mut scope: BTreeMap<String, String> = self
            .lhs
            .nodes
            .iter()
            .map(|n| (n.var.clone(), n.ty.clone()))
            .collect();
        let err = |detail: String| RuleError::Type {
            rule: self.name.clone(),
            detail,
        };
        let kind_of =
            |scope: &BTreeMap<String, String>, var: &str, attr: &str| -> Result<AttrKind, String> {
                let ty = scope
                    .get(var)
                    .ok_or_else(|| format!("unknown variable `{var}`"))?;
                mm.attr_kind(ty, attr)
                    .ok_or_else(|| format!("type `{ty}` has no attribute `{attr}`"))
            };
        for action in &self.actions {
            match action {
                Action::CreateNode { var, ty, attrs } => {
                    if scope.contains_key(var) {
                        return Err(err(format!("variable `{var}` is already bound")));
                    }
                    let tdef = mm
                        .node_type(ty)
                        .ok_or_else(|| err(format!("unknown node type `{ty}`")))?;
                    for adef in &tdef.attrs {
                        let init =
                            attrs.iter().find(|(n, _)| n == &adef.name).ok_or_else(|| {
                                err(format!(
                                    "create `{var}`: attribute `{}` not initialized",
                                    adef.name
                                ))
                            })?;
                        let k = init
                            .1
                            .infer_kind(&|is_ctx, v, a| {
                                if is_ctx {
                                    Err("ctx references are not allowed in rules".into())
                                } else {
                                    kind_of(&scope, v, a)
                                }
                            })
                            .map_err(&err)?;
                        if !assignable(k, adef.kind) {
                            return Err(err(format!(
                                "create `{var}`: attribute `{}` expects {}, expression is {k}",
                                adef.name, adef.kind
                            )));
                        }
                    }
                    if let Some((extra, _)) = attrs
                        .iter()
                        .find(|(n, _)| tdef.attrs.iter().all(|a| &a.name != n))
                    {
                        return Err(err(format!(
                            "create `{var}`: `{ty}` has no attribute `{extra}`"
                        )));
                    }
                    scope.insert(var.clone(), ty.clone());
                }
                Action::CreateEdge { ty, src, tgt } | Action::DeleteEdge { ty, src, tgt } => {
                    let src_ty = scope
                        .get(src)
                        .ok_or_else(|| err(format!("unknown variable `{src}`")))?;
                    let tgt_ty = scope
                        .get(tgt)
                        .ok_or_else(|| err(format!("unknown variable `{tgt}`")))?;
                    let et = mm
                        .edge_type(ty, src_ty)
                        .ok_or_else(|| err(format!("no edge type `{ty}` from `{src_ty}`")))?;
                    if &et.tgt != tgt_ty {
                        return Err(err(format!(
                            "edge `{ty}` targets `{}`, variable `{tgt}` is `{tgt_ty}`",
                            et.tgt
                        )));
                    }
                }
                Action::DeleteNode { var } => {
                    if !scope.contains_key(var) {
                        return Err(err(format!("unknown variable `{var}`")));
                    }
                }
                Action::SetAttr { var, attr, value } => {
                    let declared = kind_of(&scope, var, attr).map_err(&err)?;
                    let k = value
                        .infer_kind(&|is_ctx, v, a| {
                            if is_ctx {
                                Err("ctx references are not allowed in rules".into())
                            } else {
                                kind_of(&scope, v, a)
                            }
                        })
                        .map_err(&err)?;
                    if !assignable(k, declared) {
                        return Err(err(format!(
                            "set `{var}.{attr}`: expects {declared}, expression is {k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn assignable(from: AttrKind, to: AttrKind) -> bool {
    from == to || (from == AttrKind::Int && to == AttrKind::Real)
}

/// Does the match still hold: all bound elements exist with their pattern
/// types, all LHS edges are present, all conditions are satisfied.
pub fn precheck(model: &Model, rule: &GtRule, m: &Match) -> bool {
    for pn in &rule.lhs.nodes {
        match m.binding.get(&pn.var).and_then(|id| model.node(id)) {
            Some(node) if node.ty == pn.ty => {}
            _ => return false,
        }
    }
    for pe in &rule.lhs.edges {
        let (src, tgt) = (&m.binding[&pe.src], &m.binding[&pe.tgt]);
        if !model.has_edge(&pe.ty, src, tgt) {
            return false;
        }
    }
    for cond in &rule.lhs.conditions {
        match condition_holds(cond, model, &m.binding) {
            Ok(true) => {}
            _ => return false,
        }
    }
    true
}

/// Id of a node created by `rule` at `m` for action variable `var`.
pub fn created_node_id(rule: &str, m: &Match, var: &str) -> String {
    format!("{rule}#{}#{var}", m.fingerprint)
}

/// Apply the rule at the match. Returns the journal records appended by this
/// application. On any failure the model is left byte-identical to its
/// pre-call state and an error is returned.
pub fn apply(model: &mut Model, rule: &GtRule, m: &Match) -> Result<Vec<ChangeRecord>, RuleError> {
    if !precheck(model, rule, m) {
        return Err(RuleError::InvalidMatch {
            rule: rule.name.clone(),
            fingerprint: m.fingerprint.clone(),
        });
    }
    let snapshot = model.clone();
    match apply_actions(model, rule, m) {
        Ok(records) => Ok(records),
        Err(detail) => {
            *model = snapshot;
            Err(RuleError::Apply {
                rule: rule.name.clone(),
                fingerprint: m.fingerprint.clone(),
                detail,
            })
        }
    }
}

fn apply_actions(model: &mut Model, rule: &GtRule, m: &Match) -> Result<Vec<ChangeRecord>, String> {
    let mut binding = m.binding.clone();
    let mut records = Vec::new();
    for (idx, action) in rule.actions.iter().enumerate() {
        match action {
            Action::CreateNode { var, ty, attrs } => {
                let id = created_node_id(&rule.name, m, var);
                let mut values = BTreeMap::new();
                for (name, expr) in attrs {
                    let v = expr
                        .eval(model, &binding, None)
                        .map_err(|e| e.to_string())?;
                    values.insert(name.clone(), v);
                }
                records.push(
                    model
                        .mutate(Change::CreateNode {
                            id: id.clone(),
                            ty: ty.clone(),
                            attrs: values,
                        })
                        .map_err(|e| e.to_string())?,
                );
                binding.insert(var.clone(), id);
            }
            Action::CreateEdge { ty, src, tgt } => {
                let id = format!("{}#{}#a{idx}", rule.name, m.fingerprint);
                records.push(
                    model
                        .mutate(Change::CreateEdge {
                            id,
                            ty: ty.clone(),
                            src: binding[src].clone(),
                            tgt: binding[tgt].clone(),
                        })
                        .map_err(|e| e.to_string())?,
                );
            }
            Action::DeleteEdge { ty, src, tgt } => {
                let (src_id, tgt_id) = (&binding[src], &binding[tgt]);
                let doomed: Vec<String> = model
                    .out_edges(src_id)
                    .filter(|e| &e.ty == ty && &e.tgt == tgt_id)
                    .map(|e| e.id.clone())
                    .collect();
                for id in doomed {
                    records.push(
                        model
                            .mutate(Change::DeleteEdge { id })
                            .map_err(|e| e.to_string())?,
                    );
                }
            }
            Action::DeleteNode { var } => {
                records.push(
                    model
                        .mutate(Change::DeleteNode {
                            id: binding[var].clone(),
                        })
                        .map_err(|e| e.to_string())?,
                );
            }
            Action::SetAttr { var, attr, value } => {
                let v = value
                    .eval(model, &binding, None)
                    .map_err(|e| e.to_string())?;
                records.push(
                    model
                        .mutate(Change::SetAttr {
                            id: binding[var].clone(),
                            attr: attr.clone(),
                            value: v,
                        })
                        .map_err(|e| e.to_string())?,
                );
            }
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::CmpOp;
    use crate::model::{AttrDef, AttrValue, EdgeTypeDef, NodeTypeDef};
    use crate::pattern::{find_matches, AttrCondition, Operand, PatternEdge, PatternNode};

    fn mm() -> Metamodel {
        Metamodel::new(
            vec![
                NodeTypeDef {
                    name: "Client".into(),
                    attrs: vec![
                        AttrDef {
                            name: "rc".into(),
                            kind: AttrKind::Bool,
                        },
                        AttrDef {
                            name: "up".into(),
                            kind: AttrKind::Real,
                        },
                        AttrDef {
                            name: "down".into(),
                            kind: AttrKind::Real,
                        },
                    ],
                },
                NodeTypeDef {
                    name: "P2PLink".into(),
                    attrs: vec![AttrDef {
                        name: "bw".into(),
                        kind: AttrKind::Real,
                    }],
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
                    name: "source".into(),
                    src: "P2PLink".into(),
                    tgt: "Client".into(),
                },
                EdgeTypeDef {
                    name: "target".into(),
                    src: "P2PLink".into(),
                    tgt: "Client".into(),
                },
            ],
        )
        .unwrap()
    }

    fn client(model: &mut Model, id: &str, rc: bool, up: f64, down: f64) {
        model
            .mutate(Change::CreateNode {
                id: id.into(),
                ty: "Client".into(),
                attrs: BTreeMap::from([
                    ("rc".to_string(), AttrValue::Bool(rc)),
                    ("up".to_string(), AttrValue::Real(up)),
                    ("down".to_string(), AttrValue::Real(down)),
                ]),
            })
            .unwrap();
    }

    /// Creates a P2PLink between two clients and flips the child's rc flag:
    /// one node, two edges, one attribute write.
    fn link_rule() -> GtRule {
        GtRule {
            name: "linkUp".into(),
            lhs: Pattern {
                name: "linkUp".into(),
                nodes: vec![
                    PatternNode {
                        var: "j".into(),
                        ty: "Client".into(),
                    },
                    PatternNode {
                        var: "i".into(),
                        ty: "Client".into(),
                    },
                ],
                edges: vec![],
                conditions: vec![AttrCondition {
                    lhs: Operand::Attr {
                        var: "i".into(),
                        attr: "rc".into(),
                    },
                    op: CmpOp::Eq,
                    rhs: Operand::Const(AttrValue::Bool(false)),
                }],
            },
            actions: vec![
                Action::CreateNode {
                    var: "l".into(),
                    ty: "P2PLink".into(),
                    attrs: vec![(
                        "bw".into(),
                        Expr::Min(
                            Box::new(Expr::Attr {
                                var: "j".into(),
                                attr: "up".into(),
                            }),
                            Box::new(Expr::Attr {
                                var: "i".into(),
                                attr: "down".into(),
                            }),
                        ),
                    )],
                },
                Action::CreateEdge {
                    ty: "source".into(),
                    src: "l".into(),
                    tgt: "j".into(),
                },
                Action::CreateEdge {
                    ty: "target".into(),
                    src: "l".into(),
                    tgt: "i".into(),
                },
                Action::SetAttr {
                    var: "i".into(),
                    attr: "rc".into(),
                    value: Expr::Bool(true),
                },
            ],
        }
    }

    fn match_for(rule: &GtRule, model: &Model, j: &str, i: &str) -> Match {
        find_matches(&rule.lhs, model)
            .unwrap()
            .into_iter()
            .find(|m| m.node("j") == Some(j) && m.node("i") == Some(i))
            .unwrap()
    }

    #[test]
    fn rule_typechecks() {
        link_rule().check(&mm()).unwrap();
    }

    #[test]
    fn precheck_true_on_fresh_match() {
        let mut model = Model::empty(mm());
        client(&mut model, "j", false, 40.0, 100.0);
        client(&mut model, "i", false, 20.0, 30.0);
        let rule = link_rule();
        let m = match_for(&rule, &model, "j", "i");
        assert!(precheck(&model, &rule, &m));
    }

    #[test]
    fn precheck_false_after_bound_node_deleted() {
        let mut model = Model::empty(mm());
        client(&mut model, "j", false, 40.0, 100.0);
        client(&mut model, "i", false, 20.0, 30.0);
        let rule = link_rule();
        let m = match_for(&rule, &model, "j", "i");
        model.mutate(Change::DeleteNode { id: "i".into() }).unwrap();
        assert!(!precheck(&model, &rule, &m));
    }

    #[test]
    fn precheck_false_after_condition_breaks() {
        // LHS requires up >= 10 on the parent; mutate it below the bound.
        let mut rule = link_rule();
        rule.lhs.conditions.push(AttrCondition {
            lhs: Operand::Attr {
                var: "j".into(),
                attr: "up".into(),
            },
            op: CmpOp::Ge,
            rhs: Operand::Const(AttrValue::Real(10.0)),
        });
        let mut model = Model::empty(mm());
        client(&mut model, "j", false, 40.0, 100.0);
        client(&mut model, "i", false, 20.0, 30.0);
        client(&mut model, "z", true, 1.0, 1.0);
        let m = match_for(&rule, &model, "j", "i");
        model
            .mutate(Change::SetAttr {
                id: "j".into(),
                attr: "up".into(),
                value: AttrValue::Real(5.0),
            })
            .unwrap();
        assert!(!precheck(&model, &rule, &m));
    }

    #[test]
    fn apply_produces_four_records_and_rhs_structure() {
        let mut model = Model::empty(mm());
        client(&mut model, "j", false, 40.0, 100.0);
        client(&mut model, "i", false, 20.0, 30.0);
        let rule = link_rule();
        let m = match_for(&rule, &model, "j", "i");
        let records = apply(&mut model, &rule, &m).unwrap();
        assert_eq!(records.len(), 4);
        let link_id = created_node_id("linkUp", &m, "l");
        assert_eq!(model.attr(&link_id, "bw"), Some(&AttrValue::Real(30.0)));
        assert!(model.has_edge("source", &link_id, "j"));
        assert!(model.has_edge("target", &link_id, "i"));
        assert_eq!(model.attr("i", "rc"), Some(&AttrValue::Bool(true)));
    }

    #[test]
    fn second_apply_fails_invalid_match_and_leaves_model_alone() {
        let mut model = Model::empty(mm());
        client(&mut model, "j", false, 40.0, 100.0);
        client(&mut model, "i", false, 20.0, 30.0);
        let rule = link_rule();
        let m = match_for(&rule, &model, "j", "i");
        apply(&mut model, &rule, &m).unwrap();
        let before = model.clone();
        let err = apply(&mut model, &rule, &m).unwrap_err();
        assert!(matches!(err, RuleError::InvalidMatch { .. }));
        assert!(model.graph_eq(&before));
        assert_eq!(model.journal(), before.journal());
    }

    #[test]
    fn failed_apply_rolls_back_partial_records() {
        // No rc condition on the LHS, so the second application passes
        // precheck but collides on the deterministic created id.
        let mut rule = link_rule();
        rule.lhs.conditions.clear();
        rule.actions.pop();
        let mut model = Model::empty(mm());
        client(&mut model, "j", false, 40.0, 100.0);
        client(&mut model, "i", false, 20.0, 30.0);
        let m = match_for(&rule, &model, "j", "i");
        apply(&mut model, &rule, &m).unwrap();
        let before = model.clone();
        let err = apply(&mut model, &rule, &m).unwrap_err();
        assert!(matches!(err, RuleError::Apply { .. }));
        assert!(model.graph_eq(&before));
        assert_eq!(model.journal(), before.journal());
        assert_eq!(model.version(), before.version());
    }

    #[test]
    fn apply_is_deterministic_across_equal_models() {
        let build = || {
            let mut model = Model::empty(mm());
            client(&mut model, "j", false, 40.0, 100.0);
            client(&mut model, "i", false, 20.0, 30.0);
            model
        };
        let rule = link_rule();
        let mut a = build();
        let mut b = build();
        let m = match_for(&rule, &a, "j", "i");
        apply(&mut a, &rule, &m).unwrap();
        apply(&mut b, &rule, &m).unwrap();
        assert!(a.graph_eq(&b));
    }

    #[test]
    fn delete_requires_isolated_node() {
        let mut model = Model::empty(mm());
        client(&mut model, "j", false, 40.0, 100.0);
        client(&mut model, "i", false, 20.0, 30.0);
        let rule = link_rule();
        let m = match_for(&rule, &model, "j", "i");
        apply(&mut model, &rule, &m).unwrap();

        // Deleting the link node without removing its edges first fails...
        let naked_delete = GtRule {
            name: "dropLink".into(),
            lhs: Pattern {
                name: "dropLink".into(),
                nodes: vec![
                    PatternNode {
                        var: "l".into(),
                        ty: "P2PLink".into(),
                    },
                    PatternNode {
                        var: "j".into(),
                        ty: "Client".into(),
                    },
                    PatternNode {
                        var: "i".into(),
                        ty: "Client".into(),
                    },
                ],
                edges: vec![
                    PatternEdge {
                        ty: "source".into(),
                        src: "l".into(),
                        tgt: "j".into(),
                    },
                    PatternEdge {
                        ty: "target".into(),
                        src: "l".into(),
                        tgt: "i".into(),
                    },
                ],
                conditions: vec![],
            },
            actions: vec![Action::DeleteNode { var: "l".into() }],
        };
        let dm = find_matches(&naked_delete.lhs, &model).unwrap().remove(0);
        assert!(apply(&mut model, &naked_delete, &dm).is_err());

        // ...and succeeds once the rule deletes its own edges first.
        let mut guarded = naked_delete.clone();
        guarded.actions = vec![
            Action::DeleteEdge {
                ty: "source".into(),
                src: "l".into(),
                tgt: "j".into(),
            },
            Action::DeleteEdge {
                ty: "target".into(),
                src: "l".into(),
                tgt: "i".into(),
            },
            Action::DeleteNode { var: "l".into() },
        ];
        let records = apply(&mut model, &guarded, &dm).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(model.count_of_type("P2PLink"), 0);
    }
}
