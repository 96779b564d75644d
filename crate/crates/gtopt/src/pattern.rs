//! Graph patterns and match maintenance.
//!
//! A [`Pattern`] is a set of typed node variables, required edges between
//! them, and attribute conditions. [`find_matches`] enumerates all injective
//! bindings; [`MatcherState`] keeps per-pattern match sets up to date against
//! a model's mutation journal and reports appeared/vanished deltas.
//!
//! The incremental strategy is recompute-and-diff, scoped by the node and
//! edge types touched since the last update; a Rete-style network could be
//! swapped in behind the same contract.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::expr::{compare, CmpOp};
use crate::model::{AttrKind, AttrValue, ChangeKind, Metamodel, Model};

/// One side of an attribute condition.
#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Attr { var: String, attr: String },
    Const(AttrValue),
}

/// A comparison between attribute references and/or constants.
#[derive(Debug, Clone, PartialEq)]
pub struct AttrCondition {
    pub lhs: Operand,
    pub op: CmpOp,
    pub rhs: Operand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternNode {
    pub var: String,
    pub ty: String,
}

/// Required edge between two pattern variables, named by edge type.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternEdge {
    pub ty: String,
    pub src: String,
    pub tgt: String,
}

/// A graph pattern. Matching is always injective: distinct variables bind
/// distinct nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub name: String,
    pub nodes: Vec<PatternNode>,
    pub edges: Vec<PatternEdge>,
    pub conditions: Vec<AttrCondition>,
}

impl Pattern {
    pub fn var_type(&self, var: &str) -> Option<&str> {
        self.nodes
            .iter()
            .find(|n| n.var == var)
            .map(|n| n.ty.as_str())
    }

    /// Check the pattern against a metamodel: unique vars, known types,
    /// resolvable edges, comparable condition operands.
    pub fn check(&self, mm: &Metamodel) -> Result<(), MatchError> {
        let mut vars = BTreeSet::new();
        for n in &self.nodes {
            if !vars.insert(n.var.clone()) {
                return Err(MatchError::Type {
                    detail: format!("pattern `{}`: duplicate variable `{}`", self.name, n.var),
                });
            }
            if mm.node_type(&n.ty).is_none() {
                return Err(MatchError::Type {
                    detail: format!("pattern `{}`: unknown node type `{}`", self.name, n.ty),
                });
            }
        }
        for e in &self.edges {
            let src_ty = self.var_type(&e.src).ok_or_else(|| MatchError::Type {
                detail: format!("pattern `{}`: unknown variable `{}`", self.name, e.src),
            })?;
            let tgt_ty = self.var_type(&e.tgt).ok_or_else(|| MatchError::Type {
                detail: format!("pattern `{}`: unknown variable `{}`", self.name, e.tgt),
            })?;
            let et = mm
                .edge_type(&e.ty, src_ty)
                .ok_or_else(|| MatchError::Type {
                    detail: format!(
                        "pattern `{}`: no edge type `{}` from `{src_ty}`",
                        self.name, e.ty
                    ),
                })?;
            if et.tgt != tgt_ty {
                return Err(MatchError::Type {
                    detail: format!(
                        "pattern `{}`: edge `{}` targets `{}`, variable `{}` is `{tgt_ty}`",
                        self.name, e.ty, et.tgt, e.tgt
                    ),
                });
            }
        }
        for c in &self.conditions {
            let lk = self.operand_kind(&c.lhs, mm)?;
            let rk = self.operand_kind(&c.rhs, mm)?;
            let comparable = match (lk, rk) {
                (AttrKind::Int | AttrKind::Real, AttrKind::Int | AttrKind::Real) => true,
                (AttrKind::Bool, AttrKind::Bool) | (AttrKind::Str, AttrKind::Str) => {
                    matches!(c.op, CmpOp::Eq | CmpOp::Ne)
                }
                _ => false,
            };
            if !comparable {
                return Err(MatchError::Type {
                    detail: format!(
                        "pattern `{}`: cannot compare {lk} with {rk} using {}",
                        self.name, c.op
                    ),
                });
            }
        }
        Ok(())
    }

    fn operand_kind(&self, op: &Operand, mm: &Metamodel) -> Result<AttrKind, MatchError> {
        match op {
            Operand::Const(v) => Ok(v.kind()),
            Operand::Attr { var, attr } => {
                let ty = self.var_type(var).ok_or_else(|| MatchError::Type {
                    detail: format!("pattern `{}`: unknown variable `{var}`", self.name),
                })?;
                mm.attr_kind(ty, attr).ok_or_else(|| MatchError::Type {
                    detail: format!(
                        "pattern `{}`: type `{ty}` has no attribute `{attr}`",
                        self.name
                    ),
                })
            }
        }
    }
}

/// An injective binding of pattern variables to node ids, plus its canonical
/// fingerprint `pattern{var=id,...}` (variables sorted).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Match {
    pub pattern: String,
    pub binding: BTreeMap<String, String>,
    pub fingerprint: String,
}

impl Match {
    pub fn new(pattern: &str, binding: BTreeMap<String, String>) -> Self {
        let fingerprint = fingerprint(pattern, &binding);
        Match {
            pattern: pattern.to_string(),
            binding,
            fingerprint,
        }
    }

    pub fn node(&self, var: &str) -> Option<&str> {
        self.binding.get(var).map(|s| s.as_str())
    }
}

pub fn fingerprint(pattern: &str, binding: &BTreeMap<String, String>) -> String {
    let mut s = String::from(pattern);
    s.push('{');
    for (i, (var, id)) in binding.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(var);
        s.push('=');
        s.push_str(id);
    }
    s.push('}');
    s
}

/// Appeared/vanished matches between two model versions.
#[derive(Debug, Clone, Default)]
pub struct MatchDelta {
    pub appeared: Vec<Match>,
    pub vanished: Vec<Match>,
    pub at_version: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("type error: {detail}")]
    Type { detail: String },
    #[error(
        "matcher state at version {state_version} is stale: journal starts after {journal_base}"
    )]
    StaleState {
        state_version: u64,
        journal_base: u64,
    },
}

/// Enumerate all matches of `pattern` in `model`, ordered by fingerprint.
pub fn find_matches(pattern: &Pattern, model: &Model) -> Result<Vec<Match>, MatchError> {
    pattern.check(model.metamodel())?;
    let n = pattern.nodes.len();
    if n == 0 {
        return Ok(vec![]);
    }

    // Smallest candidate set first; ties broken by declaration order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (model.count_of_type(&pattern.nodes[i].ty), i));
    let position: BTreeMap<&str, usize> = order
        .iter()
        .enumerate()
        .map(|(pos, &i)| (pattern.nodes[i].var.as_str(), pos))
        .collect();

    // A condition can be checked once all its variables are placed.
    let cond_ready: Vec<usize> = pattern
        .conditions
        .iter()
        .map(|c| {
            [&c.lhs, &c.rhs]
                .iter()
                .filter_map(|o| match o {
                    Operand::Attr { var, .. } => Some(position[var.as_str()]),
                    Operand::Const(_) => None,
                })
                .max()
                .unwrap_or(0)
        })
        .collect();
    let edge_ready: Vec<usize> = pattern
        .edges
        .iter()
        .map(|e| position[e.src.as_str()].max(position[e.tgt.as_str()]))
        .collect();

    let mut binding: BTreeMap<String, String> = BTreeMap::new();
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut out: Vec<Match> = Vec::new();
    search(
        pattern,
        model,
        &order,
        &cond_ready,
        &edge_ready,
        0,
        &mut binding,
        &mut used,
        &mut out,
    )?;
    out.sort_by(|a, b| a.fingerprint.cmp(&b.fingerprint));
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn search(
    pattern: &Pattern,
    model: &Model,
    order: &[usize],
    cond_ready: &[usize],
    edge_ready: &[usize],
    depth: usize,
    binding: &mut BTreeMap<String, String>,
    used: &mut BTreeSet<String>,
    out: &mut Vec<Match>,
) -> Result<(), MatchError> {
    if depth == order.len() {
        out.push(Match::new(&pattern.name, binding.clone()));
        return Ok(());
    }
    let node = &pattern.nodes[order[depth]];

    // Prefer walking adjacency from an already-bound neighbor over a full
    // type-extent scan.
    let mut candidates: Vec<String> = Vec::new();
    let mut seeded = false;
    for e in &pattern.edges {
        if e.tgt == node.var {
            if let Some(src_id) = binding.get(&e.src) {
                candidates = model
                    .out_edges(src_id)
                    .filter(|edge| edge.ty == e.ty)
                    .map(|edge| edge.tgt.clone())
                    .collect();
                seeded = true;
                break;
            }
        }
        if e.src == node.var {
            if let Some(tgt_id) = binding.get(&e.tgt) {
                candidates = model
                    .in_edges(tgt_id)
                    .filter(|edge| edge.ty == e.ty)
                    .map(|edge| edge.src.clone())
                    .collect();
                seeded = true;
                break;
            }
        }
    }
    if !seeded {
        candidates = model
            .nodes_of_type(&node.ty)
            .map(|s| s.to_string())
            .collect();
    } else {
        candidates.sort();
        candidates.dedup();
    }

    'cand: for id in candidates {
        if used.contains(&id) {
            continue;
        }
        let cand = model.node(&id).expect("candidate came from the model");
        if cand.ty != node.ty {
            continue;
        }
        binding.insert(node.var.clone(), id.clone());
        used.insert(id.clone());

        for (i, e) in pattern.edges.iter().enumerate() {
            if edge_ready[i] == depth {
                let src = &binding[&e.src];
                let tgt = &binding[&e.tgt];
                if !model.has_edge(&e.ty, src, tgt) {
                    binding.remove(&node.var);
                    used.remove(&id);
                    continue 'cand;
                }
            }
        }
        for (i, c) in pattern.conditions.iter().enumerate() {
            if cond_ready[i] == depth && !condition_holds(c, model, binding)? {
                binding.remove(&node.var);
                used.remove(&id);
                continue 'cand;
            }
        }

        search(
            pattern,
            model,
            order,
            cond_ready,
            edge_ready,
            depth + 1,
            binding,
            used,
            out,
        )?;
        binding.remove(&node.var);
        used.remove(&id);
    }
    Ok(())
}

fn operand_value(
    op: &Operand,
    model: &Model,
    binding: &BTreeMap<String, String>,
) -> Result<AttrValue, MatchError> {
    match op {
        Operand::Const(v) => Ok(v.clone()),
        Operand::Attr { var, attr } => {
            let id = &binding[var];
            model
                .attr(id, attr)
                .cloned()
                .ok_or_else(|| MatchError::Type {
                    detail: format!("node `{id}` has no attribute `{attr}`"),
                })
        }
    }
}

/// Evaluate one condition at a (partial) binding that covers its variables.
pub fn condition_holds(
    cond: &AttrCondition,
    model: &Model,
    binding: &BTreeMap<String, String>,
) -> Result<bool, MatchError> {
    let l = operand_value(&cond.lhs, model, binding)?;
    let r = operand_value(&cond.rhs, model, binding)?;
    compare(&l, cond.op, &r).map_err(|e| MatchError::Type {
        detail: e.to_string(),
    })
}

/// Incrementally maintained match sets for a family of patterns.
#[derive(Debug, Clone)]
pub struct MatcherState {
    patterns: BTreeMap<String, Pattern>,
    matches: BTreeMap<String, BTreeMap<String, Match>>,
    version: u64,
}

impl MatcherState {
    /// Compute the initial match sets for `patterns` at the model's current
    /// version.
    pub fn init(patterns: Vec<Pattern>, model: &Model) -> Result<Self, MatchError> {
        let mut state = MatcherState {
            patterns: patterns.into_iter().map(|p| (p.name.clone(), p)).collect(),
            matches: BTreeMap::new(),
            version: model.version(),
        };
        for (name, pattern) in &state.patterns {
            let set = find_matches(pattern, model)?
                .into_iter()
                .map(|m| (m.fingerprint.clone(), m))
                .collect();
            state.matches.insert(name.clone(), set);
        }
        Ok(state)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn pattern(&self, name: &str) -> Option<&Pattern> {
        self.patterns.get(name)
    }

    /// Current match set of one pattern, keyed by fingerprint.
    pub fn matches(&self, pattern: &str) -> &BTreeMap<String, Match> {
        static EMPTY: BTreeMap<String, Match> = BTreeMap::new();
        self.matches.get(pattern).unwrap_or(&EMPTY)
    }

    /// All retained matches across patterns, ordered by fingerprint.
    pub fn all_matches(&self) -> Vec<&Match> {
        let mut v: Vec<&Match> = self.matches.values().flat_map(|m| m.values()).collect();
        v.sort_by(|a, b| a.fingerprint.cmp(&b.fingerprint));
        v
    }

    /// Bring the state up to the model's version and return the exact delta.
    ///
    /// Patterns whose node/edge types were not touched by the journal window
    /// keep their match sets without recomputation.
    pub fn update(&mut self, model: &Model) -> Result<MatchDelta, MatchError> {
        let records = model
            .journal_since(self.version)
            .ok_or(MatchError::StaleState {
                state_version: self.version,
                journal_base: model.base_version(),
            })?;

        let mut delta = MatchDelta {
            at_version: model.version(),
            ..Default::default()
        };
        if records.is_empty() {
            self.version = model.version();
            return Ok(delta);
        }

        let mut touched_node_types: BTreeSet<String> = BTreeSet::new();
        let mut touched_edge_types: BTreeSet<String> = BTreeSet::new();
        let mut known_types: BTreeMap<&str, &str> = BTreeMap::new();
        let mut all_affected = false;
        for rec in records {
            match &rec.kind {
                ChangeKind::CreateNode { node } | ChangeKind::DeleteNode { node } => {
                    touched_node_types.insert(node.ty.clone());
                    known_types.insert(&node.id, &node.ty);
                }
                ChangeKind::CreateEdge { edge } | ChangeKind::DeleteEdge { edge } => {
                    touched_edge_types.insert(edge.ty.clone());
                }
                ChangeKind::SetAttr { id, .. } => {
                    let ty = model
                        .node(id)
                        .map(|n| n.ty.as_str())
                        .or_else(|| known_types.get(id.as_str()).copied());
                    match ty {
                        Some(ty) => {
                            touched_node_types.insert(ty.to_string());
                        }
                        None => all_affected = true,
                    }
                }
            }
        }

        for (name, pattern) in &self.patterns {
            let affected = all_affected
                || pattern
                    .nodes
                    .iter()
                    .any(|n| touched_node_types.contains(&n.ty))
                || pattern
                    .edges
                    .iter()
                    .any(|e| touched_edge_types.contains(&e.ty));
            if !affected {
                continue;
            }
            let fresh: BTreeMap<String, Match> = find_matches(pattern, model)?
                .into_iter()
                .map(|m| (m.fingerprint.clone(), m))
                .collect();
            let old = self.matches.get(name).expect("every pattern has a set");
            for (fp, m) in &fresh {
                if !old.contains_key(fp) {
                    delta.appeared.push(m.clone());
                }
            }
            for (fp, m) in old {
                if !fresh.contains_key(fp) {
                    delta.vanished.push(m.clone());
                }
            }
            self.matches.insert(name.clone(), fresh);
        }

        delta
            .appeared
            .sort_by(|a, b| a.fingerprint.cmp(&b.fingerprint));
        delta
            .vanished
            .sort_by(|a, b| a.fingerprint.cmp(&b.fingerprint));
        self.version = model.version();
        Ok(delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttrDef, Change, EdgeTypeDef, NodeTypeDef};

    fn mm() -> Metamodel {
        Metamodel::new(
            vec![
                NodeTypeDef {
                    name: "Client".into(),
                    attrs: vec![AttrDef {
                        name: "rc".into(),
                        kind: AttrKind::Bool,
                    }],
                },
                NodeTypeDef {
                    name: "P2PLink".into(),
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

    fn client(model: &mut Model, id: &str, rc: bool) {
        model
            .mutate(Change::CreateNode {
                id: id.into(),
                ty: "Client".into(),
                attrs: BTreeMap::from([("rc".to_string(), AttrValue::Bool(rc))]),
            })
            .unwrap();
    }

    fn link(model: &mut Model, id: &str, src: &str, tgt: &str) {
        model
            .mutate(Change::CreateNode {
                id: id.into(),
                ty: "P2PLink".into(),
                attrs: BTreeMap::from([("bw".to_string(), AttrValue::Real(10.0))]),
            })
            .unwrap();
        model
            .mutate(Change::CreateEdge {
                id: format!("{id}:src"),
                ty: "source".into(),
                src: id.into(),
                tgt: src.into(),
            })
            .unwrap();
        model
            .mutate(Change::CreateEdge {
                id: format!("{id}:tgt"),
                ty: "target".into(),
                src: id.into(),
                tgt: tgt.into(),
            })
            .unwrap();
    }

    fn single_client_pattern() -> Pattern {
        Pattern {
            name: "anyClient".into(),
            nodes: vec![PatternNode {
                var: "c".into(),
                ty: "Client".into(),
            }],
            edges: vec![],
            conditions: vec![],
        }
    }

    fn relay_chain_pattern() -> Pattern {
        Pattern {
            name: "relayChain".into(),
            nodes: vec![
                PatternNode {
                    var: "r".into(),
                    ty: "Client".into(),
                },
                PatternNode {
                    var: "l".into(),
                    ty: "P2PLink".into(),
                },
                PatternNode {
                    var: "c".into(),
                    ty: "Client".into(),
                },
            ],
            edges: vec![
                PatternEdge {
                    ty: "source".into(),
                    src: "l".into(),
                    tgt: "r".into(),
                },
                PatternEdge {
                    ty: "target".into(),
                    src: "l".into(),
                    tgt: "c".into(),
                },
            ],
            conditions: vec![AttrCondition {
                lhs: Operand::Attr {
                    var: "r".into(),
                    attr: "rc".into(),
                },
                op: CmpOp::Eq,
                rhs: Operand::Const(AttrValue::Bool(true)),
            }],
        }
    }

    #[test]
    fn single_node_pattern_enumerates_type_extent() {
        let mut model = Model::empty(mm());
        for id in ["c1", "c2", "c3"] {
            client(&mut model, id, false);
        }
        let matches = find_matches(&single_client_pattern(), &model).unwrap();
        assert_eq!(matches.len(), 3);
        let ids: Vec<_> = matches.iter().map(|m| m.node("c").unwrap()).collect();
        assert_eq!(ids, vec!["c1", "c2", "c3"]);
    }

    #[test]
    fn empty_model_has_no_matches() {
        let model = Model::empty(mm());
        assert!(find_matches(&relay_chain_pattern(), &model)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn relay_forwarding_to_two_clients_has_two_matches() {
        let mut model = Model::empty(mm());
        client(&mut model, "r1", true);
        client(&mut model, "c1", false);
        client(&mut model, "c2", false);
        link(&mut model, "l1", "r1", "c1");
        link(&mut model, "l2", "r1", "c2");
        let matches = find_matches(&relay_chain_pattern(), &model).unwrap();
        assert_eq!(matches.len(), 2);
        assert!(matches.iter().all(|m| m.node("r") == Some("r1")));
    }

    #[test]
    fn injectivity_prevents_rebinding_one_node() {
        let mut model = Model::empty(mm());
        client(&mut model, "c1", false);
        let two_vars = Pattern {
            name: "pair".into(),
            nodes: vec![
                PatternNode {
                    var: "a".into(),
                    ty: "Client".into(),
                },
                PatternNode {
                    var: "b".into(),
                    ty: "Client".into(),
                },
            ],
            edges: vec![],
            conditions: vec![],
        };
        assert!(find_matches(&two_vars, &model).unwrap().is_empty());
    }

    #[test]
    fn unknown_type_is_a_type_error() {
        let model = Model::empty(mm());
        let bad = Pattern {
            name: "bad".into(),
            nodes: vec![PatternNode {
                var: "x".into(),
                ty: "Clientt".into(),
            }],
            edges: vec![],
            conditions: vec![],
        };
        assert!(matches!(
            find_matches(&bad, &model),
            Err(MatchError::Type { .. })
        ));
    }

    #[test]
    fn update_reports_appeared_on_node_add() {
        let mut model = Model::empty(mm());
        client(&mut model, "c1", false);
        let mut state = MatcherState::init(vec![single_client_pattern()], &model).unwrap();
        client(&mut model, "c2", false);
        let delta = state.update(&model).unwrap();
        assert_eq!(delta.appeared.len(), 1);
        assert!(delta.vanished.is_empty());
        assert_eq!(delta.appeared[0].node("c"), Some("c2"));
    }

    #[test]
    fn update_reports_vanished_on_link_removal() {
        let mut model = Model::empty(mm());
        client(&mut model, "r1", true);
        client(&mut model, "c1", false);
        link(&mut model, "l1", "r1", "c1");
        let mut state = MatcherState::init(vec![relay_chain_pattern()], &model).unwrap();
        assert_eq!(state.matches("relayChain").len(), 1);
        model
            .mutate(Change::DeleteEdge {
                id: "l1:src".into(),
            })
            .unwrap();
        model
            .mutate(Change::DeleteEdge {
                id: "l1:tgt".into(),
            })
            .unwrap();
        model
            .mutate(Change::DeleteNode { id: "l1".into() })
            .unwrap();
        let delta = state.update(&model).unwrap();
        assert!(delta.appeared.is_empty());
        assert_eq!(delta.vanished.len(), 1);
        assert!(state.matches("relayChain").is_empty());
    }

    #[test]
    fn update_without_changes_is_a_fixpoint() {
        let mut model = Model::empty(mm());
        client(&mut model, "c1", false);
        let mut state = MatcherState::init(vec![single_client_pattern()], &model).unwrap();
        let delta = state.update(&model).unwrap();
        assert!(delta.appeared.is_empty() && delta.vanished.is_empty());
    }

    #[test]
    fn truncated_journal_yields_stale_state() {
        let mut model = Model::empty(mm());
        let state0 = MatcherState::init(vec![single_client_pattern()], &model).unwrap();
        let mut state = state0;
        client(&mut model, "c1", false);
        client(&mut model, "c2", false);
        model.compact_journal(1);
        assert!(matches!(
            state.update(&model),
            Err(MatchError::StaleState { .. })
        ));
    }

    #[test]
    fn find_matches_is_deterministic() {
        let mut model = Model::empty(mm());
        client(&mut model, "r1", true);
        for i in 0..5 {
            client(&mut model, &format!("c{i}"), false);
            link(&mut model, &format!("l{i}"), "r1", &format!("c{i}"));
        }
        let a = find_matches(&relay_chain_pattern(), &model).unwrap();
        let b = find_matches(&relay_chain_pattern(), &model.clone()).unwrap();
        assert_eq!(a, b);
    }
}
