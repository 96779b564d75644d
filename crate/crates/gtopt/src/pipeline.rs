//! The match/build/solve/apply cycle.
//!
//! A cycle (a) refreshes the incremental match sets, (b) creates one binary
//! variable per (mapping, match) pair and compiles the spec's constraint and
//! objective templates into an [`IlpProblem`], (c) solves it exactly, and
//! (d) applies the rules behind the selected variables, re-validating each
//! match first. Keeping variables per match rather than per model element is
//! what keeps the search space small: local structure is already guaranteed
//! by matching and never re-encoded as rows.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{CompiledSpec, MappingTarget, SumTerm};
use crate::expr::{EvalError, Expr};
use crate::ilp::{solve_ilp, IlpError, IlpProblem, SolveStatus, VarId};
use crate::model::{AttrValue, Model};
use crate::pattern::{Match, MatchError, MatcherState};
use crate::rule::{apply, precheck, GtRule, RuleError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Ilp(#[from] IlpError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("coefficient for mapping `{mapping}` at {fingerprint}: {source}")]
    Coefficient {
        mapping: String,
        fingerprint: String,
        source: EvalError,
    },
    #[error("constraint row for context {context}: {source}")]
    Scalar { context: String, source: EvalError },
    #[error("selected match {fingerprint} of rule `{rule}` failed its precheck; the spec under-constrains rule interaction (model rolled back)")]
    SelectionConflict { rule: String, fingerprint: String },
    #[error("mapping `{mapping}` targets rule `{rule}` which is missing from the spec")]
    MissingRule { mapping: String, rule: String },
}

/// Both directions of the variable-to-match bijection, frozen at build time.
#[derive(Debug, Clone, Default)]
pub struct VarMap {
    by_var: BTreeMap<VarId, (String, Match)>,
    by_pair: BTreeMap<(String, String), VarId>,
}

impl VarMap {
    fn insert(&mut self, mapping: &str, m: &Match, var: VarId) {
        self.by_var
            .insert(var.clone(), (mapping.to_string(), m.clone()));
        self.by_pair
            .insert((mapping.to_string(), m.fingerprint.clone()), var);
    }

    pub fn lookup_var(&self, var: &VarId) -> Option<(&str, &Match)> {
        self.by_var.get(var).map(|(m, mch)| (m.as_str(), mch))
    }

    pub fn var_for(&self, mapping: &str, fingerprint: &str) -> Option<&VarId> {
        self.by_pair
            .get(&(mapping.to_string(), fingerprint.to_string()))
    }

    pub fn len(&self) -> usize {
        self.by_var.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_var.is_empty()
    }

    /// Sidecar JSON: `varId -> { mapping, binding }`, for replaying an LP
    /// dump against the model it was built from.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Entry<'a> {
            mapping: &'a str,
            binding: &'a BTreeMap<String, String>,
        }
        let doc: BTreeMap<&str, Entry> = self
            .by_var
            .iter()
            .map(|(var, (mapping, m))| {
                (
                    var.0.as_str(),
                    Entry {
                        mapping,
                        binding: &m.binding,
                    },
                )
            })
            .collect();
        serde_json::to_string_pretty(&doc).expect("varmap serialization cannot fail")
    }
}

/// One selected rule application.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selected {
    pub mapping: String,
    pub rule: String,
    pub fingerprint: String,
    pub binding: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CycleStatus {
    Optimal,
    Infeasible,
}

/// What one pipeline cycle saw, decided, and did.
#[derive(Debug, Clone, Serialize)]
pub struct CycleReport {
    pub at_version: u64,
    pub appeared: usize,
    pub vanished: usize,
    pub var_count: usize,
    pub constraint_count: usize,
    pub status: CycleStatus,
    pub objective: Option<f64>,
    pub bb_nodes: u64,
    pub selected: Vec<Selected>,
    pub applied: usize,
    pub gt_ms: f64,
    pub ilp_ms: f64,
    pub misc_ms: f64,
}

/// Evaluate a coefficient expression over a match's bound nodes.
pub fn eval_coefficient(coeff: &Expr, m: &Match, model: &Model) -> Result<f64, EvalError> {
    coeff.eval_f64(model, &m.binding, None)
}

fn scalar_value(expr: &Expr, model: &Model, ctx: Option<&Match>) -> Result<f64, EvalError> {
    let empty = BTreeMap::new();
    let value = expr.eval(model, &empty, ctx.map(|m| &m.binding))?;
    match value {
        AttrValue::Int(v) => Ok(v as f64),
        AttrValue::Real(v) => Ok(v),
        // bare bool context attributes act as 0/1 indicators
        AttrValue::Bool(b) => Ok(if b { 1.0 } else { 0.0 }),
        AttrValue::Str(_) => Err(EvalError::KindMismatch {
            detail: "string in linear expression".into(),
        }),
    }
}

fn filters_pass(filters: &[(String, String)], m: &Match, ctx: Option<&Match>) -> bool {
    filters.iter().all(|(sv, cv)| match ctx {
        Some(ctx) => m.binding.get(sv) == ctx.binding.get(cv),
        None => false,
    })
}

/// Compile the spec's templates against the current match sets.
///
/// One binary variable per (mapping, match); Global constraints emit one row,
/// ForEach constraints one row per context match. A filter that matches
/// nothing leaves an empty sum, not an error.
pub fn build_ilp(
    spec: &CompiledSpec,
    model: &Model,
    matches: &BTreeMap<String, Vec<Match>>,
) -> Result<(IlpProblem, VarMap), PipelineError> {
    let mut problem = IlpProblem::new(spec.objective.sense);
    let mut varmap = VarMap::default();
    let mut index: BTreeMap<(&str, &str), usize> = BTreeMap::new();

    for mapping in &spec.mappings {
        for m in matches.get(&mapping.name).into_iter().flatten() {
            let var = VarId(format!("{}::{}", mapping.name, m.fingerprint));
            let idx = problem.add_var(var.clone())?;
            varmap.insert(&mapping.name, m, var);
            index.insert((mapping.name.as_str(), m.fingerprint.as_str()), idx);
        }
    }

    let expand =
        |term: &SumTerm, ctx: Option<&Match>| -> Result<Vec<(usize, f64)>, PipelineError> {
            let mut out = Vec::new();
            for m in matches.get(&term.mapping).into_iter().flatten() {
                if !term.filters.is_empty() && !filters_pass(&term.filters, m, ctx) {
                    continue;
                }
                let coeff = match &term.coeff {
                    None => 1.0,
                    Some(expr) => eval_coefficient(expr, m, model).map_err(|source| {
                        PipelineError::Coefficient {
                            mapping: term.mapping.clone(),
                            fingerprint: m.fingerprint.clone(),
                            source,
                        }
                    })?,
                };
                out.push((
                    index[&(term.mapping.as_str(), m.fingerprint.as_str())],
                    term.sign * coeff,
                ));
            }
            Ok(out)
        };

    for term in &spec.objective.sums {
        for (idx, coeff) in expand(term, None)? {
            problem.add_objective_term(idx, coeff)?;
        }
    }

    for constraint in &spec.constraints {
        let contexts: Vec<Option<&Match>> = match &constraint.scope {
            None => vec![None],
            Some(pattern) => matches
                .get(pattern)
                .into_iter()
                .flatten()
                .map(Some)
                .collect(),
        };
        for ctx in contexts {
            let mut terms = Vec::new();
            for sum in &constraint.sums {
                terms.extend(expand(sum, ctx)?);
            }
            let mut rhs = 0.0;
            for (sign, expr) in &constraint.scalars {
                let v = scalar_value(expr, model, ctx).map_err(|source| PipelineError::Scalar {
                    context: ctx.map_or("global".to_string(), |m| m.fingerprint.clone()),
                    source,
                })?;
                rhs -= sign * v;
            }
            problem.add_constraint(None, terms, constraint.sense, rhs)?;
        }
    }

    Ok((problem, varmap))
}

/// Apply already-selected rule applications in the given order. Every match
/// is prechecked right before its application; the first failure aborts with
/// the model rolled back to the state at entry.
pub fn apply_selected(
    model: &mut Model,
    rules: &BTreeMap<String, GtRule>,
    selected: &[Selected],
) -> Result<usize, PipelineError> {
    let snapshot = model.clone();
    let mut applied = 0;
    for sel in selected {
        let rule = &rules[&sel.rule];
        let m = Match::new(&rule.lhs.name, sel.binding.clone());
        if !precheck(model, rule, &m) {
            *model = snapshot;
            return Err(PipelineError::SelectionConflict {
                rule: sel.rule.clone(),
                fingerprint: sel.fingerprint.clone(),
            });
        }
        if let Err(e) = apply(model, rule, &m) {
            *model = snapshot;
            return Err(e.into());
        }
        applied += 1;
    }
    Ok(applied)
}

/// Drives repeated cycles of one spec over one model.
pub struct Engine {
    spec: CompiledSpec,
    matcher: MatcherState,
    /// Appeared/vanished counts consumed by updates since the last cycle
    /// report (build_current may run ahead of run_cycle).
    pending_delta: (usize, usize),
}

impl Engine {
    /// Register the spec's patterns (mapping targets and ForEach contexts)
    /// with a fresh matcher at the model's current version.
    pub fn new(spec: CompiledSpec, model: &Model) -> Result<Self, PipelineError> {
        for mapping in &spec.mappings {
            if let MappingTarget::Rule(rule) = &mapping.target {
                if !spec.rules.contains_key(rule) {
                    return Err(PipelineError::MissingRule {
                        mapping: mapping.name.clone(),
                        rule: rule.clone(),
                    });
                }
            }
        }
        let mut needed: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
        for mapping in &spec.mappings {
            needed.insert(mapping.pattern_name());
        }
        for c in &spec.constraints {
            if let Some(p) = &c.scope {
                needed.insert(p);
            }
        }
        let patterns: Vec<_> = needed
            .iter()
            .map(|name| spec.patterns[*name].clone())
            .collect();
        let matcher = MatcherState::init(patterns, model)?;
        Ok(Engine {
            spec,
            matcher,
            pending_delta: (0, 0),
        })
    }

    pub fn spec(&self) -> &CompiledSpec {
        &self.spec
    }

    pub fn matcher(&self) -> &MatcherState {
        &self.matcher
    }

    /// Current matches of one mapping, in fingerprint order.
    pub fn mapping_matches(&self, mapping: &str) -> Vec<Match> {
        self.spec
            .mappings
            .iter()
            .find(|m| m.name == mapping)
            .map(|m| {
                self.matcher
                    .matches(m.pattern_name())
                    .values()
                    .cloned()
                    .collect()
            })
            .unwrap_or_default()
    }

    fn all_mapping_matches(&self) -> BTreeMap<String, Vec<Match>> {
        let mut out = BTreeMap::new();
        for mapping in &self.spec.mappings {
            out.insert(
                mapping.name.clone(),
                self.matcher
                    .matches(mapping.pattern_name())
                    .values()
                    .cloned()
                    .collect(),
            );
        }
        // ForEach context patterns that are not mapping targets
        for c in &self.spec.constraints {
            if let Some(p) = &c.scope {
                out.entry(p.clone())
                    .or_insert_with(|| self.matcher.matches(p).values().cloned().collect());
            }
        }
        out
    }

    /// Build the current cycle's ILP without solving or applying. The match
    /// state is brought up to the model's version first.
    pub fn build_current(&mut self, model: &Model) -> Result<(IlpProblem, VarMap), PipelineError> {
        let delta = self.matcher.update(model)?;
        self.pending_delta.0 += delta.appeared.len();
        self.pending_delta.1 += delta.vanished.len();
        build_ilp(&self.spec, model, &self.all_mapping_matches())
    }

    /// One full cycle: update matches, build, solve, and apply the selected
    /// rule applications. On infeasibility the model is untouched; a failed
    /// precheck during application rolls the model back to the cycle start.
    pub fn run_cycle(&mut self, model: &mut Model) -> Result<CycleReport, PipelineError> {
        let total_start = Instant::now();
        let mut gt_ms = 0.0f64;
        let mut ilp_ms = 0.0f64;

        let gt_start = Instant::now();
        let delta = self.matcher.update(model)?;
        self.pending_delta.0 += delta.appeared.len();
        self.pending_delta.1 += delta.vanished.len();
        gt_ms += ms_since(gt_start);

        let ilp_start = Instant::now();
        let matches = self.all_mapping_matches();
        let (problem, varmap) = build_ilp(&self.spec, model, &matches)?;
        let solution = solve_ilp(&problem)?;
        ilp_ms += ms_since(ilp_start);

        let (appeared, vanished) = std::mem::take(&mut self.pending_delta);
        let mut report = CycleReport {
            at_version: model.version(),
            appeared,
            vanished,
            var_count: problem.num_vars(),
            constraint_count: problem.constraints().len(),
            status: CycleStatus::Optimal,
            objective: None,
            bb_nodes: solution.node_count,
            selected: Vec::new(),
            applied: 0,
            gt_ms: 0.0,
            ilp_ms: 0.0,
            misc_ms: 0.0,
        };

        match solution.status {
            SolveStatus::Infeasible | SolveStatus::Unbounded => {
                report.status = CycleStatus::Infeasible;
            }
            SolveStatus::Optimal => {
                report.objective = Some(solution.objective_value + self.spec.objective.constant);
                let mut selected = Vec::new();
                for (var, (mapping, m)) in varmap.by_var.iter() {
                    if solution.value(&problem, var) != Some(true) {
                        continue;
                    }
                    let def = self
                        .spec
                        .mappings
                        .iter()
                        .find(|d| d.name == *mapping)
                        .expect("mapping exists");
                    if let Some(rule) = def.rule_name() {
                        selected.push(Selected {
                            mapping: mapping.clone(),
                            rule: rule.to_string(),
                            fingerprint: m.fingerprint.clone(),
                            binding: m.binding.clone(),
                        });
                    }
                }
                selected.sort_by(|a, b| {
                    (&a.mapping, &a.fingerprint).cmp(&(&b.mapping, &b.fingerprint))
                });

                let gt_start = Instant::now();
                report.applied = apply_selected(model, &self.spec.rules, &selected)?;
                self.matcher.update(model)?;
                gt_ms += ms_since(gt_start);
                report.selected = selected;
            }
        }

        report.gt_ms = gt_ms;
        report.ilp_ms = ilp_ms;
        report.misc_ms = (ms_since(total_start) - gt_ms - ilp_ms).max(0.0);
        report.at_version = model.version();
        Ok(report)
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}
