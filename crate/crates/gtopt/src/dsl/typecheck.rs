//! Type checking against a metamodel, and lowering into the executable
//! representation the pipeline consumes.

use std::collections::BTreeMap;

use crate::expr::{CmpOp, Expr};
use crate::ilp::{RowSense, Sense};
use crate::model::{AttrKind, AttrValue, Metamodel};
use crate::pattern::{AttrCondition, Operand, Pattern, PatternEdge, PatternNode};
use crate::rule::{Action, GtRule};

use super::ast::*;
use super::token::Span;

/// What a mapping's binary variables range over.
#[derive(Debug, Clone, PartialEq)]
pub enum MappingTarget {
    Rule(String),
    Pattern(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingDef {
    pub name: String,
    pub target: MappingTarget,
}

impl MappingDef {
    /// Name of the pattern whose matches index this mapping's variables.
    /// A rule's LHS pattern carries the rule's own name.
    pub fn pattern_name(&self) -> &str {
        match &self.target {
            MappingTarget::Rule(n) | MappingTarget::Pattern(n) => n,
        }
    }

    pub fn rule_name(&self) -> Option<&str> {
        match &self.target {
            MappingTarget::Rule(n) => Some(n),
            MappingTarget::Pattern(_) => None,
        }
    }
}

/// `sign * coeff(match) * sum(mapping where filters)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SumTerm {
    pub mapping: String,
    pub coeff: Option<Expr>,
    pub sign: f64,
    /// (variable of the summed match, variable of the context match)
    pub filters: Vec<(String, String)>,
}

/// A constraint lowered to `sums + scalars (sense) 0`; scalars evaluate per
/// context match at build time and move to the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledConstraint {
    /// Context pattern for ForEach scope; None is global.
    pub scope: Option<String>,
    pub sums: Vec<SumTerm>,
    pub scalars: Vec<(f64, Expr)>,
    pub sense: RowSense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledObjective {
    pub sense: Sense,
    pub sums: Vec<SumTerm>,
    /// Constant offset folded out of the template; reported, not solved for.
    pub constant: f64,
}

/// A typechecked specification in executable form.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledSpec {
    /// Standalone patterns plus each rule's LHS under the rule's name.
    pub patterns: BTreeMap<String, Pattern>,
    pub rules: BTreeMap<String, GtRule>,
    pub mappings: Vec<MappingDef>,
    pub constraints: Vec<CompiledConstraint>,
    pub objective: CompiledObjective,
}

/// Check a parsed spec against a metamodel. Empty result means well-typed.
pub fn typecheck(spec: &Spec, mm: &Metamodel) -> Vec<Diagnostic> {
    Checker {
        mm,
        diags: Vec::new(),
    }
    .run(spec)
}

/// Typecheck and lower. Errors (never warnings) abort compilation.
pub fn compile(spec: &Spec, mm: &Metamodel) -> Result<CompiledSpec, Vec<Diagnostic>> {
    let diags = typecheck(spec, mm);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(diags);
    }
    Ok(lower(spec))
}

struct Checker<'a> {
    mm: &'a Metamodel,
    diags: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn error(&mut self, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(span, msg));
    }

    fn run(mut self, spec: &Spec) -> Vec<Diagnostic> {
        for p in &spec.patterns {
            self.check_pattern_body(&p.body, p.span);
        }
        for r in &spec.rules {
            self.check_pattern_body(&r.lhs, r.span);
            self.check_actions(r);
        }

        // Variable scopes per pattern name (rules contribute their LHS).
        let scopes: BTreeMap<&str, BTreeMap<&str, &str>> = spec
            .patterns
            .iter()
            .map(|p| (p.name.as_str(), &p.body))
            .chain(spec.rules.iter().map(|r| (r.name.as_str(), &r.lhs)))
            .map(|(name, body)| {
                (
                    name,
                    body.vars
                        .iter()
                        .map(|v| (v.var.as_str(), v.ty.as_str()))
                        .collect(),
                )
            })
            .collect();
        let mapping_pattern: BTreeMap<&str, &str> = spec
            .mappings
            .iter()
            .map(|m| (m.name.as_str(), m.target.as_str()))
            .collect();

        for c in &spec.constraints {
            if !matches!(c.op, CmpOp::Le | CmpOp::Eq | CmpOp::Ge) {
                self.error(
                    c.span,
                    format!(
                        "`{}` is not a valid linear constraint sense; use <=, =, >=",
                        c.op
                    ),
                );
            }
            let ctx_scope = c.for_each.as_deref().and_then(|p| scopes.get(p).cloned());
            for (tpl, _side) in [(&c.lhs, "lhs"), (&c.rhs, "rhs")] {
                self.check_template(tpl, ctx_scope.as_ref(), &scopes, &mapping_pattern, c.span);
            }
        }

        // Objective: global scope, no filters, no ctx.
        for term in &spec.objective.expr.terms {
            match term {
                TemplateTerm::Sum { filters, span, .. } if !filters.is_empty() => {
                    self.error(
                        *span,
                        "where-filters in the objective have no context to bind against",
                    );
                }
                _ => {}
            }
        }
        self.check_template(
            &spec.objective.expr,
            None,
            &scopes,
            &mapping_pattern,
            spec.objective.span,
        );
        for term in &spec.objective.expr.terms {
            if let TemplateTerm::Scalar { expr, span } = term {
                if const_value(expr).is_some() {
                    self.diags.push(Diagnostic::warning(
                        *span,
                        "constant term in the objective shifts the reported value but not the solution",
                    ));
                }
            }
        }

        self.diags
    }

    fn check_pattern_body(&mut self, body: &PatternBody, _span: Span) {
        let mut vars: BTreeMap<&str, &str> = BTreeMap::new();
        for v in &body.vars {
            if vars.insert(&v.var, &v.ty).is_some() {
                self.error(v.span, format!("duplicate variable `{}`", v.var));
            }
            if self.mm.node_type(&v.ty).is_none() {
                self.error(v.span, format!("unknown node type `{}`", v.ty));
            }
        }
        for e in &body.edges {
            let src_ty = vars.get(e.src.as_str()).copied();
            let tgt_ty = vars.get(e.tgt.as_str()).copied();
            if src_ty.is_none() {
                self.error(e.span, format!("unknown variable `{}`", e.src));
            }
            if tgt_ty.is_none() {
                self.error(e.span, format!("unknown variable `{}`", e.tgt));
            }
            if let (Some(src_ty), Some(tgt_ty)) = (src_ty, tgt_ty) {
                if self.mm.node_type(src_ty).is_none() {
                    continue; // already reported at the var decl
                }
                match self.mm.edge_type(&e.ty, src_ty) {
                    None => self.error(e.span, format!("no edge type `{}` from `{src_ty}`", e.ty)),
                    Some(et) if et.tgt != tgt_ty => self.error(
                        e.span,
                        format!(
                            "edge `{}` targets `{}`, but `{}` is a `{tgt_ty}`",
                            e.ty, et.tgt, e.tgt
                        ),
                    ),
                    Some(_) => {}
                }
            }
        }
        for req in &body.requires {
            let mut kinds = Vec::new();
            for side in [&req.lhs, &req.rhs] {
                let kind = side.infer_kind(&|is_ctx, var, attr| {
                    if is_ctx {
                        return Err("ctx references are not allowed in pattern conditions".into());
                    }
                    let ty = vars
                        .get(var)
                        .ok_or_else(|| format!("unknown variable `{var}`"))?;
                    self.mm
                        .attr_kind(ty, attr)
                        .ok_or_else(|| format!("type `{ty}` has no attribute `{attr}`"))
                });
                match kind {
                    Ok(k) => kinds.push(Some(k)),
                    Err(msg) => {
                        self.error(req.span, msg);
                        kinds.push(None);
                    }
                }
                if to_operand(side).is_none() {
                    self.error(
                        req.span,
                        "pattern conditions compare an attribute or a constant; arithmetic is not supported here",
                    );
                }
            }
            if let (Some(Some(l)), Some(Some(r))) = (kinds.first(), kinds.get(1)) {
                let ok = match (l, r) {
                    (AttrKind::Int | AttrKind::Real, AttrKind::Int | AttrKind::Real) => true,
                    (AttrKind::Bool, AttrKind::Bool) | (AttrKind::Str, AttrKind::Str) => {
                        matches!(req.op, CmpOp::Eq | CmpOp::Ne)
                    }
                    _ => false,
                };
                if !ok {
                    self.error(
                        req.span,
                        format!("cannot compare {l} with {r} using `{}`", req.op),
                    );
                }
            }
        }
    }

    fn check_actions(&mut self, rule: &RuleDecl) {
        let mut scope: BTreeMap<String, String> = rule
            .lhs
            .vars
            .iter()
            .map(|v| (v.var.clone(), v.ty.clone()))
            .collect();
        for action in &rule.actions {
            match action {
                ActionDecl::CreateNode {
                    var,
                    ty,
                    attrs,
                    span,
                } => {
                    if scope.contains_key(var) {
                        self.error(*span, format!("variable `{var}` is already bound"));
                    }
                    let Some(tdef) = self.mm.node_type(ty) else {
                        self.error(*span, format!("unknown node type `{ty}`"));
                        continue;
                    };
                    for adef in &tdef.attrs {
                        match attrs.iter().find(|(n, _)| n == &adef.name) {
                            None => self.error(
                                *span,
                                format!(
                                    "create `{var}`: attribute `{}` must be initialized",
                                    adef.name
                                ),
                            ),
                            Some((_, expr)) => {
                                if let Some(k) = self.expr_kind(expr, &scope, *span) {
                                    if !assignable(k, adef.kind) {
                                        self.error(
                                            *span,
                                            format!(
                                                "attribute `{}` expects {}, expression is {k}",
                                                adef.name, adef.kind
                                            ),
                                        );
                                    }
                                }
                            }
                        }
                    }
                    for (name, _) in attrs {
                        if tdef.attrs.iter().all(|a| &a.name != name) {
                            self.error(*span, format!("`{ty}` has no attribute `{name}`"));
                        }
                    }
                    scope.insert(var.clone(), ty.clone());
                }
                ActionDecl::CreateEdge { src, ty, tgt, span }
                | ActionDecl::DeleteEdge { src, ty, tgt, span } => {
                    let src_ty = scope.get(src).cloned();
                    let tgt_ty = scope.get(tgt).cloned();
                    if src_ty.is_none() {
                        self.error(*span, format!("unknown variable `{src}`"));
                    }
                    if tgt_ty.is_none() {
                        self.error(*span, format!("unknown variable `{tgt}`"));
                    }
                    if let (Some(src_ty), Some(tgt_ty)) = (src_ty, tgt_ty) {
                        match self.mm.edge_type(ty, &src_ty) {
                            None => {
                                self.error(*span, format!("no edge type `{ty}` from `{src_ty}`"))
                            }
                            Some(et) if et.tgt != tgt_ty => self.error(
                                *span,
                                format!(
                                    "edge `{ty}` targets `{}`, but `{tgt}` is a `{tgt_ty}`",
                                    et.tgt
                                ),
                            ),
                            Some(_) => {}
                        }
                    }
                }
                ActionDecl::DeleteNode { var, span } => {
                    if !scope.contains_key(var) {
                        self.error(*span, format!("unknown variable `{var}`"));
                    }
                }
                ActionDecl::SetAttr {
                    var,
                    attr,
                    value,
                    span,
                } => {
                    let declared = match scope.get(var) {
                        None => {
                            self.error(*span, format!("unknown variable `{var}`"));
                            continue;
                        }
                        Some(ty) => match self.mm.attr_kind(ty, attr) {
                            None => {
                                self.error(*span, format!("type `{ty}` has no attribute `{attr}`"));
                                continue;
                            }
                            Some(k) => k,
                        },
                    };
                    if let Some(k) = self.expr_kind(value, &scope, *span) {
                        if !assignable(k, declared) {
                            self.error(
                                *span,
                                format!("`{var}.{attr}` expects {declared}, expression is {k}"),
                            );
                        }
                    }
                }
            }
        }
    }

    fn expr_kind(
        &mut self,
        expr: &Expr,
        scope: &BTreeMap<String, String>,
        span: Span,
    ) -> Option<AttrKind> {
        let result = expr.infer_kind(&|is_ctx, var, attr| {
            if is_ctx {
                return Err("ctx references are not allowed here".into());
            }
            let ty = scope
                .get(var)
                .ok_or_else(|| format!("unknown variable `{var}`"))?;
            self.mm
                .attr_kind(ty, attr)
                .ok_or_else(|| format!("type `{ty}` has no attribute `{attr}`"))
        });
        match result {
            Ok(k) => Some(k),
            Err(msg) => {
                self.error(span, msg);
                None
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn check_template(
        &mut self,
        tpl: &TemplateExpr,
        ctx_scope: Option<&BTreeMap<&str, &str>>,
        scopes: &BTreeMap<&str, BTreeMap<&str, &str>>,
        mapping_pattern: &BTreeMap<&str, &str>,
        decl_span: Span,
    ) {
        for term in &tpl.terms {
            match term {
                TemplateTerm::Sum {
                    coeff,
                    mapping,
                    filters,
                    span,
                } => {
                    let Some(summed_pattern) = mapping_pattern.get(mapping.as_str()) else {
                        continue; // unknown mapping already reported at parse
                    };
                    let Some(summed_scope) = scopes.get(summed_pattern) else {
                        continue;
                    };
                    if let Some(coeff) = coeff {
                        if coeff.uses_ctx() {
                            self.error(
                                *span,
                                "sum coefficients range over the summed match; ctx attributes cannot appear inside",
                            );
                        }
                        let kind = coeff.infer_kind(&|is_ctx, var, attr| {
                            if is_ctx {
                                return Err(String::new()); // reported above
                            }
                            let ty = summed_scope.get(var).ok_or_else(|| {
                                format!("unknown variable `{var}` in pattern `{summed_pattern}`")
                            })?;
                            self.mm
                                .attr_kind(ty, attr)
                                .ok_or_else(|| format!("type `{ty}` has no attribute `{attr}`"))
                        });
                        match kind {
                            Err(msg) if !msg.is_empty() => self.error(*span, msg),
                            Err(_) => {}
                            Ok(AttrKind::Int | AttrKind::Real) => {}
                            Ok(k) => self
                                .error(*span, format!("sum coefficient must be numeric, got {k}")),
                        }
                    }
                    if !filters.is_empty() && ctx_scope.is_none() {
                        self.error(*span, "where-filters need a forEach context");
                    }
                    for (svar, cvar) in filters {
                        let sty = summed_scope.get(svar.as_str());
                        if sty.is_none() {
                            self.error(
                                *span,
                                format!("pattern `{summed_pattern}` has no variable `{svar}`"),
                            );
                        }
                        if let Some(ctx) = ctx_scope {
                            let cty = ctx.get(cvar.as_str());
                            if cty.is_none() {
                                self.error(*span, format!("context has no variable `{cvar}`"));
                            }
                            if let (Some(s), Some(c)) = (sty, cty) {
                                if s != c {
                                    self.error(
                                        *span,
                                        format!("filter equates a `{s}` with a `{c}`; node types must match"),
                                    );
                                }
                            }
                        }
                    }
                }
                TemplateTerm::Scalar { expr, span } => {
                    if expr.uses_attrs() {
                        self.error(
                            *span,
                            "bare attribute references are not allowed here; use ctx.VAR.ATTR or a sum coefficient",
                        );
                        continue;
                    }
                    if expr.uses_ctx() && ctx_scope.is_none() {
                        self.error(*span, "ctx attributes need a forEach context");
                        continue;
                    }
                    let kind = expr.infer_kind(&|is_ctx, var, attr| {
                        if !is_ctx {
                            return Err(format!("unknown variable `{var}`"));
                        }
                        let Some(ctx) = ctx_scope else {
                            return Err("no context".into());
                        };
                        let ty = ctx
                            .get(var)
                            .ok_or_else(|| format!("context has no variable `{var}`"))?;
                        self.mm
                            .attr_kind(ty, attr)
                            .ok_or_else(|| format!("type `{ty}` has no attribute `{attr}`"))
                    });
                    match kind {
                        Err(msg) => self.error(*span, msg),
                        Ok(AttrKind::Int | AttrKind::Real) => {}
                        // A bare bool context attribute is a 0/1 indicator.
                        Ok(AttrKind::Bool) if matches!(expr, Expr::CtxAttr { .. }) => {}
                        Ok(k) => self.error(*span, format!("scalar term must be numeric, got {k}")),
                    }
                }
            }
        }
        let _ = decl_span;
    }
}

fn assignable(from: AttrKind, to: AttrKind) -> bool {
    from == to || (from == AttrKind::Int && to == AttrKind::Real)
}

/// Fold an attribute-free numeric expression to a constant.
fn const_value(expr: &Expr) -> Option<f64> {
    match expr {
        Expr::Int(v) => Some(*v as f64),
        Expr::Real(v) => Some(*v),
        Expr::Neg(e) => const_value(e).map(|v| -v),
        Expr::Bin { op, lhs, rhs } => {
            let (l, r) = (const_value(lhs)?, const_value(rhs)?);
            Some(match op {
                crate::expr::BinOp::Add => l + r,
                crate::expr::BinOp::Sub => l - r,
                crate::expr::BinOp::Mul => l * r,
                crate::expr::BinOp::Div => l / r,
            })
        }
        Expr::Min(a, b) => Some(const_value(a)?.min(const_value(b)?)),
        Expr::Max(a, b) => Some(const_value(a)?.max(const_value(b)?)),
        _ => None,
    }
}

/// Lower a condition side to a match operand, folding a leading minus on a
/// numeric literal.
fn to_operand(expr: &Expr) -> Option<Operand> {
    match expr {
        Expr::Attr { var, attr } => Some(Operand::Attr {
            var: var.clone(),
            attr: attr.clone(),
        }),
        Expr::Int(v) => Some(Operand::Const(AttrValue::Int(*v))),
        Expr::Real(v) => Some(Operand::Const(AttrValue::Real(*v))),
        Expr::Bool(v) => Some(Operand::Const(AttrValue::Bool(*v))),
        Expr::Str(v) => Some(Operand::Const(AttrValue::Str(v.clone()))),
        Expr::Neg(inner) => match to_operand(inner)? {
            Operand::Const(AttrValue::Int(v)) => Some(Operand::Const(AttrValue::Int(-v))),
            Operand::Const(AttrValue::Real(v)) => Some(Operand::Const(AttrValue::Real(-v))),
            _ => None,
        },
        _ => None,
    }
}

fn lower(spec: &Spec) -> CompiledSpec {
    let mut patterns = BTreeMap::new();
    for p in &spec.patterns {
        patterns.insert(p.name.clone(), lower_pattern(&p.name, &p.body));
    }
    let mut rules = BTreeMap::new();
    for r in &spec.rules {
        let lhs = lower_pattern(&r.name, &r.lhs);
        patterns.insert(r.name.clone(), lhs.clone());
        let actions = r
            .actions
            .iter()
            .map(|a| match a {
                ActionDecl::CreateNode { var, ty, attrs, .. } => Action::CreateNode {
                    var: var.clone(),
                    ty: ty.clone(),
                    attrs: attrs.clone(),
                },
                ActionDecl::CreateEdge { src, ty, tgt, .. } => Action::CreateEdge {
                    ty: ty.clone(),
                    src: src.clone(),
                    tgt: tgt.clone(),
                },
                ActionDecl::DeleteNode { var, .. } => Action::DeleteNode { var: var.clone() },
                ActionDecl::DeleteEdge { src, ty, tgt, .. } => Action::DeleteEdge {
                    ty: ty.clone(),
                    src: src.clone(),
                    tgt: tgt.clone(),
                },
                ActionDecl::SetAttr {
                    var, attr, value, ..
                } => Action::SetAttr {
                    var: var.clone(),
                    attr: attr.clone(),
                    value: value.clone(),
                },
            })
            .collect();
        rules.insert(
            r.name.clone(),
            GtRule {
                name: r.name.clone(),
                lhs,
                actions,
            },
        );
    }

    let mappings = spec
        .mappings
        .iter()
        .map(|m| MappingDef {
            name: m.name.clone(),
            target: if rules.contains_key(&m.target) {
                MappingTarget::Rule(m.target.clone())
            } else {
                MappingTarget::Pattern(m.target.clone())
            },
        })
        .collect();

    let constraints = spec
        .constraints
        .iter()
        .map(|c| {
            let mut sums = Vec::new();
            let mut scalars = Vec::new();
            for (tpl, sign) in [(&c.lhs, 1.0), (&c.rhs, -1.0)] {
                for term in &tpl.terms {
                    match term {
                        TemplateTerm::Sum {
                            coeff,
                            mapping,
                            filters,
                            ..
                        } => sums.push(SumTerm {
                            mapping: mapping.clone(),
                            coeff: coeff.clone(),
                            sign,
                            filters: filters.clone(),
                        }),
                        TemplateTerm::Scalar { expr, .. } => scalars.push((sign, expr.clone())),
                    }
                }
            }
            let sense = match c.op {
                CmpOp::Le => RowSense::Le,
                CmpOp::Ge => RowSense::Ge,
                _ => RowSense::Eq,
            };
            CompiledConstraint {
                scope: c.for_each.clone(),
                sums,
                scalars,
                sense,
            }
        })
        .collect();

    let mut objective = CompiledObjective {
        sense: spec.objective.sense,
        sums: Vec::new(),
        constant: 0.0,
    };
    for term in &spec.objective.expr.terms {
        match term {
            TemplateTerm::Sum {
                coeff,
                mapping,
                filters,
                ..
            } => objective.sums.push(SumTerm {
                mapping: mapping.clone(),
                coeff: coeff.clone(),
                sign: 1.0,
                filters: filters.clone(),
            }),
            TemplateTerm::Scalar { expr, .. } => {
                objective.constant += const_value(expr).unwrap_or(0.0);
            }
        }
    }

    CompiledSpec {
        patterns,
        rules,
        mappings,
        constraints,
        objective,
    }
}

fn lower_pattern(name: &str, body: &PatternBody) -> Pattern {
    Pattern {
        name: name.to_string(),
        nodes: body
            .vars
            .iter()
            .map(|v| PatternNode {
                var: v.var.clone(),
                ty: v.ty.clone(),
            })
            .collect(),
        edges: body
            .edges
            .iter()
            .map(|e| PatternEdge {
                ty: e.ty.clone(),
                src: e.src.clone(),
                tgt: e.tgt.clone(),
            })
            .collect(),
        conditions: body
            .requires
            .iter()
            .map(|r| AttrCondition {
                lhs: to_operand(&r.lhs).expect("typecheck guarantees simple operands"),
                op: r.op,
                rhs: to_operand(&r.rhs).expect("typecheck guarantees simple operands"),
            })
            .collect(),
    }
}
