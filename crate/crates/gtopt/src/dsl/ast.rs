//! Parsed representation of a `.gspec` specification.

use serde::Serialize;

use crate::expr::{CmpOp, Expr};
use crate::ilp::Sense;

use super::token::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Severity {
    Error,
    Warning,
}

/// A parse or typecheck finding, anchored to a source position.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            span,
            message: message.into(),
        }
    }

    pub fn warning(span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            span,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {sev}: {}", self.span, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub var: String,
    pub ty: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDecl {
    pub src: String,
    pub ty: String,
    pub tgt: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequireDecl {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
    pub span: Span,
}

/// Body shared by standalone patterns and rule LHSs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PatternBody {
    pub vars: Vec<VarDecl>,
    pub edges: Vec<EdgeDecl>,
    pub requires: Vec<RequireDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternDecl {
    pub name: String,
    pub body: PatternBody,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionDecl {
    CreateNode {
        var: String,
        ty: String,
        attrs: Vec<(String, Expr)>,
        span: Span,
    },
    CreateEdge {
        src: String,
        ty: String,
        tgt: String,
        span: Span,
    },
    DeleteNode {
        var: String,
        span: Span,
    },
    DeleteEdge {
        src: String,
        ty: String,
        tgt: String,
        span: Span,
    },
    SetAttr {
        var: String,
        attr: String,
        value: Expr,
        span: Span,
    },
}

impl ActionDecl {
    pub fn span(&self) -> Span {
        match self {
            ActionDecl::CreateNode { span, .. }
            | ActionDecl::CreateEdge { span, .. }
            | ActionDecl::DeleteNode { span, .. }
            | ActionDecl::DeleteEdge { span, .. }
            | ActionDecl::SetAttr { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleDecl {
    pub name: String,
    pub lhs: PatternBody,
    pub actions: Vec<ActionDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingDecl {
    pub name: String,
    pub target: String,
    pub span: Span,
}

/// One additive term of a linear template.
#[derive(Debug, Clone, PartialEq)]
pub enum TemplateTerm {
    /// `coeff * sum(mapping where a == ctx.b && ...)`; a missing coeff means 1,
    /// a leading minus is folded into the coeff.
    Sum {
        coeff: Option<Expr>,
        mapping: String,
        filters: Vec<(String, String)>,
        span: Span,
    },
    /// A constant or context-attribute expression (no `sum` inside).
    Scalar { expr: Expr, span: Span },
}

impl TemplateTerm {
    pub fn span(&self) -> Span {
        match self {
            TemplateTerm::Sum { span, .. } | TemplateTerm::Scalar { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemplateExpr {
    pub terms: Vec<TemplateTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintDecl {
    pub for_each: Option<String>,
    pub lhs: TemplateExpr,
    pub op: CmpOp,
    pub rhs: TemplateExpr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveDecl {
    pub sense: Sense,
    pub expr: TemplateExpr,
    pub span: Span,
}

/// A parsed specification: patterns, rules, mappings, constraints, and
/// exactly one objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Spec {
    pub patterns: Vec<PatternDecl>,
    pub rules: Vec<RuleDecl>,
    pub mappings: Vec<MappingDecl>,
    pub constraints: Vec<ConstraintDecl>,
    pub objective: ObjectiveDecl,
}
