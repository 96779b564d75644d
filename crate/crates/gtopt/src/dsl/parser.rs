//! Recursive-descent parser for `.gspec` text.
//!
//! Errors are collected as diagnostics with source spans; after an error the
//! parser resynchronizes at the next `;`, closing brace, or top-level keyword
//! and keeps scanning, so one bad statement does not hide later ones.

use crate::expr::{CmpOp, Expr};
use crate::ilp::Sense;

use super::ast::*;
use super::token::{lex, Span, Tok, Token};

pub fn parse(text: &str) -> Result<Spec, Vec<Diagnostic>> {
    let (tokens, lex_errors) = lex(text);
    let mut parser = Parser {
        tokens,
        pos: 0,
        diags: lex_errors
            .into_iter()
            .map(|e| Diagnostic::error(e.span, e.message))
            .collect(),
    };
    let spec = parser.parse_spec();
    let has_errors = parser.diags.iter().any(|d| d.severity == Severity::Error);
    match (spec, has_errors) {
        (Some(spec), false) => Ok(spec),
        _ => Err(parser.diags),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> bool {
        if self.eat(&tok) {
            true
        } else {
            let found = self.peek().clone();
            self.error(self.span(), format!("expected {tok}, found {found}"));
            false
        }
    }

    fn expect_ident(&mut self, what: &str) -> Option<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Some(name)
            }
            found => {
                self.error(self.span(), format!("expected {what}, found {found}"));
                None
            }
        }
    }

    fn error(&mut self, span: Span, message: impl Into<String>) {
        self.diags.push(Diagnostic::error(span, message));
    }

    /// Skip to the next statement boundary inside a block.
    fn recover_stmt(&mut self) {
        loop {
            match self.peek() {
                Tok::Semi => {
                    self.bump();
                    return;
                }
                Tok::RBrace | Tok::Eof => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    /// Skip to the next top-level declaration keyword.
    fn recover_toplevel(&mut self) {
        loop {
            match self.peek() {
                Tok::Pattern
                | Tok::Rule
                | Tok::Mapping
                | Tok::Constraint
                | Tok::Minimize
                | Tok::Maximize
                | Tok::Eof => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn parse_spec(&mut self) -> Option<Spec> {
        let mut patterns = Vec::new();
        let mut rules = Vec::new();
        let mut mappings = Vec::new();
        let mut constraints = Vec::new();
        let mut objectives: Vec<ObjectiveDecl> = Vec::new();

        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Pattern => {
                    if let Some(p) = self.parse_pattern() {
                        patterns.push(p);
                    } else {
                        self.recover_toplevel();
                    }
                }
                Tok::Rule => {
                    if let Some(r) = self.parse_rule() {
                        rules.push(r);
                    } else {
                        self.recover_toplevel();
                    }
                }
                Tok::Mapping => {
                    if let Some(m) = self.parse_mapping() {
                        mappings.push(m);
                    } else {
                        self.recover_toplevel();
                    }
                }
                Tok::Constraint => {
                    if let Some(c) = self.parse_constraint() {
                        constraints.push(c);
                    } else {
                        self.recover_toplevel();
                    }
                }
                Tok::Minimize | Tok::Maximize => {
                    if let Some(o) = self.parse_objective() {
                        objectives.push(o);
                    } else {
                        self.recover_toplevel();
                    }
                }
                other => {
                    let msg = format!("expected a declaration, found {other}");
                    self.error(self.span(), msg);
                    self.recover_toplevel();
                }
            }
        }

        self.check_names(&patterns, &rules, &mappings, &constraints);

        let eof_span = self.span();
        if objectives.is_empty() {
            self.error(
                eof_span,
                "missing objective: a spec needs exactly one minimize/maximize",
            );
            return None;
        }
        for extra in &objectives[1..] {
            self.diags.push(Diagnostic::error(
                extra.span,
                "duplicate objective; a spec has exactly one",
            ));
        }
        let objective = objectives.swap_remove(0);
        Some(Spec {
            patterns,
            rules,
            mappings,
            constraints,
            objective,
        })
    }

    /// Cross-reference checks that need only the spec itself.
    fn check_names(
        &mut self,
        patterns: &[PatternDecl],
        rules: &[RuleDecl],
        mappings: &[MappingDecl],
        constraints: &[ConstraintDecl],
    ) {
        let mut seen: Vec<(&str, Span)> = Vec::new();
        for p in patterns {
            if seen.iter().any(|(n, _)| *n == p.name) {
                self.diags.push(Diagnostic::error(
                    p.span,
                    format!("duplicate name `{}`", p.name),
                ));
            }
            seen.push((&p.name, p.span));
        }
        for r in rules {
            if seen.iter().any(|(n, _)| *n == r.name) {
                self.diags.push(Diagnostic::error(
                    r.span,
                    format!("duplicate name `{}`", r.name),
                ));
            }
            seen.push((&r.name, r.span));
        }
        let target_exists = |name: &str| {
            patterns.iter().any(|p| p.name == name) || rules.iter().any(|r| r.name == name)
        };

        let mut mapping_names: Vec<&str> = Vec::new();
        for m in mappings {
            if mapping_names.contains(&m.name.as_str()) {
                self.diags.push(Diagnostic::error(
                    m.span,
                    format!("duplicate mapping `{}`", m.name),
                ));
            }
            mapping_names.push(&m.name);
            if !target_exists(&m.target) {
                self.diags.push(Diagnostic::error(
                    m.span,
                    format!(
                        "mapping `{}` targets unknown rule or pattern `{}`",
                        m.name, m.target
                    ),
                ));
            }
        }

        let check_template = |tpl: &TemplateExpr, diags: &mut Vec<Diagnostic>| {
            for term in &tpl.terms {
                if let TemplateTerm::Sum { mapping, span, .. } = term {
                    if !mapping_names.contains(&mapping.as_str()) {
                        diags.push(Diagnostic::error(
                            *span,
                            format!("unknown mapping `{mapping}` in sum"),
                        ));
                    }
                }
            }
        };
        let mut diags = std::mem::take(&mut self.diags);
        for c in constraints {
            if let Some(pat) = &c.for_each {
                if !target_exists(pat) {
                    diags.push(Diagnostic::error(
                        c.span,
                        format!("forEach references unknown pattern `{pat}`"),
                    ));
                }
            }
            check_template(&c.lhs, &mut diags);
            check_template(&c.rhs, &mut diags);
        }
        self.diags = diags;
    }

    fn parse_pattern(&mut self) -> Option<PatternDecl> {
        let span = self.span();
        self.expect(Tok::Pattern);
        let name = self.expect_ident("pattern name")?;
        if !self.expect(Tok::LBrace) {
            return None;
        }
        let body = self.parse_pattern_body();
        self.expect(Tok::RBrace);
        Some(PatternDecl { name, body, span })
    }

    fn parse_pattern_body(&mut self) -> PatternBody {
        let mut body = PatternBody::default();
        loop {
            match self.peek().clone() {
                Tok::RBrace | Tok::Eof => break,
                Tok::Require => {
                    let span = self.span();
                    self.bump();
                    let Some(lhs) = self.parse_expr() else {
                        self.recover_stmt();
                        continue;
                    };
                    let Some(op) = self.parse_cmp() else {
                        self.recover_stmt();
                        continue;
                    };
                    let Some(rhs) = self.parse_expr() else {
                        self.recover_stmt();
                        continue;
                    };
                    self.expect(Tok::Semi);
                    body.requires.push(RequireDecl { lhs, op, rhs, span });
                }
                Tok::Ident(first) => {
                    let span = self.span();
                    match self.peek2() {
                        Tok::Colon => {
                            self.bump();
                            self.bump();
                            let Some(ty) = self.expect_ident("node type") else {
                                self.recover_stmt();
                                continue;
                            };
                            self.expect(Tok::Semi);
                            body.vars.push(VarDecl {
                                var: first,
                                ty,
                                span,
                            });
                        }
                        Tok::Minus => {
                            self.bump();
                            self.bump();
                            let Some(ty) = self.expect_ident("edge type") else {
                                self.recover_stmt();
                                continue;
                            };
                            if !self.expect(Tok::Arrow) {
                                self.recover_stmt();
                                continue;
                            }
                            let Some(tgt) = self.expect_ident("target variable") else {
                                self.recover_stmt();
                                continue;
                            };
                            self.expect(Tok::Semi);
                            body.edges.push(EdgeDecl {
                                src: first,
                                ty,
                                tgt,
                                span,
                            });
                        }
                        other => {
                            let msg =
                                format!("expected `:` or `-edge->` after `{first}`, found {other}");
                            self.error(span, msg);
                            self.recover_stmt();
                        }
                    }
                }
                other => {
                    let msg = format!("expected a pattern statement, found {other}");
                    self.error(self.span(), msg);
                    self.recover_stmt();
                }
            }
        }
        body
    }

    fn parse_rule(&mut self) -> Option<RuleDecl> {
        let span = self.span();
        self.expect(Tok::Rule);
        let name = self.expect_ident("rule name")?;
        if !self.expect(Tok::LBrace) {
            return None;
        }
        if !self.expect(Tok::Lhs) || !self.expect(Tok::LBrace) {
            return None;
        }
        let lhs = self.parse_pattern_body();
        self.expect(Tok::RBrace);
        if !self.expect(Tok::Do) || !self.expect(Tok::LBrace) {
            return None;
        }
        let mut actions = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace | Tok::Eof => break,
                _ => match self.parse_action() {
                    Some(a) => actions.push(a),
                    None => self.recover_stmt(),
                },
            }
        }
        self.expect(Tok::RBrace);
        self.expect(Tok::RBrace);
        Some(RuleDecl {
            name,
            lhs,
            actions,
            span,
        })
    }

    fn parse_action(&mut self) -> Option<ActionDecl> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Create => {
                self.bump();
                let first = self.expect_ident("variable")?;
                match self.peek().clone() {
                    Tok::Colon => {
                        self.bump();
                        let ty = self.expect_ident("node type")?;
                        let mut attrs = Vec::new();
                        if self.eat(&Tok::LBrace) {
                            loop {
                                let name = self.expect_ident("attribute name")?;
                                if !self.expect(Tok::Eq) {
                                    return None;
                                }
                                let value = self.parse_expr()?;
                                attrs.push((name, value));
                                if !self.eat(&Tok::Comma) {
                                    break;
                                }
                            }
                            if !self.expect(Tok::RBrace) {
                                return None;
                            }
                        }
                        self.expect(Tok::Semi);
                        Some(ActionDecl::CreateNode {
                            var: first,
                            ty,
                            attrs,
                            span,
                        })
                    }
                    Tok::Minus => {
                        self.bump();
                        let ty = self.expect_ident("edge type")?;
                        if !self.expect(Tok::Arrow) {
                            return None;
                        }
                        let tgt = self.expect_ident("target variable")?;
                        self.expect(Tok::Semi);
                        Some(ActionDecl::CreateEdge {
                            src: first,
                            ty,
                            tgt,
                            span,
                        })
                    }
                    other => {
                        let msg = format!("expected `:` or `-edge->` in create, found {other}");
                        self.error(span, msg);
                        None
                    }
                }
            }
            Tok::Delete => {
                self.bump();
                let first = self.expect_ident("variable")?;
                if self.eat(&Tok::Minus) {
                    let ty = self.expect_ident("edge type")?;
                    if !self.expect(Tok::Arrow) {
                        return None;
                    }
                    let tgt = self.expect_ident("target variable")?;
                    self.expect(Tok::Semi);
                    Some(ActionDecl::DeleteEdge {
                        src: first,
                        ty,
                        tgt,
                        span,
                    })
                } else {
                    self.expect(Tok::Semi);
                    Some(ActionDecl::DeleteNode { var: first, span })
                }
            }
            Tok::Set => {
                self.bump();
                let var = self.expect_ident("variable")?;
                if !self.expect(Tok::Dot) {
                    return None;
                }
                let attr = self.expect_ident("attribute")?;
                if !self.expect(Tok::Assign) {
                    return None;
                }
                let value = self.parse_expr()?;
                self.expect(Tok::Semi);
                Some(ActionDecl::SetAttr {
                    var,
                    attr,
                    value,
                    span,
                })
            }
            other => {
                let msg = format!("expected create/delete/set, found {other}");
                self.error(span, msg);
                None
            }
        }
    }

    fn parse_mapping(&mut self) -> Option<MappingDecl> {
        let span = self.span();
        self.expect(Tok::Mapping);
        let name = self.expect_ident("mapping name")?;
        if !self.expect(Tok::To) {
            return None;
        }
        let target = self.expect_ident("rule or pattern name")?;
        Some(MappingDecl { name, target, span })
    }

    fn parse_constraint(&mut self) -> Option<ConstraintDecl> {
        let span = self.span();
        self.expect(Tok::Constraint);
        let for_each = if self.eat(&Tok::ForEach) {
            Some(self.expect_ident("pattern name")?)
        } else {
            None
        };
        if !self.expect(Tok::Colon) {
            return None;
        }
        let lhs = self.parse_template()?;
        let op = self.parse_cmp()?;
        let rhs = self.parse_template()?;
        Some(ConstraintDecl {
            for_each,
            lhs,
            op,
            rhs,
            span,
        })
    }

    fn parse_objective(&mut self) -> Option<ObjectiveDecl> {
        let span = self.span();
        let sense = if self.eat(&Tok::Minimize) {
            Sense::Minimize
        } else {
            self.expect(Tok::Maximize);
            Sense::Maximize
        };
        if !self.expect(Tok::Colon) {
            return None;
        }
        let expr = self.parse_template()?;
        Some(ObjectiveDecl { sense, expr, span })
    }

    fn parse_cmp(&mut self) -> Option<CmpOp> {
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Eq | Tok::EqEq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Ge => CmpOp::Ge,
            Tok::Gt => CmpOp::Gt,
            other => {
                let msg = format!("expected a comparison operator, found {other}");
                self.error(self.span(), msg);
                return None;
            }
        };
        self.bump();
        Some(op)
    }

    // ---- linear templates -------------------------------------------------

    fn parse_template(&mut self) -> Option<TemplateExpr> {
        let mut terms = Vec::new();
        let mut negate = self.eat(&Tok::Minus);
        loop {
            let term = self.parse_template_term(negate)?;
            terms.push(term);
            if self.eat(&Tok::Plus) {
                negate = false;
            } else if self.eat(&Tok::Minus) {
                negate = true;
            } else {
                break;
            }
        }
        Some(TemplateExpr { terms })
    }

    /// One additive term: a product chain of scalar factors and at most one
    /// `sum(...)`.
    fn parse_template_term(&mut self, negate: bool) -> Option<TemplateTerm> {
        let span = self.span();
        enum Factor {
            Scalar(Expr),
            Sum {
                mapping: String,
                filters: Vec<(String, String)>,
            },
        }
        let mut factors: Vec<(char, Factor)> = Vec::new(); // op preceding the factor
        let mut op = '*';
        loop {
            let fspan = self.span();
            let factor = if *self.peek() == Tok::Sum {
                let (mapping, filters) = self.parse_sum()?;
                Factor::Sum { mapping, filters }
            } else {
                Factor::Scalar(self.parse_factor()?)
            };
            if matches!(factor, Factor::Sum { .. }) && op == '/' {
                self.error(fspan, "division by a sum is not linear");
                return None;
            }
            factors.push((op, factor));
            if self.eat(&Tok::Star) {
                op = '*';
            } else if self.eat(&Tok::Slash) {
                op = '/';
            } else {
                break;
            }
        }

        let mut coeff: Option<Expr> = None;
        let mut sum: Option<(String, Vec<(String, String)>)> = None;
        for (op, factor) in factors {
            match factor {
                Factor::Sum { mapping, filters } => {
                    if sum.is_some() {
                        self.error(span, "a term may contain at most one sum(...)");
                        return None;
                    }
                    sum = Some((mapping, filters));
                }
                Factor::Scalar(e) => {
                    coeff = Some(match (coeff, op) {
                        (None, '*') => e,
                        (None, _) => Expr::Bin {
                            op: crate::expr::BinOp::Div,
                            lhs: Box::new(Expr::Int(1)),
                            rhs: Box::new(e),
                        },
                        (Some(c), '*') => Expr::Bin {
                            op: crate::expr::BinOp::Mul,
                            lhs: Box::new(c),
                            rhs: Box::new(e),
                        },
                        (Some(c), _) => Expr::Bin {
                            op: crate::expr::BinOp::Div,
                            lhs: Box::new(c),
                            rhs: Box::new(e),
                        },
                    });
                }
            }
        }

        match sum {
            Some((mapping, filters)) => {
                let coeff = if negate {
                    Some(Expr::Neg(Box::new(coeff.unwrap_or(Expr::Int(1)))))
                } else {
                    coeff
                };
                Some(TemplateTerm::Sum {
                    coeff,
                    mapping,
                    filters,
                    span,
                })
            }
            None => {
                let expr = coeff.expect("term has at least one factor");
                let expr = if negate {
                    Expr::Neg(Box::new(expr))
                } else {
                    expr
                };
                Some(TemplateTerm::Scalar { expr, span })
            }
        }
    }

    fn parse_sum(&mut self) -> Option<(String, Vec<(String, String)>)> {
        self.expect(Tok::Sum);
        if !self.expect(Tok::LParen) {
            return None;
        }
        let mapping = self.expect_ident("mapping name")?;
        let mut filters = Vec::new();
        if self.eat(&Tok::Where) {
            loop {
                let var = self.expect_ident("variable of the summed match")?;
                if !self.expect(Tok::EqEq) {
                    return None;
                }
                if !self.expect(Tok::Ctx) || !self.expect(Tok::Dot) {
                    return None;
                }
                let ctx_var = self.expect_ident("context variable")?;
                filters.push((var, ctx_var));
                if !self.eat(&Tok::AndAnd) {
                    break;
                }
            }
        }
        if !self.expect(Tok::RParen) {
            return None;
        }
        Some((mapping, filters))
    }

    // ---- scalar expressions ------------------------------------------------

    fn parse_expr(&mut self) -> Option<Expr> {
        let mut lhs = self.parse_addend()?;
        loop {
            let op = if self.eat(&Tok::Plus) {
                crate::expr::BinOp::Add
            } else if self.eat(&Tok::Minus) {
                crate::expr::BinOp::Sub
            } else {
                break;
            };
            let rhs = self.parse_addend()?;
            lhs = Expr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Some(lhs)
    }

    fn parse_addend(&mut self) -> Option<Expr> {
        let mut lhs = self.parse_factor()?;
        loop {
            let op = if self.eat(&Tok::Star) {
                crate::expr::BinOp::Mul
            } else if self.eat(&Tok::Slash) {
                crate::expr::BinOp::Div
            } else {
                break;
            };
            let rhs = self.parse_factor()?;
            lhs = Expr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Some(lhs)
    }

    fn parse_factor(&mut self) -> Option<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                let inner = self.parse_factor()?;
                Some(Expr::Neg(Box::new(inner)))
            }
            Tok::Int(v) => {
                self.bump();
                Some(Expr::Int(v))
            }
            Tok::Real(v) => {
                self.bump();
                Some(Expr::Real(v))
            }
            Tok::Str(s) => {
                self.bump();
                Some(Expr::Str(s))
            }
            Tok::True => {
                self.bump();
                Some(Expr::Bool(true))
            }
            Tok::False => {
                self.bump();
                Some(Expr::Bool(false))
            }
            Tok::Min | Tok::Max => {
                let is_min = *self.peek() == Tok::Min;
                self.bump();
                if !self.expect(Tok::LParen) {
                    return None;
                }
                let a = self.parse_expr()?;
                if !self.expect(Tok::Comma) {
                    return None;
                }
                let b = self.parse_expr()?;
                if !self.expect(Tok::RParen) {
                    return None;
                }
                Some(if is_min {
                    Expr::Min(Box::new(a), Box::new(b))
                } else {
                    Expr::Max(Box::new(a), Box::new(b))
                })
            }
            Tok::Ctx => {
                self.bump();
                if !self.expect(Tok::Dot) {
                    return None;
                }
                let var = self.expect_ident("context variable")?;
                if !self.expect(Tok::Dot) {
                    return None;
                }
                let attr = self.expect_ident("attribute")?;
                Some(Expr::CtxAttr { var, attr })
            }
            Tok::Ident(var) => {
                self.bump();
                if !self.expect(Tok::Dot) {
                    return None;
                }
                let attr = self.expect_ident("attribute")?;
                Some(Expr::Attr { var, attr })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.parse_expr()?;
                if !self.expect(Tok::RParen) {
                    return None;
                }
                Some(inner)
            }
            Tok::Sum => {
                self.error(
                    span,
                    "sum(...) cannot appear inside arithmetic; multiply it at the top level",
                );
                None
            }
            other => {
                let msg = format!("expected an expression, found {other}");
                self.error(span, msg);
                None
            }
        }
    }
}
