//! Arithmetic and comparison expressions over bound node attributes.
//!
//! The same little language serves three places: attribute conditions in
//! patterns (comparison operands), value expressions in rule actions, and
//! coefficient expressions in constraint/objective templates. Template
//! scalars may additionally reference the enclosing context match through
//! [`Expr::CtxAttr`].

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::model::{AttrKind, AttrValue, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        })
    }
}

/// Comparison operators for pattern conditions and constraint senses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn holds_f64(self, l: f64, r: f64) -> bool {
        match self {
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
            CmpOp::Ge => l >= r,
            CmpOp::Gt => l > r,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Real(f64),
    Bool(bool),
    Str(String),
    /// Attribute of a node bound in the local scope (pattern/rule/summed match).
    Attr {
        var: String,
        attr: String,
    },
    /// Attribute of a node bound by the enclosing ForEach context match.
    CtxAttr {
        var: String,
        attr: String,
    },
    Neg(Box<Expr>),
    Bin {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unbound reference `{what}`")]
    UnboundRef { what: String },
    #[error("kind mismatch: {detail}")]
    KindMismatch { detail: String },
    #[error("integer overflow")]
    Overflow,
}

fn numeric(v: &AttrValue, what: impl Fn() -> String) -> Result<AttrValue, EvalError> {
    match v {
        AttrValue::Int(_) | AttrValue::Real(_) => Ok(v.clone()),
        other => Err(EvalError::KindMismatch {
            detail: format!("{} is {} where a number is required", what(), other.kind()),
        }),
    }
}

fn arith(op: BinOp, l: AttrValue, r: AttrValue) -> Result<AttrValue, EvalError> {
    use AttrValue::{Int, Real};
    if op == BinOp::Div {
        let rv = r.as_f64().unwrap();
        if rv == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        return Ok(Real(l.as_f64().unwrap() / rv));
    }
    match (l, r) {
        (Int(a), Int(b)) => {
            let v = match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
                BinOp::Div => unreachable!(),
            };
            v.map(Int).ok_or(EvalError::Overflow)
        }
        (a, b) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            Ok(Real(match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => unreachable!(),
            }))
        }
    }
}

fn min_max(is_min: bool, l: AttrValue, r: AttrValue) -> AttrValue {
    use AttrValue::{Int, Real};
    match (l, r) {
        (Int(a), Int(b)) => Int(if is_min { a.min(b) } else { a.max(b) }),
        (a, b) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            Real(if is_min { a.min(b) } else { a.max(b) })
        }
    }
}

impl Expr {
    /// Evaluate against a model. `binding` resolves [`Expr::Attr`] vars,
    /// `ctx_binding` (when present) resolves [`Expr::CtxAttr`] vars.
    pub fn eval(
        &self,
        model: &Model,
        binding: &BTreeMap<String, String>,
        ctx_binding: Option<&BTreeMap<String, String>>,
    ) -> Result<AttrValue, EvalError> {
        match self {
            Expr::Int(v) => Ok(AttrValue::Int(*v)),
            Expr::Real(v) => Ok(AttrValue::Real(*v)),
            Expr::Bool(v) => Ok(AttrValue::Bool(*v)),
            Expr::Str(v) => Ok(AttrValue::Str(v.clone())),
            Expr::Attr { var, attr } => lookup(model, binding, var, attr),
            Expr::CtxAttr { var, attr } => match ctx_binding {
                Some(ctx) => lookup(model, ctx, var, attr),
                None => Err(EvalError::UnboundRef {
                    what: format!("ctx.{var}.{attr}"),
                }),
            },
            Expr::Neg(inner) => {
                let v = inner.eval(model, binding, ctx_binding)?;
                match numeric(&v, || format!("{inner}"))? {
                    AttrValue::Int(i) => i
                        .checked_neg()
                        .map(AttrValue::Int)
                        .ok_or(EvalError::Overflow),
                    AttrValue::Real(r) => Ok(AttrValue::Real(-r)),
                    _ => unreachable!(),
                }
            }
            Expr::Bin { op, lhs, rhs } => {
                let l = lhs.eval(model, binding, ctx_binding)?;
                let r = rhs.eval(model, binding, ctx_binding)?;
                arith(
                    *op,
                    numeric(&l, || format!("{lhs}"))?,
                    numeric(&r, || format!("{rhs}"))?,
                )
            }
            Expr::Min(a, b) | Expr::Max(a, b) => {
                let is_min = matches!(self, Expr::Min(..));
                let l = a.eval(model, binding, ctx_binding)?;
                let r = b.eval(model, binding, ctx_binding)?;
                Ok(min_max(
                    is_min,
                    numeric(&l, || format!("{a}"))?,
                    numeric(&r, || format!("{b}"))?,
                ))
            }
        }
    }

    /// Evaluate and require a numeric result.
    pub fn eval_f64(
        &self,
        model: &Model,
        binding: &BTreeMap<String, String>,
        ctx_binding: Option<&BTreeMap<String, String>>,
    ) -> Result<f64, EvalError> {
        let v = self.eval(model, binding, ctx_binding)?;
        v.as_f64().ok_or_else(|| EvalError::KindMismatch {
            detail: format!("`{self}` evaluates to {}, expected a number", v.kind()),
        })
    }

    /// Infer the result kind. `kind_of(is_ctx, var, attr)` resolves attribute
    /// references against the relevant pattern scopes.
    pub fn infer_kind(
        &self,
        kind_of: &impl Fn(bool, &str, &str) -> Result<AttrKind, String>,
    ) -> Result<AttrKind, String> {
        match self {
            Expr::Int(_) => Ok(AttrKind::Int),
            Expr::Real(_) => Ok(AttrKind::Real),
            Expr::Bool(_) => Ok(AttrKind::Bool),
            Expr::Str(_) => Ok(AttrKind::Str),
            Expr::Attr { var, attr } => kind_of(false, var, attr),
            Expr::CtxAttr { var, attr } => kind_of(true, var, attr),
            Expr::Neg(inner) => match inner.infer_kind(kind_of)? {
                k @ (AttrKind::Int | AttrKind::Real) => Ok(k),
                k => Err(format!("cannot negate a {k} value")),
            },
            Expr::Bin { op, lhs, rhs } => {
                let l = lhs.infer_kind(kind_of)?;
                let r = rhs.infer_kind(kind_of)?;
                for (k, side) in [(l, lhs), (r, rhs)] {
                    if !matches!(k, AttrKind::Int | AttrKind::Real) {
                        return Err(format!("`{side}` is {k}, arithmetic needs numbers"));
                    }
                }
                if *op == BinOp::Div {
                    Ok(AttrKind::Real)
                } else if l == AttrKind::Int && r == AttrKind::Int {
                    Ok(AttrKind::Int)
                } else {
                    Ok(AttrKind::Real)
                }
            }
            Expr::Min(a, b) | Expr::Max(a, b) => {
                let l = a.infer_kind(kind_of)?;
                let r = b.infer_kind(kind_of)?;
                for (k, side) in [(l, a), (r, b)] {
                    if !matches!(k, AttrKind::Int | AttrKind::Real) {
                        return Err(format!("`{side}` is {k}, min/max needs numbers"));
                    }
                }
                if l == AttrKind::Int && r == AttrKind::Int {
                    Ok(AttrKind::Int)
                } else {
                    Ok(AttrKind::Real)
                }
            }
        }
    }

    /// Does the expression mention any `ctx.` reference?
    pub fn uses_ctx(&self) -> bool {
        match self {
            Expr::CtxAttr { .. } => true,
            Expr::Neg(e) => e.uses_ctx(),
            Expr::Bin { lhs, rhs, .. } => lhs.uses_ctx() || rhs.uses_ctx(),
            Expr::Min(a, b) | Expr::Max(a, b) => a.uses_ctx() || b.uses_ctx(),
            _ => false,
        }
    }

    /// Does the expression mention any local attribute reference?
    pub fn uses_attrs(&self) -> bool {
        match self {
            Expr::Attr { .. } => true,
            Expr::Neg(e) => e.uses_attrs(),
            Expr::Bin { lhs, rhs, .. } => lhs.uses_attrs() || rhs.uses_attrs(),
            Expr::Min(a, b) | Expr::Max(a, b) => a.uses_attrs() || b.uses_attrs(),
            _ => false,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin {
                op: BinOp::Add | BinOp::Sub,
                ..
            } => 1,
            Expr::Bin {
                op: BinOp::Mul | BinOp::Div,
                ..
            } => 2,
            Expr::Neg(_) => 3,
            _ => 4,
        }
    }
}

fn lookup(
    model: &Model,
    binding: &BTreeMap<String, String>,
    var: &str,
    attr: &str,
) -> Result<AttrValue, EvalError> {
    let id = binding.get(var).ok_or_else(|| EvalError::UnboundRef {
        what: var.to_string(),
    })?;
    model
        .attr(id, attr)
        .cloned()
        .ok_or_else(|| EvalError::UnboundRef {
            what: format!("{var}.{attr} (node `{id}`)"),
        })
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn paren(f: &mut fmt::Formatter<'_>, outer: u8, inner: &Expr) -> fmt::Result {
            if inner.precedence() < outer {
                write!(f, "({inner})")
            } else {
                write!(f, "{inner}")
            }
        }
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Real(v) => {
                if v.fract() == 0.0 && v.is_finite() {
                    write!(f, "{v:.1}")
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Bool(v) => write!(f, "{v}"),
            Expr::Str(v) => write!(f, "{v:?}"),
            Expr::Attr { var, attr } => write!(f, "{var}.{attr}"),
            Expr::CtxAttr { var, attr } => write!(f, "ctx.{var}.{attr}"),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                paren(f, 3, inner)
            }
            Expr::Bin { op, lhs, rhs } => {
                let p = self.precedence();
                paren(f, p, lhs)?;
                write!(f, " {op} ")?;
                // right operand needs parens at equal precedence: a - (b - c)
                if rhs.precedence() <= p {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

/// Compare two attribute values. Numeric kinds compare through f64; bools and
/// strings support equality tests only.
pub fn compare(lhs: &AttrValue, op: CmpOp, rhs: &AttrValue) -> Result<bool, EvalError> {
    match (lhs, rhs) {
        (AttrValue::Bool(a), AttrValue::Bool(b)) => match op {
            CmpOp::Eq => Ok(a == b),
            CmpOp::Ne => Ok(a != b),
            _ => Err(EvalError::KindMismatch {
                detail: format!("bool values only support = and !=, got {op}"),
            }),
        },
        (AttrValue::Str(a), AttrValue::Str(b)) => match op {
            CmpOp::Eq => Ok(a == b),
            CmpOp::Ne => Ok(a != b),
            _ => Err(EvalError::KindMismatch {
                detail: format!("string values only support = and !=, got {op}"),
            }),
        },
        (a, b) => match (a.as_f64(), b.as_f64()) {
            (Some(a), Some(b)) => Ok(op.holds_f64(a, b)),
            _ => Err(EvalError::KindMismatch {
                detail: format!("cannot compare {} with {}", lhs.kind(), rhs.kind()),
            }),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Change;
    use crate::model::{AttrDef, Metamodel, NodeTypeDef};

    fn fixture() -> (Model, BTreeMap<String, String>) {
        let mm = Metamodel::new(
            vec![NodeTypeDef {
                name: "T".into(),
                attrs: vec![
                    AttrDef {
                        name: "size".into(),
                        kind: AttrKind::Real,
                    },
                    AttrDef {
                        name: "bw".into(),
                        kind: AttrKind::Real,
                    },
                ],
            }],
            vec![],
        )
        .unwrap();
        let mut model = Model::empty(mm);
        model
            .mutate(Change::CreateNode {
                id: "n1".into(),
                ty: "T".into(),
                attrs: BTreeMap::from([
                    ("size".to_string(), AttrValue::Real(100.0)),
                    ("bw".to_string(), AttrValue::Real(50.0)),
                ]),
            })
            .unwrap();
        let binding = BTreeMap::from([
            ("data".to_string(), "n1".to_string()),
            ("link".to_string(), "n1".to_string()),
        ]);
        (model, binding)
    }

    #[test]
    fn constant_evaluates_to_itself() {
        let (model, binding) = fixture();
        let e = Expr::Real(3.5);
        assert_eq!(e.eval_f64(&model, &binding, None).unwrap(), 3.5);
    }

    #[test]
    fn attribute_division() {
        let (model, binding) = fixture();
        let e = Expr::Bin {
            op: BinOp::Div,
            lhs: Box::new(Expr::Attr {
                var: "data".into(),
                attr: "size".into(),
            }),
            rhs: Box::new(Expr::Attr {
                var: "link".into(),
                attr: "bw".into(),
            }),
        };
        assert_eq!(e.eval_f64(&model, &binding, None).unwrap(), 2.0);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let (mut model, binding) = fixture();
        model
            .mutate(Change::SetAttr {
                id: "n1".into(),
                attr: "bw".into(),
                value: AttrValue::Real(0.0),
            })
            .unwrap();
        let e = Expr::Bin {
            op: BinOp::Div,
            lhs: Box::new(Expr::Real(1.0)),
            rhs: Box::new(Expr::Attr {
                var: "link".into(),
                attr: "bw".into(),
            }),
        };
        assert_eq!(
            e.eval_f64(&model, &binding, None).unwrap_err(),
            EvalError::DivisionByZero
        );
    }

    #[test]
    fn min_of_attrs() {
        let (model, binding) = fixture();
        let e = Expr::Min(
            Box::new(Expr::Attr {
                var: "data".into(),
                attr: "size".into(),
            }),
            Box::new(Expr::Attr {
                var: "link".into(),
                attr: "bw".into(),
            }),
        );
        assert_eq!(e.eval_f64(&model, &binding, None).unwrap(), 50.0);
    }

    #[test]
    fn unbound_var_is_reported() {
        let (model, binding) = fixture();
        let e = Expr::Attr {
            var: "ghost".into(),
            attr: "size".into(),
        };
        assert!(matches!(
            e.eval(&model, &binding, None),
            Err(EvalError::UnboundRef { .. })
        ));
    }

    #[test]
    fn display_round_trips_precedence() {
        let e = Expr::Bin {
            op: BinOp::Mul,
            lhs: Box::new(Expr::Bin {
                op: BinOp::Add,
                lhs: Box::new(Expr::Int(1)),
                rhs: Box::new(Expr::Int(2)),
            }),
            rhs: Box::new(Expr::Int(3)),
        };
        assert_eq!(e.to_string(), "(1 + 2) * 3");
    }

    #[test]
    fn bool_comparison_rejects_ordering() {
        assert!(compare(&AttrValue::Bool(true), CmpOp::Eq, &AttrValue::Bool(true)).unwrap());
        assert!(compare(&AttrValue::Bool(true), CmpOp::Lt, &AttrValue::Bool(false)).is_err());
    }
}
