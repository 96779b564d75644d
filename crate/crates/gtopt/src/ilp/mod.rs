//! Bivalent (0/1) integer linear programs.
//!
//! [`IlpProblem`] holds the canonical data: one binary variable per column,
//! an objective sense plus coefficient vector, and a list of linear
//! constraint rows. [`solve_lp`] solves the continuous relaxation over the
//! box `[0,1]^n` with a dense two-phase simplex (Bland's rule, so no cycling);
//! [`solve_ilp`] wraps it in depth-first branch-and-bound with
//! best-incumbent pruning; [`write_lp`] exports CPLEX LP format text.

mod branch;
mod lp_format;
mod simplex;

pub use branch::solve_ilp;
pub use lp_format::write_lp;
pub use simplex::solve_lp;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Stable variable identifier. The pipeline uses `mapping::fingerprint`
/// strings; the solver only requires uniqueness.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub String);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VarId {
    fn from(s: &str) -> Self {
        VarId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Constraint row sense; strict inequalities have no place in an LP row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        })
    }
}

/// One row of the constraint matrix: sparse terms over variable indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub name: Option<String>,
    pub terms: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn lhs_value(&self, assignment: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * assignment[j]).sum()
    }

    pub fn satisfied(&self, assignment: &[f64], tol: f64) -> bool {
        let lhs = self.lhs_value(assignment);
        match self.sense {
            RowSense::Le => lhs <= self.rhs + tol,
            RowSense::Eq => (lhs - self.rhs).abs() <= tol,
            RowSense::Ge => lhs >= self.rhs - tol,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum IlpError {
    #[error("variable `{0}` declared twice")]
    DuplicateVar(VarId),
    #[error("unknown variable `{0}`")]
    UnknownVar(VarId),
    #[error("non-finite coefficient {value} for `{var}`")]
    BadCoefficient { var: VarId, value: f64 },
    #[error("LP name collision: `{a}` and `{b}` both sanitize to `{sanitized}`")]
    NameCollision {
        a: String,
        b: String,
        sanitized: String,
    },
    #[error("simplex iteration limit exceeded")]
    NumericalFailure,
}

/// A 0/1 linear program in canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct IlpProblem {
    vars: Vec<VarId>,
    index: BTreeMap<VarId, usize>,
    pub sense: Sense,
    objective: Vec<f64>,
    constraints: Vec<LinearConstraint>,
}

impl IlpProblem {
    pub fn new(sense: Sense) -> Self {
        IlpProblem {
            vars: Vec::new(),
            index: BTreeMap::new(),
            sense,
            objective: Vec::new(),
            constraints: Vec::new(),
        }
    }

    /// Declare a binary variable with objective coefficient 0.
    pub fn add_var(&mut self, id: VarId) -> Result<usize, IlpError> {
        if self.index.contains_key(&id) {
            return Err(IlpError::DuplicateVar(id));
        }
        let idx = self.vars.len();
        self.index.insert(id.clone(), idx);
        self.vars.push(id);
        self.objective.push(0.0);
        Ok(idx)
    }

    pub fn var_index(&self, id: &VarId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn var_id(&self, idx: usize) -> &VarId {
        &self.vars[idx]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    /// Add to a variable's objective coefficient.
    pub fn add_objective_term(&mut self, idx: usize, coeff: f64) -> Result<(), IlpError> {
        if !coeff.is_finite() {
            return Err(IlpError::BadCoefficient {
                var: self.vars[idx].clone(),
                value: coeff,
            });
        }
        self.objective[idx] += coeff;
        Ok(())
    }

    /// Add a constraint row. Terms on the same variable are merged; the row
    /// keeps variable-index order.
    pub fn add_constraint(
        &mut self,
        name: Option<String>,
        terms: Vec<(usize, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> Result<usize, IlpError> {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (idx, coeff) in terms {
            assert!(idx < self.vars.len(), "term references undeclared variable");
            if !coeff.is_finite() {
                return Err(IlpError::BadCoefficient {
                    var: self.vars[idx].clone(),
                    value: coeff,
                });
            }
            *merged.entry(idx).or_insert(0.0) += coeff;
        }
        if !rhs.is_finite() {
            return Err(IlpError::BadCoefficient {
                var: VarId("rhs".into()),
                value: rhs,
            });
        }
        self.constraints.push(LinearConstraint {
            name,
            terms: merged.into_iter().collect(),
            sense,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn objective_value(&self, assignment: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(assignment)
            .map(|(c, x)| c * x)
            .sum()
    }

    /// Is a 0/1 assignment feasible within `tol`?
    pub fn feasible(&self, assignment: &[f64], tol: f64) -> bool {
        self.constraints
            .iter()
            .all(|c| c.satisfied(assignment, tol))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution of the continuous relaxation.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: SolveStatus,
    /// Values aligned with the problem's variable order; empty unless Optimal.
    pub values: Vec<f64>,
    pub objective_value: f64,
}

impl LpSolution {
    pub fn value_map(&self, problem: &IlpProblem) -> BTreeMap<VarId, f64> {
        problem
            .vars()
            .iter()
            .cloned()
            .zip(self.values.iter().copied())
            .collect()
    }
}

/// Proven-optimal 0/1 solution.
#[derive(Debug, Clone)]
pub struct IlpSolution {
    pub status: SolveStatus,
    /// 0/1 values aligned with the problem's variable order; empty unless Optimal.
    pub values: Vec<bool>,
    pub objective_value: f64,
    /// Branch-and-bound nodes explored (LP relaxations solved).
    pub node_count: u64,
}

impl IlpSolution {
    pub fn value(&self, problem: &IlpProblem, id: &VarId) -> Option<bool> {
        problem
            .var_index(id)
            .and_then(|i| self.values.get(i).copied())
    }

    pub fn value_map(&self, problem: &IlpProblem) -> BTreeMap<VarId, bool> {
        problem
            .vars()
            .iter()
            .cloned()
            .zip(self.values.iter().copied())
            .collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }
}
