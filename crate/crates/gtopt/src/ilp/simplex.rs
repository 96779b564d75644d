//! Dense two-phase primal simplex over the [0,1] box.
//!
//! The relaxation treats every binary variable as continuous in [0,1]; upper
//! bounds become explicit rows. Bland's rule picks entering and leaving
//! variables, which rules out cycling at the cost of some extra pivots —
//! problems here are match-selection sized, so exactness wins over speed.

use super::{IlpError, IlpProblem, LpSolution, SolveStatus};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

/// Solve the continuous relaxation of the full problem.
pub fn solve_lp(problem: &IlpProblem) -> Result<LpSolution, IlpError> {
    solve_relaxation(problem, &vec![None; problem.num_vars()])
}

/// Solve the relaxation with some variables fixed to 0/1 (branch-and-bound
/// nodes). The reported objective is for the full problem, fixed part
/// included, in the problem's own sense.
pub(super) fn solve_relaxation(
    problem: &IlpProblem,
    fixed: &[Option<bool>],
) -> Result<LpSolution, IlpError> {
    let minimize = problem.sense == super::Sense::Minimize;
    let n = problem.num_vars();

    let free: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let col_of: Vec<Option<usize>> = {
        let mut v = vec![None; n];
        for (col, &j) in free.iter().enumerate() {
            v[j] = Some(col);
        }
        v
    };

    // Constraint rows with fixed variables substituted into the rhs.
    let mut rows: Vec<(Vec<(usize, f64)>, super::RowSense, f64)> = Vec::new();
    for c in problem.constraints() {
        let mut terms = Vec::new();
        let mut rhs = c.rhs;
        for &(j, coeff) in &c.terms {
            match col_of[j] {
                Some(col) => terms.push((col, coeff)),
                None => rhs -= coeff * if fixed[j] == Some(true) { 1.0 } else { 0.0 },
            }
        }
        if terms.is_empty() {
            let ok = match c.sense {
                super::RowSense::Le => 0.0 <= rhs + FEAS_TOL,
                super::RowSense::Eq => rhs.abs() <= FEAS_TOL,
                super::RowSense::Ge => 0.0 >= rhs - FEAS_TOL,
            };
            if !ok {
                return Ok(LpSolution {
                    status: SolveStatus::Infeasible,
                    values: vec![],
                    objective_value: 0.0,
                });
            }
            continue;
        }
        rows.push((terms, c.sense, rhs));
    }
    // Box upper bounds for the free variables.
    for col in 0..free.len() {
        rows.push((vec![(col, 1.0)], super::RowSense::Le, 1.0));
    }

    // Objective in minimization form, plus the constant from fixed variables.
    let sign = if minimize { 1.0 } else { -1.0 };
    let cost: Vec<f64> = free
        .iter()
        .map(|&j| sign * problem.objective()[j])
        .collect();
    let fixed_obj: f64 = (0..n)
        .filter(|&j| fixed[j] == Some(true))
        .map(|j| problem.objective()[j])
        .sum();

    match simplex_min(&cost, &rows)? {
        SimplexOutcome::Infeasible => Ok(LpSolution {
            status: SolveStatus::Infeasible,
            values: vec![],
            objective_value: 0.0,
        }),
        SimplexOutcome::Unbounded => Ok(LpSolution {
            status: SolveStatus::Unbounded,
            values: vec![],
            objective_value: 0.0,
        }),
        SimplexOutcome::Optimal { x, obj } => {
            let mut values = vec![0.0; n];
            for (col, &j) in free.iter().enumerate() {
                values[j] = x[col].clamp(0.0, 1.0);
            }
            for j in 0..n {
                if fixed[j] == Some(true) {
                    values[j] = 1.0;
                }
            }
            let objective_value = sign * obj + fixed_obj;
            Ok(LpSolution {
                status: SolveStatus::Optimal,
                values,
                objective_value,
            })
        }
    }
}

enum SimplexOutcome {
    Optimal { x: Vec<f64>, obj: f64 },
    Infeasible,
    Unbounded,
}

/// Minimize `cost • x` subject to the rows, x >= 0. Rows may have any sense
/// and any rhs sign; slack, surplus, and artificial columns are appended
/// here. Returns structural values only.
fn simplex_min(
    cost: &[f64],
    rows: &[(Vec<(usize, f64)>, super::RowSense, f64)],
) -> Result<SimplexOutcome, IlpError> {
    let n = cost.len();
    let m = rows.len();
    if m == 0 {
        // Box rows always exist when there are free variables; no rows means
        // no variables.
        return Ok(SimplexOutcome::Optimal {
            x: vec![],
            obj: 0.0,
        });
    }

    // Count extra columns after normalizing each row to rhs >= 0.
    let mut num_slack = 0;
    let mut num_art = 0;
    for (_, sense, rhs) in rows {
        let flipped = *rhs < 0.0;
        let sense = effective_sense(*sense, flipped);
        match sense {
            super::RowSense::Le => num_slack += 1,
            super::RowSense::Ge => {
                num_slack += 1;
                num_art += 1;
            }
            super::RowSense::Eq => num_art += 1,
        }
    }
    let total = n + num_slack + num_art;
    let art_start = n + num_slack;

    let mut a = vec![vec![0.0f64; total]; m];
    let mut b = vec![0.0f64; m];
    let mut basis = vec![0usize; m];
    let mut next_slack = n;
    let mut next_art = art_start;

    for (i, (terms, sense, rhs)) in rows.iter().enumerate() {
        let flipped = *rhs < 0.0;
        let scale = if flipped { -1.0 } else { 1.0 };
        for &(j, coeff) in terms {
            a[i][j] += scale * coeff;
        }
        b[i] = scale * rhs;
        match effective_sense(*sense, flipped) {
            super::RowSense::Le => {
                a[i][next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            super::RowSense::Ge => {
                a[i][next_slack] = -1.0;
                next_slack += 1;
                a[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            super::RowSense::Eq => {
                a[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    // Phase 1: minimize the sum of artificials.
    if num_art > 0 {
        let mut phase1 = vec![0.0f64; total];
        for j in art_start..total {
            phase1[j] = 1.0;
        }
        let outcome = run_simplex(&mut a, &mut b, &mut basis, &phase1, total)?;
        let obj = match outcome {
            RunOutcome::Optimal { obj } => obj,
            RunOutcome::Unbounded => unreachable!("phase-1 objective is bounded below by zero"),
        };
        if obj > FEAS_TOL {
            return Ok(SimplexOutcome::Infeasible);
        }
        drive_out_artificials(&mut a, &mut b, &mut basis, art_start, total);
    }

    // Phase 2: original cost, artificial columns barred from entering.
    let mut phase2 = vec![0.0f64; total];
    phase2[..n].copy_from_slice(cost);
    let bar_from = if num_art > 0 { art_start } else { total };
    let outcome = run_simplex_barred(&mut a, &mut b, &mut basis, &phase2, bar_from)?;
    match outcome {
        RunOutcome::Unbounded => Ok(SimplexOutcome::Unbounded),
        RunOutcome::Optimal { obj } => {
            let mut x = vec![0.0f64; n];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < n {
                    x[bv] = b[i];
                }
            }
            Ok(SimplexOutcome::Optimal { x, obj })
        }
    }
}

fn effective_sense(sense: super::RowSense, flipped: bool) -> super::RowSense {
    if !flipped {
        return sense;
    }
    match sense {
        super::RowSense::Le => super::RowSense::Ge,
        super::RowSense::Ge => super::RowSense::Le,
        super::RowSense::Eq => super::RowSense::Eq,
    }
}

enum RunOutcome {
    Optimal { obj: f64 },
    Unbounded,
}

fn run_simplex(
    a: &mut [Vec<f64>],
    b: &mut [f64],
    basis: &mut [usize],
    cost: &[f64],
    num_cols: usize,
) -> Result<RunOutcome, IlpError> {
    run_simplex_barred(a, b, basis, cost, num_cols)
}

/// Bland-rule simplex iterations. Columns at index >= `bar_from` may stay in
/// the basis but never enter it.
fn run_simplex_barred(
    a: &mut [Vec<f64>],
    b: &mut [f64],
    basis: &mut [usize],
    cost: &[f64],
    bar_from: usize,
) -> Result<RunOutcome, IlpError> {
    let m = a.len();
    let total = a[0].len();

    // Reduced costs from scratch: c_j - c_B * column_j, and objective c_B * b.
    let mut red = cost.to_vec();
    let mut obj = 0.0f64;
    for i in 0..m {
        let cb = cost[basis[i]];
        if cb != 0.0 {
            obj += cb * b[i];
            for j in 0..total {
                red[j] -= cb * a[i][j];
            }
        }
    }

    let max_iter = 10_000 + 200 * (m + total) as u64;
    for _ in 0..max_iter {
        // Bland: smallest-index column with a negative reduced cost.
        let entering = (0..total.min(bar_from)).find(|&j| red[j] < -COST_TOL);
        let Some(q) = entering else {
            return Ok(RunOutcome::Optimal { obj });
        };

        // Ratio test; ties broken toward the smallest basic variable index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if a[i][q] > PIVOT_TOL {
                let ratio = b[i] / a[i][q];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_TOL
                            || ((ratio - lr).abs() <= PIVOT_TOL && basis[i] < basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((p, _)) = leave else {
            return Ok(RunOutcome::Unbounded);
        };

        pivot(a, b, basis, &mut red, &mut obj, p, q);
    }
    Err(IlpError::NumericalFailure)
}

fn pivot(
    a: &mut [Vec<f64>],
    b: &mut [f64],
    basis: &mut [usize],
    red: &mut [f64],
    obj: &mut f64,
    p: usize,
    q: usize,
) {
    let m = a.len();
    let total = a[0].len();
    let inv = 1.0 / a[p][q];
    for j in 0..total {
        a[p][j] *= inv;
    }
    b[p] *= inv;
    a[p][q] = 1.0; // exactness against roundoff

    for i in 0..m {
        if i != p && a[i][q].abs() > 0.0 {
            let f = a[i][q];
            for j in 0..total {
                a[i][j] -= f * a[p][j];
            }
            b[i] -= f * b[p];
            a[i][q] = 0.0;
            if b[i].abs() < 1e-12 {
                b[i] = 0.0;
            }
        }
    }
    let f = red[q];
    if f != 0.0 {
        for j in 0..total {
            red[j] -= f * a[p][j];
        }
        *obj += f * b[p];
        red[q] = 0.0;
    }
    basis[p] = q;
}

/// After phase 1, pivot basic artificials out on any usable structural or
/// slack column; rows that cannot be pivoted are redundant and are blanked.
fn drive_out_artificials(
    a: &mut Vec<Vec<f64>>,
    b: &mut Vec<f64>,
    basis: &mut Vec<usize>,
    art_start: usize,
    total: usize,
) {
    let mut i = 0;
    while i < a.len() {
        if basis[i] >= art_start {
            let q = (0..art_start).find(|&j| a[i][j].abs() > PIVOT_TOL);
            match q {
                Some(q) => {
                    // local pivot without a cost row
                    let inv = 1.0 / a[i][q];
                    for j in 0..total {
                        a[i][j] *= inv;
                    }
                    b[i] *= inv;
                    a[i][q] = 1.0;
                    for r in 0..a.len() {
                        if r != i && a[r][q].abs() > 0.0 {
                            let f = a[r][q];
                            for j in 0..total {
                                a[r][j] -= f * a[i][j];
                            }
                            b[r] -= f * b[i];
                            a[r][q] = 0.0;
                        }
                    }
                    basis[i] = q;
                    i += 1;
                }
                None => {
                    // Redundant row: remove it entirely.
                    a.remove(i);
                    b.remove(i);
                    basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{IlpProblem, RowSense, Sense, SolveStatus, VarId};
    use super::*;

    #[test]
    fn unconstrained_maximize_hits_upper_bound() {
        let mut p = IlpProblem::new(Sense::Maximize);
        let x = p.add_var(VarId::from("x")).unwrap();
        p.add_objective_term(x, 1.0).unwrap();
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.values[x] - 1.0).abs() < 1e-9);
        assert!((sol.objective_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn covering_pair_picks_cheaper_vertex() {
        // min 2a + 3b  s.t.  a + b >= 1, both in [0,1]:
        // the active facet has vertices (1,0) cost 2 and (0,1) cost 3.
        let mut p = IlpProblem::new(Sense::Minimize);
        let a = p.add_var(VarId::from("a")).unwrap();
        let b = p.add_var(VarId::from("b")).unwrap();
        p.add_objective_term(a, 2.0).unwrap();
        p.add_objective_term(b, 3.0).unwrap();
        p.add_constraint(None, vec![(a, 1.0), (b, 1.0)], RowSense::Ge, 1.0)
            .unwrap();
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 2.0).abs() < 1e-9);
        assert!((sol.values[a] - 1.0).abs() < 1e-9);
        assert!(sol.values[b].abs() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut p = IlpProblem::new(Sense::Minimize);
        let x = p.add_var(VarId::from("x")).unwrap();
        p.add_constraint(None, vec![(x, 1.0)], RowSense::Le, 0.4)
            .unwrap();
        p.add_constraint(None, vec![(x, 1.0)], RowSense::Ge, 0.6)
            .unwrap();
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn fractional_vertex_is_found() {
        // max x + y s.t. 2x + y <= 1, x + 2y <= 1 -> x = y = 1/3.
        let mut p = IlpProblem::new(Sense::Maximize);
        let x = p.add_var(VarId::from("x")).unwrap();
        let y = p.add_var(VarId::from("y")).unwrap();
        p.add_objective_term(x, 1.0).unwrap();
        p.add_objective_term(y, 1.0).unwrap();
        p.add_constraint(None, vec![(x, 2.0), (y, 1.0)], RowSense::Le, 1.0)
            .unwrap();
        p.add_constraint(None, vec![(x, 1.0), (y, 2.0)], RowSense::Le, 1.0)
            .unwrap();
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.values[x] - 1.0 / 3.0).abs() < 1e-9);
        assert!((sol.values[y] - 1.0 / 3.0).abs() < 1e-9);
        assert!((sol.objective_value - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rows_are_normalized() {
        // -x <= -0.25  <=>  x >= 0.25
        let mut p = IlpProblem::new(Sense::Minimize);
        let x = p.add_var(VarId::from("x")).unwrap();
        p.add_objective_term(x, 1.0).unwrap();
        p.add_constraint(None, vec![(x, -1.0)], RowSense::Le, -0.25)
            .unwrap();
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.values[x] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn equality_row_is_honored() {
        let mut p = IlpProblem::new(Sense::Minimize);
        let a = p.add_var(VarId::from("a")).unwrap();
        let b = p.add_var(VarId::from("b")).unwrap();
        p.add_objective_term(a, 1.0).unwrap();
        p.add_constraint(None, vec![(a, 1.0), (b, 1.0)], RowSense::Eq, 1.0)
            .unwrap();
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.values[a] + sol.values[b] - 1.0).abs() < 1e-7);
        assert!(sol.objective_value.abs() < 1e-9);
    }
}
