//! Depth-first branch-and-bound over the LP relaxation.
//!
//! Branching picks the most fractional variable (ties: lexicographically
//! smallest VarId). On minimization the x=0 child is explored first, on
//! maximization x=1 first, and a node is pruned once its relaxation bound
//! cannot improve on the incumbent by more than 1e-9 — together this pins
//! the returned optimum deterministically.

use super::simplex::solve_relaxation;
use super::{IlpError, IlpProblem, IlpSolution, Sense, SolveStatus};

const PRUNE_TOL: f64 = 1e-9;
const INT_TOL: f64 = 1e-7;
const CHECK_TOL: f64 = 1e-6;

pub fn solve_ilp(problem: &IlpProblem) -> Result<IlpSolution, IlpError> {
    let n = problem.num_vars();
    let minimize = problem.sense == Sense::Minimize;
    // Work in minimization space; `better(a, b)` = a improves on b.
    let norm = |obj: f64| if minimize { obj } else { -obj };

    let mut incumbent: Option<(Vec<bool>, f64)> = None;
    let mut node_count: u64 = 0;
    let mut unbounded = false;
    let mut stack: Vec<Vec<Option<bool>>> = vec![vec![None; n]];

    while let Some(fixed) = stack.pop() {
        let lp = solve_relaxation(problem, &fixed)?;
        node_count += 1;
        match lp.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                unbounded = true;
                break;
            }
            SolveStatus::Optimal => {}
        }
        if let Some((_, inc)) = &incumbent {
            if norm(lp.objective_value) >= inc - PRUNE_TOL {
                continue;
            }
        }

        // Most fractional free variable; ties toward the smallest VarId.
        let mut branch_var: Option<(f64, &super::VarId, usize)> = None;
        for j in 0..n {
            if fixed[j].is_some() {
                continue;
            }
            let x = lp.values[j];
            let dist = (x - 0.5).abs();
            if dist >= 0.5 - INT_TOL {
                continue; // integral within tolerance
            }
            let id = problem.var_id(j);
            let replace = match &branch_var {
                None => true,
                Some((best, best_id, _)) => {
                    dist < best - 1e-12 || ((dist - best).abs() <= 1e-12 && id < *best_id)
                }
            };
            if replace {
                branch_var = Some((dist, id, j));
            }
        }

        match branch_var {
            None => {
                // Integral relaxation: round, verify exactly on the 0/1
                // vector, and take as incumbent if it improves.
                let candidate: Vec<bool> = (0..n)
                    .map(|j| fixed[j].unwrap_or_else(|| lp.values[j] > 0.5))
                    .collect();
                let as_f64: Vec<f64> = candidate
                    .iter()
                    .map(|&b| if b { 1.0 } else { 0.0 })
                    .collect();
                if !problem.feasible(&as_f64, CHECK_TOL) {
                    continue;
                }
                let obj = problem.objective_value(&as_f64);
                let improves = match &incumbent {
                    None => true,
                    Some((_, inc)) => norm(obj) < inc - PRUNE_TOL,
                };
                if improves {
                    incumbent = Some((candidate, norm(obj)));
                }
            }
            Some((_, _, j)) => {
                let first = !minimize; // explore x=0 first on min, x=1 first on max
                let mut child_a = fixed.clone();
                child_a[j] = Some(first);
                let mut child_b = fixed;
                child_b[j] = Some(!first);
                stack.push(child_b);
                stack.push(child_a);
            }
        }
    }

    if unbounded {
        return Ok(IlpSolution {
            status: SolveStatus::Unbounded,
            values: vec![],
            objective_value: 0.0,
            node_count,
        });
    }
    match incumbent {
        Some((values, norm_obj)) => Ok(IlpSolution {
            status: SolveStatus::Optimal,
            objective_value: if minimize { norm_obj } else { -norm_obj },
            values,
            node_count,
        }),
        None => Ok(IlpSolution {
            status: SolveStatus::Infeasible,
            values: vec![],
            objective_value: 0.0,
            node_count,
        }),
    }
}
