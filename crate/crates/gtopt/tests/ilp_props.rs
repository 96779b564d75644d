//! Property tests for the solver stack: relaxation bounds, solution
//! feasibility, and writer determinism over random problems.

use proptest::prelude::*;

use gtopt::ilp::{solve_ilp, solve_lp, write_lp, IlpProblem, RowSense, Sense, SolveStatus, VarId};

#[derive(Debug, Clone)]
struct RandomProblem {
    minimize: bool,
    objective: Vec<i32>,
    rows: Vec<(Vec<i32>, u8, i32)>,
}

fn problem_strategy() -> impl Strategy<Value = RandomProblem> {
    (1usize..=8).prop_flat_map(|n| {
        (
            any::<bool>(),
            prop::collection::vec(-8i32..=8, n),
            prop::collection::vec(
                (prop::collection::vec(-5i32..=5, n), 0u8..3, -6i32..=12),
                0..=6,
            ),
        )
            .prop_map(|(minimize, objective, rows)| RandomProblem {
                minimize,
                objective,
                rows,
            })
    })
}

fn build(p: &RandomProblem) -> IlpProblem {
    let sense = if p.minimize {
        Sense::Minimize
    } else {
        Sense::Maximize
    };
    let mut problem = IlpProblem::new(sense);
    for (j, &c) in p.objective.iter().enumerate() {
        let idx = problem.add_var(VarId(format!("v{j}"))).unwrap();
        problem.add_objective_term(idx, f64::from(c)).unwrap();
    }
    for (coeffs, sense, rhs) in &p.rows {
        let terms: Vec<(usize, f64)> = coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| (j, f64::from(c)))
            .collect();
        let sense = match sense {
            0 => RowSense::Le,
            1 => RowSense::Eq,
            _ => RowSense::Ge,
        };
        problem
            .add_constraint(None, terms, sense, f64::from(*rhs))
            .unwrap();
    }
    problem
}

proptest! {
    /// The relaxation bounds the integer optimum from the right side, and
    /// every returned assignment is feasible.
    #[test]
    fn lp_bounds_ilp_and_solutions_are_feasible(p in problem_strategy()) {
        let problem = build(&p);
        let ilp = solve_ilp(&problem).unwrap();
        if ilp.status == SolveStatus::Optimal {
            let values = ilp.as_f64();
            prop_assert!(problem.feasible(&values, 1e-6));
            let lp = solve_lp(&problem).unwrap();
            prop_assert_eq!(lp.status, SolveStatus::Optimal);
            match problem.sense {
                Sense::Minimize => prop_assert!(lp.objective_value <= ilp.objective_value + 1e-9),
                Sense::Maximize => prop_assert!(lp.objective_value >= ilp.objective_value - 1e-9),
            }
        } else {
            // if the 0/1 problem is infeasible the relaxation may be too,
            // but it must never report an optimum below the box
            let lp = solve_lp(&problem).unwrap();
            prop_assert!(lp.status != SolveStatus::Unbounded);
        }
    }

    /// The writer is a pure function of the problem.
    #[test]
    fn lp_writer_is_deterministic(p in problem_strategy()) {
        let a = write_lp(&build(&p)).unwrap();
        let b = write_lp(&build(&p)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.ends_with("End\n"));
    }
}
