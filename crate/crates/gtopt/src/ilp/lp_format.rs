//! CPLEX LP format writer.
//!
//! Emitted sections, in order: `Minimize`/`Maximize`, `Subject To`, `Bounds`,
//! `Binaries`, `End`. Variable names are sanitized (anything outside
//! `[A-Za-z0-9_]` becomes `_`, a leading digit or dot gets a `_` prefix);
//! a collision after sanitization is an error rather than a silent merge.
//! Output ordering follows declaration order throughout, so equal problems
//! produce byte-equal files.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{IlpError, IlpProblem, Sense};

pub fn write_lp(problem: &IlpProblem) -> Result<String, IlpError> {
    let names = sanitized_names(problem)?;

    let mut out = String::new();
    out.push_str(match problem.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    let obj_terms: Vec<(usize, f64)> = problem
        .objective()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(j, &c)| (j, c))
        .collect();
    write_terms(&mut out, &obj_terms, &names);
    out.push('\n');

    out.push_str("Subject To\n");
    let mut row_names: BTreeMap<String, String> = BTreeMap::new();
    for (i, c) in problem.constraints().iter().enumerate() {
        let raw = c.name.clone().unwrap_or_else(|| format!("c{}", i + 1));
        let sanitized = sanitize(&raw);
        if let Some(prev) = row_names.insert(sanitized.clone(), raw.clone()) {
            if prev != raw {
                return Err(IlpError::NameCollision {
                    a: prev,
                    b: raw,
                    sanitized,
                });
            }
        }
        write!(out, " {sanitized}:").unwrap();
        write_terms(&mut out, &c.terms, &names);
        writeln!(out, " {} {}", c.sense, fmt_num(c.rhs)).unwrap();
    }

    if problem.num_vars() > 0 {
        out.push_str("Bounds\n");
        for name in &names {
            writeln!(out, " 0 <= {name} <= 1").unwrap();
        }
        out.push_str("Binaries\n ");
        out.push_str(&names.join(" "));
        out.push('\n');
    }
    out.push_str("End\n");
    Ok(out)
}

fn sanitized_names(problem: &IlpProblem) -> Result<Vec<String>, IlpError> {
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    let mut names = Vec::with_capacity(problem.num_vars());
    for id in problem.vars() {
        let name = sanitize(&id.0);
        if let Some(prev) = seen.insert(name.clone(), id.0.clone()) {
            return Err(IlpError::NameCollision {
                a: prev,
                b: id.0.clone(),
                sanitized: name,
            });
        }
        names.push(name);
    }
    Ok(names)
}

fn sanitize(raw: &str) -> String {
    let mut s: String = raw
        .chars()
        .map(|ch| {
            if ch.is_ascii_alphanumeric() || ch == '_' {
                ch
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s.insert(0, '_');
    }
    s
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    if terms.iter().all(|&(_, c)| c == 0.0) {
        out.push_str(" 0");
        return;
    }
    let mut first = true;
    for &(j, coeff) in terms {
        if coeff == 0.0 {
            continue;
        }
        let mag = coeff.abs();
        if first {
            if coeff < 0.0 {
                out.push_str(" -");
            }
            first = false;
        } else if coeff < 0.0 {
            out.push_str(" -");
        } else {
            out.push_str(" +");
        }
        if mag != 1.0 {
            write!(out, " {}", fmt_num(mag)).unwrap();
        }
        write!(out, " {}", names[j]).unwrap();
    }
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::super::{IlpProblem, RowSense, Sense, VarId};
    use super::*;

    #[test]
    fn role_toy_has_pinned_layout() {
        let mut p = IlpProblem::new(Sense::Minimize);
        let rc = p.add_var(VarId::from("rc")).unwrap();
        let c = p.add_var(VarId::from("c")).unwrap();
        let pp = p.add_var(VarId::from("p")).unwrap();
        p.add_objective_term(rc, 5.0).unwrap();
        p.add_objective_term(c, 2.0).unwrap();
        p.add_objective_term(pp, 1.0).unwrap();
        p.add_constraint(
            None,
            vec![(rc, 1.0), (c, 1.0), (pp, 1.0)],
            RowSense::Eq,
            1.0,
        )
        .unwrap();
        let text = write_lp(&p).unwrap();
        let expected = "Minimize\n obj: 5 rc + 2 c + p\nSubject To\n c1: rc + c + p = 1\nBounds\n 0 <= rc <= 1\n 0 <= c <= 1\n 0 <= p <= 1\nBinaries\n rc c p\nEnd\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn empty_problem_layout() {
        let p = IlpProblem::new(Sense::Minimize);
        assert_eq!(
            write_lp(&p).unwrap(),
            "Minimize\n obj: 0\nSubject To\nEnd\n"
        );
    }

    #[test]
    fn names_are_sanitized_deterministically() {
        let mut p = IlpProblem::new(Sense::Maximize);
        let v = p.add_var(VarId::from("direct::m{c=c1}")).unwrap();
        p.add_objective_term(v, 1.0).unwrap();
        let text = write_lp(&p).unwrap();
        assert!(text.contains("direct__m_c_c1_"));
    }

    #[test]
    fn sanitization_collisions_are_rejected() {
        let mut p = IlpProblem::new(Sense::Minimize);
        p.add_var(VarId::from("a:b")).unwrap();
        p.add_var(VarId::from("a_b")).unwrap();
        assert!(matches!(write_lp(&p), Err(IlpError::NameCollision { .. })));
    }

    #[test]
    fn negative_coefficients_format_cleanly() {
        let mut p = IlpProblem::new(Sense::Minimize);
        let a = p.add_var(VarId::from("a")).unwrap();
        let b = p.add_var(VarId::from("b")).unwrap();
        p.add_objective_term(a, -1.0).unwrap();
        p.add_objective_term(b, 2.5).unwrap();
        p.add_constraint(None, vec![(a, -3.0), (b, 1.0)], RowSense::Le, -2.0)
            .unwrap();
        let text = write_lp(&p).unwrap();
        assert!(text.contains(" obj: - a + 2.5 b\n"));
        assert!(text.contains(" c1: - 3 a + b <= -2\n"));
    }
}
