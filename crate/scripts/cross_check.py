#!/usr/bin/env python3
"""Cross-check exported LP files against an independent reference solver.

For every ``problem_*.lp`` in the given directory, parse the LP text, solve
it with scipy's ``milp`` (HiGHS), and compare status and objective with the
matching ``expected_*.json`` sidecar written by the exporter.

Usage: cross_check.py <dir> [--tol 1e-6]
"""

import glob
import json
import os
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp


def parse_terms(tokens):
    """Parse `5 rc + 2 c + p` / `- 3 a + b` into {name: coeff}."""
    coeffs = {}
    sign = 1.0
    pending = None
    for tok in tokens:
        if tok == "+":
            sign = 1.0
            pending = None
        elif tok == "-":
            sign = -1.0
            pending = None
        else:
            try:
                pending = float(tok)
            except ValueError:
                coeff = sign * (pending if pending is not None else 1.0)
                coeffs[tok] = coeffs.get(tok, 0.0) + coeff
                sign = 1.0
                pending = None
    return coeffs


def parse_lp(text):
    sense = None
    objective = {}
    rows = []  # (coeffs, op, rhs)
    variables = []
    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line in ("Minimize", "Maximize"):
            sense = line
            section = "objective"
            continue
        if line == "Subject To":
            section = "rows"
            continue
        if line == "Bounds":
            section = "bounds"
            continue
        if line == "Binaries":
            section = "binaries"
            continue
        if line == "End":
            break
        if section == "objective":
            _, _, body = line.partition(":")
            objective = parse_terms(body.split())
        elif section == "rows":
            _, _, body = line.partition(":")
            for op in ("<=", ">=", "="):
                if f" {op} " in body:
                    lhs, _, rhs = body.rpartition(f" {op} ")
                    rows.append((parse_terms(lhs.split()), op, float(rhs)))
                    break
            else:
                raise ValueError(f"row without operator: {line}")
        elif section == "binaries":
            variables.extend(line.split())
    if sense is None:
        raise ValueError("missing objective sense")
    return sense, objective, rows, variables


def solve(sense, objective, rows, variables):
    n = len(variables)
    index = {v: j for j, v in enumerate(variables)}
    sign = 1.0 if sense == "Minimize" else -1.0
    c = np.zeros(n)
    for name, coeff in objective.items():
        c[index[name]] = sign * coeff

    constraints = []
    if rows:
        a = np.zeros((len(rows), n))
        lb = np.full(len(rows), -np.inf)
        ub = np.full(len(rows), np.inf)
        for r, (coeffs, op, rhs) in enumerate(rows):
            for name, coeff in coeffs.items():
                a[r, index[name]] = coeff
            if op == "<=":
                ub[r] = rhs
            elif op == ">=":
                lb[r] = rhs
            else:
                lb[r] = rhs
                ub[r] = rhs
        constraints = [LinearConstraint(a, lb, ub)]

    res = milp(
        c,
        constraints=constraints,
        integrality=np.ones(n),
        bounds=Bounds(np.zeros(n), np.ones(n)),
    )
    if res.status == 0:
        return "Optimal", sign * res.fun
    if res.status == 2:
        return "Infeasible", None
    raise RuntimeError(f"reference solver status {res.status}: {res.message}")


def main():
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    directory = sys.argv[1]
    tol = 1e-6
    if "--tol" in sys.argv:
        tol = float(sys.argv[sys.argv.index("--tol") + 1])

    files = sorted(glob.glob(os.path.join(directory, "problem_*.lp")))
    if not files:
        print(f"no problem_*.lp files in {directory}")
        return 2

    failures = 0
    for path in files:
        stem = os.path.basename(path)[len("problem_") : -len(".lp")]
        expected_path = os.path.join(directory, f"expected_{stem}.json")
        with open(path) as f:
            sense, objective, rows, variables = parse_lp(f.read())
        with open(expected_path) as f:
            expected = json.load(f)
        status, value = solve(sense, objective, rows, variables)
        if status != expected["status"]:
            print(f"{stem}: reference says {status}, exporter says {expected['status']}")
            failures += 1
            continue
        if status == "Optimal" and abs(value - expected["objective"]) > tol:
            print(f"{stem}: reference optimum {value} != exported {expected['objective']}")
            failures += 1

    total = len(files)
    if failures:
        print(f"FAIL: {failures}/{total} mismatches")
        return 1
    print(f"OK: {total}/{total} problems agree with the reference solver")
    return 0


if __name__ == "__main__":
    sys.exit(main())
