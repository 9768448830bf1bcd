#!/usr/bin/env python3
"""Solve an MPS file with scipy's HiGHS-backed MILP solver.

Usage: mps_solve.py INPUT.mps[.gz] OUTPUT.sol [TIME_LIMIT_S]

Writes a solution file with a one-line status header followed by
`variable-name value` lines, the format the library's external-solver
bridge parses.
"""

import gzip
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import lil_matrix

INF = float("inf")


def read_text(path):
    if path.endswith(".gz"):
        with gzip.open(path, "rt") as fh:
            return fh.read()
    with open(path) as fh:
        return fh.read()


def parse_mps(text):
    section = None
    maximize = False
    obj_row = None
    rows = []  # (name, sense)
    row_index = {}
    cols = {}  # name -> list[(row, coef)]; obj coefficient under key None
    col_order = []
    integer_cols = set()
    rhs = {}
    obj_constant = 0.0
    bounds = {}  # name -> [lo, up]
    in_integer_block = False
    pending_objsense = False

    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        head = raw[:1] != " "
        tokens = raw.split()
        if head:
            section = tokens[0]
            pending_objsense = section == "OBJSENSE"
            if section == "OBJSENSE" and len(tokens) > 1:
                maximize = tokens[1].upper().startswith("MAX")
                pending_objsense = False
            continue
        if pending_objsense:
            maximize = tokens[0].upper().startswith("MAX")
            pending_objsense = False
            continue
        if section == "ROWS":
            sense, name = tokens[0], tokens[1]
            if sense == "N":
                if obj_row is None:
                    obj_row = name
                continue
            row_index[name] = len(rows)
            rows.append((name, sense))
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1].startswith("'MARKER'"):
                in_integer_block = tokens[2].strip("'") == "INTORG"
                continue
            if "'MARKER'" in raw:
                in_integer_block = "'INTORG'" in raw
                continue
            name = tokens[0]
            if name not in cols:
                cols[name] = []
                col_order.append(name)
                if in_integer_block:
                    integer_cols.add(name)
            pairs = tokens[1:]
            for i in range(0, len(pairs) - 1, 2):
                row, coef = pairs[i], float(pairs[i + 1])
                if row == obj_row:
                    cols[name].append((None, coef))
                else:
                    cols[name].append((row_index[row], coef))
        elif section == "RHS":
            pairs = tokens[1:]
            for i in range(0, len(pairs) - 1, 2):
                row, val = pairs[i], float(pairs[i + 1])
                if row == obj_row:
                    obj_constant = -val
                else:
                    rhs[row_index[row]] = val
        elif section == "BOUNDS":
            kind, name = tokens[0], tokens[2]
            bnd = bounds.setdefault(name, [0.0, INF])
            if kind == "BV":
                bounds[name] = [0.0, 1.0]
                integer_cols.add(name)
            elif kind == "LO":
                bnd[0] = float(tokens[3])
            elif kind == "UP":
                bnd[1] = float(tokens[3])
            elif kind == "FX":
                v = float(tokens[3])
                bounds[name] = [v, v]
            elif kind == "FR":
                bounds[name] = [-INF, INF]
            elif kind == "MI":
                bnd[0] = -INF
            elif kind == "PL":
                bnd[1] = INF

    n = len(col_order)
    m = len(rows)
    c = np.zeros(n)
    a = lil_matrix((m, n))
    for j, name in enumerate(col_order):
        for row, coef in cols[name]:
            if row is None:
                c[j] = coef
            else:
                a[row, j] = coef
    lo = np.full(m, -INF)
    hi = np.full(m, INF)
    for i, (_, sense) in enumerate(rows):
        b = rhs.get(i, 0.0)
        if sense == "L":
            hi[i] = b
        elif sense == "G":
            lo[i] = b
        else:
            lo[i] = hi[i] = b
    xlo = np.zeros(n)
    xhi = np.full(n, INF)
    for j, name in enumerate(col_order):
        if name in bounds:
            xlo[j], xhi[j] = bounds[name]
    integrality = np.array([1 if name in integer_cols else 0 for name in col_order])
    return {
        "maximize": maximize,
        "c": c,
        "constant": obj_constant,
        "A": a.tocsr(),
        "row_lo": lo,
        "row_hi": hi,
        "xlo": xlo,
        "xhi": xhi,
        "integrality": integrality,
        "names": col_order,
    }


def main():
    if len(sys.argv) < 3:
        sys.exit(__doc__)
    mps_path, sol_path = sys.argv[1], sys.argv[2]
    time_limit = float(sys.argv[3]) if len(sys.argv) > 3 else 300.0

    p = parse_mps(read_text(mps_path))
    c = -p["c"] if p["maximize"] else p["c"]
    kwargs = {
        "integrality": p["integrality"],
        "bounds": Bounds(p["xlo"], p["xhi"]),
        "options": {"time_limit": time_limit, "mip_rel_gap": 1e-9},
    }
    if p["A"].shape[0] > 0:
        kwargs["constraints"] = LinearConstraint(p["A"], p["row_lo"], p["row_hi"])
    res = milp(c, **kwargs)

    with open(sol_path, "w") as out:
        if res.status == 2:
            out.write("Infeasible\n")
            return
        if res.status == 3:
            out.write("Unbounded\n")
            return
        if res.x is None:
            out.write("Stopped without a solution\n")
            return
        obj = float(np.dot(p["c"], res.x)) + p["constant"]
        if res.status == 1:
            out.write("Stopped on time limit - objective value %.12g\n" % obj)
        else:
            out.write("Optimal - objective value %.12g\n" % obj)
        for name, val in zip(p["names"], res.x):
            out.write("%s %.12g\n" % (name, float(val)))


if __name__ == "__main__":
    main()
