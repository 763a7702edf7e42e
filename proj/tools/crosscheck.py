"""Solve a dumped conic problem with cvxpy and print objective and selected duals.

    python3 tools/crosscheck.py problem.txt [--duals pbal:]
"""
import argparse
import math

import cvxpy as cp
import numpy as np


def read_dump(path):
    with open(path) as f:
        lines = [ln.split() for ln in f if ln.strip()]
    assert lines[0][:2] == ["p2pgrid-conic", "1"], "not a problem dump"
    vars_, eqs, les, cones = [], [], [], []
    i = 1
    while i < len(lines):
        tok = lines[i]
        kind = tok[0]
        if kind == "var":
            vars_.append((tok[2], float(tok[3]), float(tok[4]), float(tok[5])))
        elif kind in ("eq", "le"):
            nnz = int(tok[3])
            terms = [(int(tok[4 + 2 * k]), float(tok[5 + 2 * k])) for k in range(nnz)]
            (eqs if kind == "eq" else les).append((tok[1], terms, float(tok[2])))
        elif kind == "cone":
            dim = int(tok[2])
            entries = []
            for e in lines[i + 1:i + 1 + dim]:
                nnz = int(e[2])
                entries.append((float(e[1]), [(int(e[3 + 2 * k]), float(e[4 + 2 * k])) for k in range(nnz)]))
            cones.append((tok[1], entries))
            i += dim
        i += 1
    return vars_, eqs, les, cones


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("dump")
    ap.add_argument("--duals", default="", help="print equality duals whose label starts with this prefix")
    args = ap.parse_args()
    vars_, eqs, les, cones = read_dump(args.dump)
    x = cp.Variable(len(vars_))
    cons = []
    lb = np.array([v[1] for v in vars_])
    ub = np.array([v[2] for v in vars_])
    c = np.array([v[3] for v in vars_])
    fl = np.isfinite(lb)
    fu = np.isfinite(ub)
    if fl.any():
        cons.append(x[np.where(fl)[0]] >= lb[fl])
    if fu.any():
        cons.append(x[np.where(fu)[0]] <= ub[fu])

    def aff(terms, const=0.0):
        return const + sum(cf * x[j] for j, cf in terms) if terms else const + 0 * x[0]

    eq_cons = [aff(t) == rhs for _, t, rhs in eqs]
    cons += eq_cons
    cons += [aff(t) <= rhs for _, t, rhs in les]
    for _, entries in cones:
        head = aff(entries[0][1], entries[0][0])
        rest = cp.hstack([aff(t, k) for k, t in entries[1:]])
        cons.append(cp.SOC(head, rest))
    prob = cp.Problem(cp.Minimize(c @ x), cons)
    prob.solve(solver=cp.CLARABEL)
    print("status", prob.status)
    print("objective %.10f" % prob.value)
    if args.duals:
        for (label, _, _), ec in zip(eqs, eq_cons):
            if label.startswith(args.duals):
                # cvxpy reports -d(obj)/d(rhs) for == constraints written as lhs == rhs
                print(label, "%.8f" % (-float(ec.dual_value)))


if __name__ == "__main__":
    main()
