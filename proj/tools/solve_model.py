#!/usr/bin/env python3
"""LP/MILP solve driver backed by SciPy's HiGHS interface.

Modes:
  --serve              JSON-lines protocol on stdin/stdout (persistent server).
  --json REQ --out F   one-shot: read a request JSON file, write response JSON.
  --mps M --out F      read a (free-format) MPS file, write a solution file.

Request format (all senses are minimize; the caller pre-negates for max):
  {"op": "solve", "model": MODEL, "options": OPTS}
  {"op": "solve_batch", "models": [MODEL...], "options": OPTS}
  {"op": "ping"} / {"op": "quit"}

MODEL = {"nv": int, "lb": [..], "ub": [..], "integer": [var indices],
         "obj": [..dense..],
         "row_lo": [..], "row_hi": [..],
         "a_start": [..], "a_col": [..], "a_val": [..]}   # CSR
OPTS  = {"mip_gap": float, "time_limit": float (0 = none), "want_duals": bool}

Values with |x| >= 1e29 denote +/- infinity.

Duals follow the convention dual[r] = d(objective)/d(row level), i.e. the
sensitivity to shifting both row bounds together; reported for pure LPs only.
"""

import argparse
import json
import sys
import warnings

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

# scipy forwards unrecognized solver options to HiGHS verbatim and warns;
# we rely on that for the tight feasibility tolerances below
warnings.filterwarnings("ignore", message="Unrecognized options detected")

INF_SENTINEL = 1e29

_STATUS = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded", 4: "error"}


def _to_inf(arr):
    a = np.asarray(arr, dtype=float)
    a = np.where(a >= INF_SENTINEL, np.inf, a)
    a = np.where(a <= -INF_SENTINEL, -np.inf, a)
    return a


def _from_inf(x):
    if x == np.inf:
        return INF_SENTINEL
    if x == -np.inf:
        return -INF_SENTINEL
    return float(x)


def _solve_lp(n, obj, lb, ub, A, row_lo, row_hi, opts):
    """Pure LP through linprog(method='highs'); returns (result_dict)."""
    m = A.shape[0] if A is not None else 0
    a_eq_rows, a_ub_rows = [], []  # (row index, sign, bound); sign applies to the row
    for r in range(m):
        lo, hi = row_lo[r], row_hi[r]
        if lo == hi:
            a_eq_rows.append(r)
        else:
            if np.isfinite(hi):
                a_ub_rows.append((r, 1.0, hi))
            if np.isfinite(lo):
                a_ub_rows.append((r, -1.0, -lo))

    A_eq = b_eq = A_ub = b_ub = None
    if a_eq_rows:
        A_eq = A[a_eq_rows, :]
        b_eq = row_lo[a_eq_rows]
    if a_ub_rows:
        idx = [r for r, _, _ in a_ub_rows]
        sgn = np.array([s for _, s, _ in a_ub_rows])
        A_ub = sp.diags(sgn) @ A[idx, :]
        b_ub = np.array([b for _, _, b in a_ub_rows])

    lp_opts = {
        "presolve": True,
        "primal_feasibility_tolerance": 1e-9,
        "dual_feasibility_tolerance": 1e-9,
    }
    tl = opts.get("time_limit", 0) or 0
    if tl > 0:
        lp_opts["time_limit"] = tl

    res = linprog(
        obj,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=np.column_stack([lb, ub]),
        method="highs",
        options=lp_opts,
    )
    out = {
        "status": _STATUS.get(res.status, "error"),
        "objective": float(res.fun) if res.fun is not None else 0.0,
        "x": [float(v) for v in res.x] if res.x is not None else None,
        "gap": 0.0,
        "message": str(res.message),
        "duals": None,
    }
    if res.status == 0 and opts.get("want_duals", False):
        duals = np.zeros(m)
        if a_eq_rows:
            duals[a_eq_rows] = res.eqlin.marginals
        if a_ub_rows:
            for k, (r, s, _) in enumerate(a_ub_rows):
                # marginal is dObj/d(b_ub); map back to dObj/d(row level)
                duals[r] += s * res.ineqlin.marginals[k]
        out["duals"] = [float(v) for v in duals]
    return out


def _solve_milp(n, obj, lb, ub, integrality, A, row_lo, row_hi, opts):
    mip_opts = {
        "presolve": True,
        "primal_feasibility_tolerance": 1e-9,
        "dual_feasibility_tolerance": 1e-9,
        "mip_feasibility_tolerance": 1e-9,
    }
    gap = opts.get("mip_gap", 1e-6)
    if gap is not None:
        mip_opts["mip_rel_gap"] = float(gap)
    tl = opts.get("time_limit", 0) or 0
    if tl > 0:
        mip_opts["time_limit"] = tl

    if A is not None and A.shape[0] > 0:
        constraints = LinearConstraint(A, row_lo, row_hi)
    else:
        constraints = LinearConstraint(sp.csr_matrix((0, n)), [], [])
    res = milp(
        c=obj,
        constraints=constraints,
        integrality=integrality,
        bounds=Bounds(lb, ub),
        options=mip_opts,
    )
    status = _STATUS.get(res.status, "error")
    if status == "limit" and res.x is None:
        status = "error"  # timed out with no incumbent
    return {
        "status": status,
        "objective": float(res.fun) if res.fun is not None else 0.0,
        "x": [float(v) for v in res.x] if res.x is not None else None,
        "gap": float(res.mip_gap) if getattr(res, "mip_gap", None) is not None else 0.0,
        "message": str(res.message),
        "duals": None,
    }


def solve_one(model, opts):
    try:
        n = int(model["nv"])
        if n == 0:
            return {"status": "optimal", "objective": 0.0, "x": [], "gap": 0.0,
                    "duals": [], "message": "empty model"}
        lb = _to_inf(model["lb"])
        ub = _to_inf(model["ub"])
        obj = np.asarray(model["obj"], dtype=float)
        integrality = np.zeros(n)
        for i in model.get("integer", []):
            integrality[i] = 1
        row_lo = _to_inf(model.get("row_lo", []))
        row_hi = _to_inf(model.get("row_hi", []))
        m = len(row_lo)
        A = None
        if m > 0:
            A = sp.csr_matrix(
                (np.asarray(model["a_val"], dtype=float),
                 np.asarray(model["a_col"], dtype=np.int64),
                 np.asarray(model["a_start"], dtype=np.int64)),
                shape=(m, n),
            )
        if integrality.any():
            return _solve_milp(n, obj, lb, ub, integrality, A, row_lo, row_hi, opts)
        return _solve_lp(n, obj, lb, ub, A, row_lo, row_hi, opts)
    except Exception as exc:  # report, never crash the server
        return {"status": "error", "objective": 0.0, "x": None, "gap": 0.0,
                "duals": None, "message": f"{type(exc).__name__}: {exc}"}


def handle_request(req):
    op = req.get("op", "solve")
    if op == "ping":
        return {"ok": True}
    if op == "solve":
        return solve_one(req["model"], req.get("options", {}))
    if op == "solve_batch":
        opts = req.get("options", {})
        return {"results": [solve_one(m, opts) for m in req["models"]]}
    return {"status": "error", "message": f"unknown op '{op}'"}


def serve():
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            sys.stdout.write(json.dumps({"status": "error", "message": str(exc)}) + "\n")
            sys.stdout.flush()
            continue
        if req.get("op") == "quit":
            return
        sys.stdout.write(json.dumps(handle_request(req)) + "\n")
        sys.stdout.flush()


# ---------------------------------------------------------------------------
# MPS pathway


def parse_mps(path):
    """Parse free-format MPS; supports ROWS N/L/G/E, COLUMNS with integer
    markers, RHS, RANGES, BOUNDS (LO UP FX FR MI PL BV LI UI), OBJSENSE."""
    section = None
    maximize = False
    obj_row = None
    row_type = {}
    row_order = []
    cols = {}
    col_order = []
    integers = set()
    rhs = {}
    ranges = {}
    bounds = {}
    in_integer = False

    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("*"):
                continue
            if not line[0].isspace():
                tok = line.split()
                section = tok[0].upper()
                if section == "OBJSENSE" and len(tok) > 1:
                    maximize = tok[1].upper() in ("MAX", "MAXIMIZE")
                    section = "OBJSENSE_DONE"
                continue
            tok = line.split()
            if section == "OBJSENSE":
                maximize = tok[0].upper() in ("MAX", "MAXIMIZE")
            elif section == "ROWS":
                t, name = tok[0].upper(), tok[1]
                if t == "N":
                    if obj_row is None:
                        obj_row = name
                else:
                    row_type[name] = t
                    row_order.append(name)
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1].upper() == "'MARKER'":
                    kw = tok[2].upper().strip("'")
                    in_integer = kw == "INTORG"
                    continue
                name = tok[0]
                if name not in cols:
                    cols[name] = {}
                    col_order.append(name)
                    if in_integer:
                        integers.add(name)
                for j in range(1, len(tok) - 1, 2):
                    cols[name][tok[j]] = float(tok[j + 1])
            elif section == "RHS":
                for j in range(1, len(tok) - 1, 2):
                    rhs[tok[j]] = float(tok[j + 1])
            elif section == "RANGES":
                for j in range(1, len(tok) - 1, 2):
                    ranges[tok[j]] = float(tok[j + 1])
            elif section == "BOUNDS":
                bt, _, name = tok[0].upper(), tok[1], tok[2]
                val = float(tok[3]) if len(tok) > 3 else 0.0
                bounds.setdefault(name, []).append((bt, val))

    n = len(col_order)
    col_idx = {c: i for i, c in enumerate(col_order)}
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    integrality = np.zeros(n)
    for c in integers:
        i = col_idx[c]
        integrality[i] = 1
        ub[i] = 1.0  # MPS convention: integer columns default to [0,1]
    for name, specs in bounds.items():
        i = col_idx[name]
        for bt, val in specs:
            if bt == "LO":
                lb[i] = val
            elif bt == "UP":
                ub[i] = val
                if val < 0 and lb[i] == 0:
                    lb[i] = -np.inf
            elif bt == "FX":
                lb[i] = ub[i] = val
            elif bt == "FR":
                lb[i], ub[i] = -np.inf, np.inf
            elif bt == "MI":
                lb[i] = -np.inf
            elif bt == "PL":
                ub[i] = np.inf
            elif bt == "BV":
                lb[i], ub[i], integrality[i] = 0.0, 1.0, 1
            elif bt == "LI":
                lb[i], integrality[i] = val, 1
            elif bt == "UI":
                ub[i], integrality[i] = val, 1

    m = len(row_order)
    row_idx = {r: i for i, r in enumerate(row_order)}
    obj = np.zeros(n)
    trip_r, trip_c, trip_v = [], [], []
    for cname, entries in cols.items():
        ci = col_idx[cname]
        for rname, val in entries.items():
            if rname == obj_row:
                obj[ci] = val
            elif rname in row_idx:
                trip_r.append(row_idx[rname])
                trip_c.append(ci)
                trip_v.append(val)
    A = sp.csr_matrix((trip_v, (trip_r, trip_c)), shape=(m, n)) if m else None

    row_lo = np.full(m, -np.inf)
    row_hi = np.full(m, np.inf)
    for rname in row_order:
        i = row_idx[rname]
        t = row_type[rname]
        b = rhs.get(rname, 0.0)
        if t == "L":
            row_hi[i] = b
        elif t == "G":
            row_lo[i] = b
        else:  # E
            row_lo[i] = row_hi[i] = b
        if rname in ranges:
            rng = ranges[rname]
            if t == "L":
                row_lo[i] = b - abs(rng)
            elif t == "G":
                row_hi[i] = b + abs(rng)
            else:
                if rng >= 0:
                    row_hi[i] = b + rng
                else:
                    row_lo[i] = b + rng
    # objective constant: MPS stores it as the negated RHS of the objective row
    obj_const = -rhs.get(obj_row, 0.0)
    return {
        "n": n, "obj": obj, "obj_const": obj_const, "maximize": maximize,
        "lb": lb, "ub": ub, "integrality": integrality,
        "A": A, "row_lo": row_lo, "row_hi": row_hi,
        "row_names": row_order, "col_names": col_order,
    }


def solve_mps(path, out_path, opts):
    p = parse_mps(path)
    obj = -p["obj"] if p["maximize"] else p["obj"]
    model = {
        "nv": p["n"],
        "lb": [_from_inf(v) for v in p["lb"]],
        "ub": [_from_inf(v) for v in p["ub"]],
        "integer": [i for i in range(p["n"]) if p["integrality"][i]],
        "obj": list(obj),
        "row_lo": [_from_inf(v) for v in p["row_lo"]],
        "row_hi": [_from_inf(v) for v in p["row_hi"]],
        "a_start": list(map(int, p["A"].indptr)) if p["A"] is not None else [0],
        "a_col": list(map(int, p["A"].indices)) if p["A"] is not None else [],
        "a_val": list(map(float, p["A"].data)) if p["A"] is not None else [],
    }
    res = solve_one(model, opts)
    objective = res["objective"] + p["obj_const"]
    if p["maximize"]:
        objective = -objective
    with open(out_path, "w") as fh:
        fh.write(f"=status= {res['status']}\n")
        fh.write(f"=objective= {objective!r}\n")
        fh.write(f"=gap= {res['gap']!r}\n")
        fh.write("=columns=\n")
        if res["x"] is not None:
            for name, v in zip(p["col_names"], res["x"]):
                fh.write(f"{name} {v!r}\n")
        if res.get("duals") is not None:
            fh.write("=rows=\n")
            sgn = -1.0 if p["maximize"] else 1.0
            for name, v in zip(p["row_names"], res["duals"]):
                fh.write(f"{name} {sgn * v!r}\n")
    return 0 if res["status"] in ("optimal", "limit") else 1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--serve", action="store_true")
    ap.add_argument("--json", metavar="REQUEST")
    ap.add_argument("--mps", metavar="MODEL")
    ap.add_argument("--out", metavar="FILE")
    ap.add_argument("--mip-gap", type=float, default=1e-6)
    ap.add_argument("--time-limit", type=float, default=0.0)
    ap.add_argument("--want-duals", action="store_true")
    args = ap.parse_args()

    if args.serve:
        serve()
        return 0
    opts = {"mip_gap": args.mip_gap, "time_limit": args.time_limit,
            "want_duals": args.want_duals}
    if args.mps:
        if not args.out:
            ap.error("--mps requires --out")
        return solve_mps(args.mps, args.out, opts)
    if args.json:
        if not args.out:
            ap.error("--json requires --out")
        with open(args.json) as fh:
            req = json.load(fh)
        with open(args.out, "w") as fh:
            json.dump(handle_request(req), fh)
        return 0
    ap.error("one of --serve / --json / --mps is required")


if __name__ == "__main__":
    sys.exit(main())
