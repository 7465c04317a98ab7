"""File formats: graphs (JSON or edge CSV), signals (CSV), plans and results (JSON).

Complex numbers are written as [re, im] pairs in JSON and as two columns
in CSV.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .filters import FilterDesign, FilterMode
from .seeding import ReconstructionPlan, SeedingSchedule, SelectionPattern
from .spectral import Graph


def _pair(z):
    z = complex(z)
    return [z.real, z.imag]


def _unpair(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1] if len(v) > 1 else 0.0)
    return complex(v)


def load_graph(path) -> Graph:
    """JSON ``{"n", "edges": [[src, dst, w?], ...], "directed"}`` or an edge CSV.

    CSV rows are ``src,dst[,weight]``; a non-numeric first row is treated as
    a header and the node count is max index + 1.
    """
    if str(path).endswith(".json"):
        with open(path) as fh:
            d = json.load(fh)
        return Graph(int(d["n"]), [tuple(e) for e in d["edges"]], bool(d.get("directed", False)))
    edges = []
    directed = False
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or row[0].startswith("#"):
                if row and "directed" in row[0]:
                    directed = True
                continue
            try:
                vals = [float(x) for x in row]
            except ValueError:
                if k == 0:
                    continue
                raise
            w = vals[2] if len(vals) > 2 else 1.0
            edges.append((int(vals[0]), int(vals[1]), w))
    n = 1 + max((max(s, d) for s, d, _ in edges), default=-1)
    return Graph(n, edges, directed)


def save_graph(graph: Graph, path):
    with open(path, "w") as fh:
        json.dump({"n": graph.n, "directed": graph.directed,
                   "edges": [[s, d, float(np.real(w))] for s, d, w in graph.edges]}, fh, indent=1)


def load_signal(path) -> np.ndarray:
    """One value per row: ``re`` or ``re,im``. A non-numeric first row is a header."""
    vals = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                nums = [float(x) for x in row]
            except ValueError:
                if k == 0:
                    continue
                raise
            vals.append(complex(nums[0], nums[1] if len(nums) > 1 else 0.0))
    return np.array(vals, dtype=complex)


def save_signal(x, path):
    x = np.asarray(x, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for v in x:
            w.writerow([repr(float(v.real)), repr(float(v.imag))])


def filter_to_dict(f: FilterDesign) -> dict:
    d = {"mode": f.mode.value, "coeffs": [_pair(c) for c in f.coeffs],
         "response": [_pair(c) for c in f.response]}
    if f.roots is not None:
        d["roots"] = [_pair(r) for r in f.roots]
        d["a0"] = _pair(f.a0)
    return d


def filter_from_dict(d) -> FilterDesign:
    roots = tuple(_unpair(r) for r in d["roots"]) if "roots" in d else None
    a0 = _unpair(d["a0"]) if "a0" in d else None
    return FilterDesign(np.array([_unpair(c) for c in d["coeffs"]]),
                        np.array([_unpair(c) for c in d["response"]]),
                        FilterMode(d["mode"]), roots, a0)


def schedule_to_dict(s: SeedingSchedule) -> dict:
    return {"tau": s.tau,
            "injections": [{"node": i, "time": t, "value": _pair(v)}
                           for i, t, v in s.injections()]}


def schedule_from_dict(d) -> SeedingSchedule:
    inj = d["injections"]
    pattern = SelectionPattern(int(d["tau"]), tuple((e["node"], e["time"]) for e in inj))
    return SeedingSchedule(pattern, np.array([_unpair(e["value"]) for e in inj], dtype=complex))


def plan_to_dict(plan: ReconstructionPlan) -> dict:
    d = schedule_to_dict(plan.schedule)
    d["filter"] = filter_to_dict(plan.filter)
    d["K"] = plan.K
    d["scheme"] = plan.scheme
    return d


def plan_from_dict(d) -> ReconstructionPlan:
    return ReconstructionPlan(schedule_from_dict(d), filter_from_dict(d["filter"]),
                              int(d.get("K", 0)), d.get("scheme", "mnmt"))


def selection_to_dict(res) -> dict:
    return {"pattern": [[i, t] for i, t in res.pattern.pairs], "tau": res.pattern.tau,
            "objective": res.objective_value if np.isfinite(res.objective_value) else "inf",
            "method": res.method.value, "candidates_evaluated": int(res.candidates_evaluated)}


def dump_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is None:
        return text
    with open(path, "w") as fh:
        fh.write(text + "\n")
    return text


def _write_rows(rows, path):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def write_experiment(summary, outdir):
    """summary.json, trials.csv and curves.csv under ``outdir``."""
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        fh.write(summary.to_json() + "\n")
    _write_rows(summary.records, os.path.join(outdir, "trials.csv"))
    _write_rows(summary.curves, os.path.join(outdir, "curves.csv"))
