"""Command-line interface.

Exit codes: 0 success, 1 infeasible problem (a ReconstructionError),
2 usage error or unreadable input.

Seeding slots are addressed as ``node@time``; in the flattened
node-time vector slot ``node * tau + (tau - 1 - time)`` holds that value.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import sys

import numpy as np

from . import io
from .errors import ReconstructionError
from .experiments import ExperimentConfig, run_experiment
from .filters import design_ideal_lowpass, design_lowpass_kernel
from .graphs import gen_cycle, gen_er, random_bandlimited
from .imperfect import (
    ReconstructionOperator,
    constant_snr_objective,
    select_constant_snr,
    select_fixed_noise,
)
from .seeding import (
    SelectionPattern,
    degree_reduced_design,
    design_exact,
    identity_seeding_check,
    reconstruct,
)
from .spectral import DEFAULT_TOL, build_shift, decompose, gft, is_bandlimited, vandermonde


class UsageError(Exception):
    pass


def _tolerances(args):
    overrides = {f.name: getattr(args, f"tol_{f.name}") for f in dataclasses.fields(DEFAULT_TOL)
                 if getattr(args, f"tol_{f.name}", None) is not None}
    return dataclasses.replace(DEFAULT_TOL, **overrides)


def _load_graph(path):
    try:
        return io.load_graph(path)
    except FileNotFoundError:
        raise UsageError(f"graph file not found: {path}")


def _load_signal(path):
    try:
        return io.load_signal(path)
    except FileNotFoundError:
        raise UsageError(f"signal file not found: {path}")


def _basis(args):
    graph = _load_graph(args.graph)
    shift = build_shift(graph, args.shift)
    return shift, decompose(shift, _tolerances(args))


def parse_locations(text, scheme):
    """'0,3,5' for node lists; '0@1,0@0,4@1' (node@time) for mnmt patterns."""
    items = [t for t in text.split(",") if t.strip()]
    if scheme == "mnmt":
        try:
            pairs = [tuple(int(v) for v in t.split("@")) for t in items]
        except ValueError:
            raise UsageError(f"bad mnmt locations {text!r}; expected node@time,...")
        if any(len(p) != 2 for p in pairs):
            raise UsageError(f"bad mnmt locations {text!r}; expected node@time,...")
        return SelectionPattern(max(t for _, t in pairs) + 1, tuple(pairs))
    try:
        nodes = [int(t) for t in items]
    except ValueError:
        raise UsageError(f"bad node list {text!r}")
    return nodes if scheme == "mnst" else nodes[0]


def _emit(obj, out):
    text = io.dump_json(obj)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_decompose(args):
    shift, basis = _basis(args)
    rows = [{"k": k, "re": float(l.real), "im": float(l.imag), "abs": float(abs(l))}
            for k, l in enumerate(basis.eigenvalues)]
    if args.format == "csv":
        w = csv.DictWriter(sys.stdout, fieldnames=["k", "re", "im", "abs"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return 0
    _emit({"n": basis.n, "eigenvalues": rows, "cond_V": basis.cond_V,
           "unitary": basis.is_unitary}, args.out)
    return 0


def cmd_design(args):
    shift, basis = _basis(args)
    y = _load_signal(args.target)
    if y.shape[0] != basis.n:
        raise UsageError(f"target has {y.shape[0]} entries, graph has {basis.n} nodes")
    if not is_bandlimited(basis, y, args.K, basis.tol.zero):
        print(f"warning: target is not {args.K}-bandlimited; only its first "
              f"{args.K} frequency coefficients are reproduced", file=sys.stderr)
    yK = gft(basis, y)[:args.K]
    locations = parse_locations(args.locations, args.scheme)
    if args.reduced:
        P = args.P
        if P is None:
            P = len(locations) if args.scheme == "mnst" else (
                locations.P if args.scheme == "mnmt" else args.K)
        plan = degree_reduced_design(basis, args.K, args.scheme, P, locations, yK)
    else:
        plan = design_exact(basis, args.K, args.scheme, locations, yK)
    _emit(io.plan_to_dict(plan), args.out)
    return 0


def cmd_reconstruct(args):
    shift, basis = _basis(args)
    try:
        with open(args.plan) as fh:
            plan = io.plan_from_dict(json.load(fh))
    except FileNotFoundError:
        raise UsageError(f"plan file not found: {args.plan}")
    y = _load_signal(args.target) if args.target else np.zeros(basis.n, dtype=complex)
    report = reconstruct(shift, plan, y, basis=basis, record=bool(args.trace), form=args.form)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phase", "step"] + [f"x{i}" for i in range(basis.n)])
            for phase, step, x in report.trace:
                w.writerow([phase, step] + [repr(float(v.real)) for v in x])
    _emit({"relative_error": report.relative_error,
           "recovered": report.feasibility["recovered"],
           "imag_residue": report.imag_residue,
           "z": [[float(v.real), float(v.imag)] for v in report.z],
           "cond": report.cond_numbers}, args.out)
    return 0 if report.feasibility["recovered"] or not args.target else 1


def cmd_select(args):
    shift, basis = _basis(args)
    op = ReconstructionOperator.build(basis, args.K, args.tau)
    if args.objective == "constant_snr":
        res = select_constant_snr(op, args.P, args.strategy or "exhaustive")
    else:
        res = select_fixed_noise(op, args.P, args.strategy or "separable")
    _emit(io.selection_to_dict(res), args.out)
    return 0


def cmd_experiment(args):
    try:
        cfg = ExperimentConfig.load(args.config)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {args.config}")
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad config: {exc}")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    summary = run_experiment(cfg)
    out = args.out or cfg.output
    if out:
        io.write_experiment(summary, out)
    print(summary.to_json())
    return 0


def demo_cycle(args):
    n, K = args.n, args.k
    basis = decompose(build_shift(gen_cycle(n)), _tolerances(args))
    # unitary DFT with F[k, l] = exp(+2j pi k l / N) / sqrt(N), so Psi = sqrt(N) F^H
    F = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / np.sqrt(n)
    psi_err = float(np.abs(vandermonde(basis.eigenvalues, n) - np.sqrt(n) * F.conj().T).max())
    op = ReconstructionOperator.build(basis, K, 1, design_ideal_lowpass(basis, K))
    scores = {c: constant_snr_objective(op.Phi, c) for c in itertools.combinations(range(n), K)}
    best = min(scores.values())
    print(f"# directed cycle N={n} K={K}: max |Psi - sqrt(N) F^H| = {psi_err:.2e}")
    print("nodes,objective,uniform,optimal")
    step = n // K if n % K == 0 else None
    for c, v in sorted(scores.items(), key=lambda kv: (kv[1], kv[0])):
        uniform = step is not None and all(c[i + 1] - c[i] == step for i in range(K - 1))
        print(f"{' '.join(map(str, c))},{v:.12g},{int(uniform)},{int(abs(v - best) <= 1e-9 * best)}")
    return 0


def demo_karate(args):
    """Best-location error versus number of seeding values for one signal."""
    cfg = ExperimentConfig(kind="insufficient_seeding", graph={"generator": "karate"},
                           shift="normalized", K=args.k, schemes=("mnst", "snmt"),
                           P_range=(1, args.k), noise=None, trials=1, seed=args.seed)
    summary = run_experiment(cfg)
    print("P,scheme,best_error,realized_error,best_location")
    for c, r in zip(summary.curves, summary.records):
        print(f"{c['P']},{c['scheme']},{c['mean_error']:.6g},{c['mean_realized_error']:.3g},"
              f"{r['location']}")
    return 0


def demo_er(args):
    rng = np.random.default_rng(args.seed)
    n, K = args.n, args.k
    for _ in range(1000):
        shift = build_shift(gen_er(n, 0.3, rng))
        try:
            basis = decompose(shift, _tolerances(args))
            design_lowpass_kernel(basis, K)
            break
        except ReconstructionError:
            continue
    y = random_bandlimited(basis, K, rng)
    yK = gft(basis, y)[:K]
    out = []
    for scheme, loc in (("mnst", list(range(K))), ("snmt", 0),
                        ("mnmt", SelectionPattern.grid([0, 1], [0, 1], 2))):
        try:
            plan = design_exact(basis, K, scheme, loc, yK)
            rep = reconstruct(shift, plan, y, basis=basis)
            out.append({"scheme": scheme, "relative_error": rep.relative_error,
                        "filter_degree": plan.filter.degree})
        except ReconstructionError as exc:
            out.append({"scheme": scheme, "error": f"{type(exc).__name__}: {exc}"})
    check = identity_seeding_check(basis, K, list(range(K)))
    print(json.dumps({"n": n, "K": K, "results": out,
                      "identity_seeding_offdiag": check.offdiag_norm}, indent=2))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="graphseed",
                                 description="Seeding and filtering designs for bandlimited graph signals")
    ap.add_argument("--seed", type=int, default=None, help="RNG seed")
    for f in dataclasses.fields(DEFAULT_TOL):
        ap.add_argument(f"--tol-{f.name.replace('_', '-')}", dest=f"tol_{f.name}", type=float,
                        default=None, help=f"override tolerance (default {f.default})")
    sub = ap.add_subparsers(dest="command", required=True)

    def graph_args(p):
        p.add_argument("--graph", required=True, help="graph file (.json or edge .csv)")
        p.add_argument("--shift", default="adjacency",
                       choices=["adjacency", "laplacian", "normalized"])
        p.add_argument("--out", default=None, help="write JSON here instead of stdout")

    p = sub.add_parser("decompose", help="eigendecomposition in canonical frequency order")
    graph_args(p)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("design", help="design a seeding plan for a target signal")
    graph_args(p)
    p.add_argument("--scheme", choices=["mnst", "snmt", "mnmt"], required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--locations", required=True,
                   help="mnst: nodes '0,3,5'; snmt: node '2'; mnmt: 'node@time,...'")
    p.add_argument("--target", required=True, help="target signal CSV")
    p.add_argument("--reduced", action="store_true", help="degree-reduced design")
    p.add_argument("--P", type=int, default=None, help="number of seeding values (reduced)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("reconstruct", help="run a plan: seeding then filtering")
    graph_args(p)
    p.add_argument("--plan", required=True)
    p.add_argument("--target", default=None)
    p.add_argument("--form", choices=["polynomial", "product"], default="polynomial")
    p.add_argument("--trace", default=None, help="CSV of x(t) and filter stages")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("select", help="noise-aware seeding location selection")
    graph_args(p)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--P", type=int, required=True)
    p.add_argument("--tau", type=int, default=1)
    p.add_argument("--objective", choices=["constant_snr", "fixed_power"], default="constant_snr")
    p.add_argument("--strategy", default=None,
                   choices=["exhaustive", "greedy", "separable", "relaxed"])
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("experiment", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("demo", help="small self-contained demonstrations")
    p.add_argument("which", choices=["karate", "cycle", "er"])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(func=cmd_demo)
    return ap


def cmd_demo(args):
    defaults = {"cycle": (8, 4), "karate": (34, 5), "er": (10, 4)}[args.which]
    args.n = args.n or defaults[0]
    args.k = args.k or defaults[1]
    args.seed = 0 if args.seed is None else args.seed
    return {"cycle": demo_cycle, "karate": demo_karate, "er": demo_er}[args.which](args)


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ReconstructionError as exc:
        print(f"infeasible: {type(exc).__name__}: {exc}", file=sys.stderr)
        if exc.details:
            print(json.dumps({k: str(v) for k, v in exc.details.items()}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
