"""Exhaustive noise-robust selection on a directed cycle: uniform seeds are optimal."""

import argparse
import itertools

from graphseed import build_shift, decompose
from graphseed.filters import design_ideal_lowpass
from graphseed.graphs import gen_cycle
from graphseed.imperfect import ReconstructionOperator, constant_snr_objective


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--k", type=int, default=4)
    args = ap.parse_args()
    basis = decompose(build_shift(gen_cycle(args.n)))
    op = ReconstructionOperator.build(basis, args.k, filt=design_ideal_lowpass(basis, args.k))
    scores = {c: constant_snr_objective(op.Phi, c)
              for c in itertools.combinations(range(args.n), args.k)}
    best = min(scores.values())
    winners = [c for c, v in scores.items() if v <= best * (1 + 1e-9)]
    print(f"{len(scores)} patterns, best objective {best:.6g}")
    for c in winners:
        print("optimal:", c)


if __name__ == "__main__":
    main()
