"""Best-location error versus seeding budget on the karate-club graph."""

import argparse
import os

from graphseed.experiments import ExperimentConfig, run_experiment
from graphseed.io import write_experiment

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=os.path.join(HERE, os.pardir, "configs", "karate.json"))
    ap.add_argument("--signals", type=int, default=None)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config)
    if args.signals:
        cfg.trials = args.signals
    summary = run_experiment(cfg)
    out = args.out or cfg.output
    if out:
        write_experiment(summary, out)
    print("P,scheme,mean_error,median_error,search")
    for c in summary.curves:
        print(f"{c['P']},{c['scheme']},{c['mean_error']:.4g},{c['median_error']:.4g},{c['method']}")


if __name__ == "__main__":
    main()
