"""Policy comparison on the bundled desk scenario.

Runs no-ADR, random and index-driven removal variants over shared seeds,
stores every run under --out/<variant>/ and writes suite.csv plus the
plot tables.

    python scripts/desk_experiments.py --seeds 0-9 --out results/desk
"""

import argparse
import sys

from adrsim.cli import parse_seeds
from adrsim.engine import bundled_config
from adrsim.reporting import emit_plots, experiment_suite, write_suite


def topk(index, k, cadence=1):
    return {"policy.kind": "TopKByIndex", "policy.k": k, "policy.index": index, "policy.cadence_years": cadence}


VARIANTS = {
    "none": {},
    "random_k5": {"policy.kind": "RandomK", "policy.k": 5},
    "mitri_k1": topk("MITRI", 1),
    "fmm_k1": topk("FMM", 1),
    "fmm_k5": topk("FMM", 5),
    "fmm_k5_5yr": topk("FMM", 5, 5),
    "fmm_k5_10yr": topk("FMM", 5, 10),
    "fmm_k5_linear_mass": {**topk("FMM", 5), "trackers.2.mass_exponent": 1.0},
    "fmm_k5_no_mass": {**topk("FMM", 5), "trackers.2.mass_exponent": 0.0},
    "fmm_k5_50kg": {**topk("FMM", 5), "trackers.2.filter_min_mass": 50.0},
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", default="0-9")
    ap.add_argument("--out", default="results/desk")
    ap.add_argument("--years", type=float, default=None, help="override the 50-year horizon")
    ap.add_argument("--only", help="comma-separated subset of variants")
    args = ap.parse_args()

    cfg = bundled_config("desk")
    if args.years is not None:
        cfg = cfg.with_updates(horizon_years=args.years)
    names = args.only.split(",") if args.only else list(VARIANTS)
    rows = experiment_suite(cfg, {n: VARIANTS[n] for n in names}, parse_seeds(args.seeds), names[0], args.out)
    write_suite(rows, sys.stdout)
    with open(f"{args.out}/suite.csv", "w", newline="") as fh:
        write_suite(rows, fh)
    for p in emit_plots(args.out, threshold=5):
        print(p)


if __name__ == "__main__":
    main()
