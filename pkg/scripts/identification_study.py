"""Cohort identification for MITRI and FMM at several density-refresh intervals.

One no-ADR campaign carries every tracker; the cohort is objects with at
least --threshold collisions in a run, scored against the final ranking.

    python scripts/identification_study.py --seeds 0-9 --threshold 5
"""

import argparse

from adrsim.cli import parse_seeds
from adrsim.engine import bundled_config, campaign
from adrsim.reporting import UndefinedRateError, pooled_identification


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", default="0-4")
    ap.add_argument("--threshold", type=int, default=5)
    ap.add_argument("--top-fraction", type=float, default=0.005)
    ap.add_argument("--years", type=float, default=None)
    args = ap.parse_args()

    trackers = [dict(name="CSI", kind="CSI")]
    for tag, iv in (("static", None), ("30d", 30.0), ("90d", 90.0), ("180d", 180.0)):
        trackers += [dict(name=f"MITRI_{tag}", kind="MITRI", density_interval_days=iv),
                     dict(name=f"FMM_{tag}", kind="FMM", density_interval_days=iv)]
    cfg = bundled_config("desk").with_updates(trackers=trackers)
    if args.years is not None:
        cfg = cfg.with_updates(horizon_years=args.years)
    res = campaign(cfg, parse_seeds(args.seeds))
    print("index,rate,n_cohort,n_hit")
    for t in trackers:
        try:
            rep = pooled_identification(res.runs, t["name"], args.threshold, args.top_fraction)
        except UndefinedRateError:
            print(f"{t['name']},nan,0,0")
            continue
        print(f"{t['name']},{rep.rate:.3f},{rep.n_cohort},{rep.n_hit}")


if __name__ == "__main__":
    main()
