"""Command-line entry point: run, campaign, rank, analyze, suite, emit-plots."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .catalog import CatalogError, load_catalog
from .engine import (
    ConfigError,
    apply_delta,
    bundled_config,
    campaign,
    initial_catalog,
    load_config,
    parse_variant,
    run,
    save_run,
    snapshot,
)
from .reporting import (
    DEFAULT_COHORT_THRESHOLD,
    DEFAULT_TOP_FRACTION,
    ReportError,
    aggregates,
    analyze,
    emit_plots,
    experiment_suite,
    write_aggregates,
    write_suite,
)
from .risk import write_rankings


class UsageError(ValueError):
    pass


def parse_seeds(text: str) -> list[int]:
    """'0-9', '1,2,5' or a mix like '0-3,7'."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                a, b = int(lo), int(hi)
                if b < a:
                    raise UsageError(f"empty seed range {part!r}")
                out.extend(range(a, b + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"bad seed list {text!r}") from None
    if not out:
        raise UsageError("no seeds given")
    if len(set(out)) != len(out):
        raise UsageError(f"duplicate seeds in {text!r}")
    return out


def resolve_config(path: str):
    """A file path, or the name of a bundled config (e.g. ``desk``)."""
    p = Path(path)
    if p.exists():
        return load_config(p)
    try:
        return bundled_config(path)
    except (FileNotFoundError, OSError):
        raise ConfigError(f"config {path!r} not found") from None


def _variants(args) -> dict:
    out = {}
    for text in args.variant or []:
        name, delta = parse_variant(text)
        if name in out:
            raise ConfigError(f"variant {name!r} given twice")
        out[name] = delta
    return out


def _base(args):
    cfg = resolve_config(args.config)
    if args.seeds:
        cfg = cfg.with_updates(seeds=parse_seeds(args.seeds))
    return cfg


def _out(args, cfg) -> Path:
    out = Path(args.out or cfg.output_dir or "results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = _base(args)
    out = _out(args, cfg)
    variants = _variants(args) or {"": {}}
    seeds = cfg.seeds if args.seeds else cfg.seeds[:1]
    catalog = initial_catalog(cfg)
    for name, delta in variants.items():
        c = apply_delta(cfg, delta) if delta else cfg
        for s in seeds:
            r = run(c, s, catalog)
            d = save_run(r, out / name if name else out, c)
            print(f"{name or 'run'} seed {s}: final {r.final_population} objects, "
                  f"{r.wall_time:.1f} s -> {d}")
    return 0


def cmd_campaign(args) -> int:
    cfg = _base(args)
    out = _out(args, cfg)
    variants = _variants(args) or {"": {}}
    catalog = initial_catalog(cfg)
    for name, delta in variants.items():
        c = apply_delta(cfg, delta) if delta else cfg
        res = campaign(c, c.seeds, catalog=catalog)
        dest = out / name if name else out
        for r in res.runs:
            save_run(r, dest, c)
        with open(dest / "aggregates.csv", "w", newline="") as fh:
            write_aggregates(aggregates(res.runs), fh)
        print(f"{name or 'campaign'}: {len(res.runs)} seeds, mean final {res.mean_final:.1f}, "
              f"mean wall {res.mean_wall_time:.1f} s -> {dest}")
    return 0


def cmd_rank(args) -> int:
    cfg = resolve_config(args.config)
    for name, delta in _variants(args).items():
        cfg = apply_delta(cfg, delta)
    catalog = load_catalog(args.catalog) if args.catalog else initial_catalog(cfg)
    out = _out(args, cfg)
    ranks = snapshot(cfg, catalog, args.window_days)
    for name, rk in ranks.items():
        with open(out / f"rankings_{name}.csv", "w", newline="") as fh:
            write_rankings(fh, [rk])
    with open(out / "manifest.json", "w") as fh:
        json.dump({"config_digest": cfg.digest(), "n_objects": len(catalog), "window_days": args.window_days,
                   "trackers": sorted(ranks), "catalog": args.catalog}, fh, indent=2, sort_keys=True)
    for name, rk in ranks.items():
        print(f"{name}: top ids {rk.ids[:5].tolist()}")
    return 0


def cmd_analyze(args) -> int:
    if not args.out:
        raise UsageError("analyze needs --out <results dir>")
    summary = analyze(args.out, args.threshold, args.top_fraction, args.epoch_year)
    print(json.dumps({k: summary[k] for k in ("n_runs", "cohort_size", "identification")}, sort_keys=True))
    return 0


def cmd_suite(args) -> int:
    cfg = _base(args)
    out = _out(args, cfg)
    variants = _variants(args)
    if not variants:
        raise ConfigError("suite needs at least one --variant")
    rows = experiment_suite(cfg, variants, cfg.seeds, args.baseline, out)
    with open(out / "suite.csv", "w", newline="") as fh:
        write_suite(rows, fh)
    write_suite(rows, sys.stdout)
    return 0


def cmd_emit_plots(args) -> int:
    if not args.out:
        raise UsageError("emit-plots needs --out <results dir>")
    for p in emit_plots(args.out, args.threshold, args.top_fraction, args.baseline):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adrsim", description="LEO debris evolution with risk-ranked removal")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="config file or bundled name (desk)")
        p.add_argument("--seeds", help="seed list, e.g. 0-9 or 1,2,5")
        p.add_argument("--out", help="output directory")
        p.add_argument("--variant", action="append", metavar="NAME=PATH=VALUE[,PATH=VALUE]",
                       help="named config delta, repeatable")

    def analysis(p):
        p.add_argument("--out", help="results directory")
        p.add_argument("--threshold", type=int, default=DEFAULT_COHORT_THRESHOLD, help="cohort collision count")
        p.add_argument("--top-fraction", type=float, default=DEFAULT_TOP_FRACTION)

    p = sub.add_parser("run", help="simulate one seed (or every --seeds entry)")
    common(p)
    p.set_defaults(fn=cmd_run)
    p = sub.add_parser("campaign", help="simulate a seed ensemble")
    common(p)
    p.set_defaults(fn=cmd_campaign)
    p = sub.add_parser("rank", help="one-shot index rankings of a catalog")
    common(p)
    p.add_argument("--catalog", help="catalog file (TLE or csv); defaults to the config population")
    p.add_argument("--window-days", type=float, default=365.25, help="observation window")
    p.set_defaults(fn=cmd_rank)
    p = sub.add_parser("analyze", help="cohorts, identification and comparisons for stored runs")
    analysis(p)
    p.add_argument("--epoch-year", type=float, default=None, help="ranking snapshot year (default last)")
    p.set_defaults(fn=cmd_analyze)
    p = sub.add_parser("suite", help="run variants over shared seeds")
    common(p)
    p.add_argument("--baseline", help="variant used for relative cost (default first)")
    p.set_defaults(fn=cmd_suite)
    p = sub.add_parser("emit-plots", help="plot-ready tables from stored results")
    analysis(p)
    p.add_argument("--baseline", help="variant used for relative cost")
    p.set_defaults(fn=cmd_emit_plots)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (UsageError, ConfigError, CatalogError, ReportError, FileNotFoundError, OSError, ValueError,
            KeyError) as e:
        print(f"adrsim {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
