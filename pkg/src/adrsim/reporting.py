"""Post-run analysis: ground-truth cohorts, identification rates, ranking
comparisons, experiment suites and plot-ready tables."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .engine import (
    SERIES_HEADER,
    ConfigError,
    RunResult,
    SimulationConfig,
    apply_delta,
    campaign,
    initial_catalog,
    load_runs,
    save_run,
)
from .events import EventKind
from .risk import Ranking

DEFAULT_TOP_FRACTION = 0.005
DEFAULT_COHORT_THRESHOLD = 50
REFERENCE_COST_RATIO = 1.54  # FMM-static / MITRI-static wall time reported in the literature


class ReportError(ValueError):
    pass


class UndefinedRateError(ReportError):
    pass


# ---------------------------------------------------------------------------
# Cohorts


@dataclass
class GroundTruthCohort:
    threshold: int
    members: set
    per_run: dict = field(default_factory=dict)  # seed -> set of ids

    def __len__(self):
        return len(self.members)

    def __contains__(self, i):
        return i in self.members


def ground_truth_cohort(runs, threshold: int = DEFAULT_COHORT_THRESHOLD) -> GroundTruthCohort:
    """Union over runs of objects with at least ``threshold`` collisions in that run."""
    per_run = {r.seed: {i for i, c in r.collision_counts.items() if c >= threshold} for r in runs}
    members = set().union(*per_run.values()) if per_run else set()
    return GroundTruthCohort(threshold, members, per_run)


def collision_counts_from_log(log) -> dict[int, int]:
    """Recount per-object collisions by replaying an event log."""
    out: dict[int, int] = {}
    for r in log.of_kind(EventKind.Collision):
        for i in (r.id_a, r.id_b):
            out[i] = out.get(i, 0) + 1
    return out


# ---------------------------------------------------------------------------
# Identification


@dataclass
class IdentificationReport:
    index: str
    density_interval: float | None
    top_fraction: float
    rate: float
    n_cohort: int
    n_hit: int
    missing: list = field(default_factory=list)  # cohort members absent from the snapshot

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ReportError("rate must lie in [0, 1]")


def _top_slice(ranking: Ranking, top_fraction: float) -> set:
    if not 0 < top_fraction <= 1:
        raise ReportError("top_fraction must lie in (0, 1]")
    return set(ranking.top(top_fraction).tolist())


def identification_rate(ranking: Ranking, cohort, top_fraction: float = DEFAULT_TOP_FRACTION,
                        index: str = "", density_interval=None) -> IdentificationReport:
    """Share of the cohort inside the top ceil(f N) of the ranking; absent members are misses."""
    members = set(cohort.members if isinstance(cohort, GroundTruthCohort) else cohort)
    if not members:
        raise UndefinedRateError("identification rate is undefined for an empty cohort")
    top = _top_slice(ranking, top_fraction)
    present = set(ranking.ids.tolist())
    hit = len(members & top)
    return IdentificationReport(index, density_interval, top_fraction, hit / len(members), len(members), hit,
                                sorted(members - present))


def pooled_identification(runs, index: str, threshold: int, top_fraction: float = DEFAULT_TOP_FRACTION,
                          epoch_year: float | None = None, density_interval=None) -> IdentificationReport:
    """Pool hits over runs: each run's cohort is scored against that run's snapshot.

    Fragment ids are only meaningful within a run, so cohort membership and
    ranking are matched per run before pooling. ``epoch_year`` picks the
    stored snapshot (the last one when None).
    """
    hits = total = 0
    missing = []
    for r in runs:
        members = {i for i, c in r.collision_counts.items() if c >= threshold}
        if not members:
            continue
        rk = pick_snapshot(r.rankings[index], epoch_year)
        rep = identification_rate(rk, members, top_fraction)
        hits += rep.n_hit
        total += rep.n_cohort
        missing += [(r.seed, i) for i in rep.missing]
    if total == 0:
        raise UndefinedRateError("no run produced a cohort member at this threshold")
    return IdentificationReport(index, density_interval, top_fraction, hits / total, total, hits, missing)


def pick_snapshot(rankings, epoch_year: float | None) -> Ranking:
    if not rankings:
        raise ReportError("run has no ranking snapshots")
    if epoch_year is None:
        return rankings[-1]
    target = epoch_year * 365.25
    return min(rankings, key=lambda rk: (abs(rk.epoch - target), rk.epoch))


# ---------------------------------------------------------------------------
# Ranking comparison


@dataclass
class ComparisonTable:
    ids: np.ndarray
    percentile_a: np.ndarray
    percentile_b: np.ndarray

    @property
    def fraction_below(self) -> float:
        """Share of points with percentile_b < percentile_a (B ranks the object higher)."""
        return float(np.mean(self.percentile_b < self.percentile_a)) if len(self.ids) else math.nan

    def rows(self):
        for i, a, b in zip(self.ids, self.percentile_a, self.percentile_b):
            yield [int(i), repr(float(a)), repr(float(b))]


def ranking_comparison(a: Ranking, b: Ranking, cohort) -> ComparisonTable:
    if len(a) != len(b) or set(a.ids.tolist()) != set(b.ids.tolist()):
        raise ReportError("rankings cover different populations")
    members = sorted(set(cohort.members if isinstance(cohort, GroundTruthCohort) else cohort) & set(a.ids.tolist()))
    pa, pb = a.percentile_of(), b.percentile_of()
    ids = np.array(members, np.int64)
    return ComparisonTable(ids, np.array([pa[i] for i in members]), np.array([pb[i] for i in members]))


# ---------------------------------------------------------------------------
# Statistics


def paired_less(a, b) -> float:
    """One-sided paired t-test p-value for mean(a) < mean(b)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    d = a - b
    if np.all(d == d[0]):
        return 0.0 if d[0] < 0 else 1.0
    return float(stats.ttest_rel(a, b, alternative="less").pvalue)


# ---------------------------------------------------------------------------
# Experiment suite


@dataclass
class SuiteRow:
    name: str
    mean_final: float
    std_final: float
    mean_wall_time: float
    relative_cost: float
    config_digest: str
    finals: list


SUITE_HEADER = ["variant", "mean_final", "std_final", "mean_wall_time", "relative_cost", "config_digest"]


def experiment_suite(base: SimulationConfig, variants: dict, seeds=None, baseline: str | None = None,
                     out_dir=None, catalog=None) -> list[SuiteRow]:
    """Run every variant over the shared seeds.

    ``variants`` maps a name to dotted-path overrides (an empty dict is the
    base config). Relative cost is mean wall time over the baseline's.
    """
    if not variants:
        raise ConfigError("experiment suite needs at least one variant")
    seeds = list(base.seeds if seeds is None else seeds)
    catalog = initial_catalog(base) if catalog is None else catalog
    results = {}
    for name, delta in variants.items():
        cfg = apply_delta(base, delta) if delta else base
        res = campaign(cfg, seeds, catalog=catalog)
        results[name] = (cfg, res)
        if out_dir is not None:
            for r in res.runs:
                save_run(r, Path(out_dir) / name, cfg)
    return suite_rows({k: v[1].runs for k, v in results.items()},
                      {k: v[0].digest() for k, v in results.items()}, baseline)


def suite_rows(runs_by_variant: dict, digests: dict, baseline: str | None = None) -> list[SuiteRow]:
    baseline = baseline or next(iter(runs_by_variant))
    if baseline not in runs_by_variant:
        raise ConfigError(f"baseline variant {baseline!r} not in suite")
    base_wall = float(np.mean([r.wall_time for r in runs_by_variant[baseline]]))
    rows = []
    for name, runs in runs_by_variant.items():
        finals = [r.final_population for r in runs]
        wall = float(np.mean([r.wall_time for r in runs]))
        rows.append(SuiteRow(name, float(np.mean(finals)), float(np.std(finals)), wall, wall / base_wall,
                             digests.get(name, ""), finals))
    return rows


def write_suite(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUITE_HEADER)
    for r in rows:
        w.writerow([r.name, repr(r.mean_final), repr(r.std_final), repr(r.mean_wall_time), repr(r.relative_cost),
                    r.config_digest])


# ---------------------------------------------------------------------------
# Aggregates and analysis of persisted runs


def aggregates(runs) -> dict:
    """Order-independent summary of an ensemble."""
    runs = sorted(runs, key=lambda r: r.seed)
    series = np.array([r.series for r in runs], float)
    return {
        "seeds": [r.seed for r in runs],
        "config_digest": sorted({r.config_digest for r in runs}),
        "times": runs[0].times.tolist(),
        "mean_series": series.mean(axis=0).tolist(),
        "std_series": series.std(axis=0).tolist(),
        "mean_final": float(series[:, -1, 0].mean()),
        "mean_wall_time": float(np.mean([r.wall_time for r in runs])),
    }


def write_aggregates(agg: dict, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t_days", *[f"mean_{h}" for h in SERIES_HEADER[1:]], *[f"std_{h}" for h in SERIES_HEADER[1:]],
                "config_digest"])
    digest = ";".join(agg["config_digest"])
    for t, m, s in zip(agg["times"], agg["mean_series"], agg["std_series"]):
        w.writerow([repr(float(t)), *map(repr, m), *map(repr, s), digest])


def analyze(out_dir, threshold: int = DEFAULT_COHORT_THRESHOLD, top_fraction: float = DEFAULT_TOP_FRACTION,
            epoch_year: float | None = None) -> dict:
    """Write cohort, identification and comparison tables for the runs stored under ``out_dir``."""
    runs = load_runs(out_dir)
    dest = Path(out_dir) / "analysis"
    dest.mkdir(exist_ok=True)
    agg = aggregates(runs)
    digest = ";".join(agg["config_digest"])
    with open(dest / "aggregates.csv", "w", newline="") as fh:
        write_aggregates(agg, fh)
    cohort = ground_truth_cohort(runs, threshold)
    with open(dest / "cohort.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "id", "n_collisions", "config_digest"])
        for r in runs:
            for i in sorted(cohort.per_run[r.seed]):
                w.writerow([r.seed, i, r.collision_counts[i], digest])
    trackers = sorted(set().union(*(r.rankings for r in runs)))
    ident = []
    for name in trackers:
        if not all(r.rankings.get(name) for r in runs):
            continue
        try:
            ident.append(pooled_identification(runs, name, threshold, top_fraction, epoch_year))
        except UndefinedRateError:
            pass
    with open(dest / "identification.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "top_fraction", "threshold", "rate", "n_cohort", "n_hit", "n_missing", "config_digest"])
        for rep in ident:
            w.writerow([rep.index, repr(top_fraction), threshold, repr(rep.rate), rep.n_cohort, rep.n_hit,
                        len(rep.missing), digest])
    if "CSI" in trackers:
        for name in trackers:
            if name == "CSI" or not all(r.rankings.get(name) for r in runs):
                continue
            with open(dest / f"comparison_{name}_vs_CSI.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["seed", "id", f"percentile_{name}", "percentile_CSI", "config_digest"])
                for r in runs:
                    members = cohort.per_run[r.seed]
                    if not members:
                        continue
                    a = pick_snapshot(r.rankings[name], epoch_year)
                    b = pick_snapshot(r.rankings["CSI"], epoch_year)
                    for row in ranking_comparison(a, b, members).rows():
                        w.writerow([r.seed, *row, digest])
    summary = {
        "n_runs": len(runs),
        "threshold": threshold,
        "top_fraction": top_fraction,
        "cohort_size": len(cohort),
        "identification": {rep.index: rep.rate for rep in ident},
        "aggregates": {k: agg[k] for k in ("seeds", "config_digest", "mean_final", "mean_wall_time")},
    }
    with open(dest / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


# ---------------------------------------------------------------------------
# Plot data


def emit_plots(out_dir, threshold: int = DEFAULT_COHORT_THRESHOLD, top_fraction: float = DEFAULT_TOP_FRACTION,
               baseline: str | None = None) -> list[Path]:
    """Per-figure delimited data from a suite (variant subdirectories) or a single campaign directory."""
    root = Path(out_dir)
    variant_dirs = sorted(p for p in root.iterdir() if p.is_dir() and any(p.glob("run_*"))) if root.is_dir() else []
    if any(root.glob("run_*")):
        variant_dirs = [root]
    if not variant_dirs:
        raise FileNotFoundError(f"no runs found in {out_dir}")
    by_variant = {(p.name if p != root else "campaign"): load_runs(p) for p in variant_dirs}
    dest = root / "plots"
    dest.mkdir(exist_ok=True)
    written = []

    path = dest / "population_vs_time.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "t_days", "mean_total", "std_total", "config_digest"])
        for name, runs in by_variant.items():
            agg = aggregates(runs)
            for t, m, s in zip(agg["times"], agg["mean_series"], agg["std_series"]):
                w.writerow([name, repr(float(t)), repr(m[0]), repr(s[0]), ";".join(agg["config_digest"])])
    written.append(path)

    path = dest / "scatter_fmm_csi.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "seed", "id", "percentile_FMM", "percentile_CSI", "config_digest"])
        for name, runs in by_variant.items():
            for r in runs:
                if not (r.rankings.get("FMM") and r.rankings.get("CSI")):
                    continue
                members = {i for i, c in r.collision_counts.items() if c >= threshold}
                a, b = r.rankings["FMM"][-1], r.rankings["CSI"][-1]
                for row in ranking_comparison(a, b, members).rows():
                    w.writerow([name, r.seed, *row, r.config_digest])
    written.append(path)

    path = dest / "identification.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "index", "rate", "n_cohort", "n_hit", "config_digest"])
        for name, runs in by_variant.items():
            for idx in sorted(set().union(*(r.rankings for r in runs))):
                if not all(r.rankings.get(idx) for r in runs):
                    continue
                try:
                    rep = pooled_identification(runs, idx, threshold, top_fraction)
                except UndefinedRateError:
                    continue
                w.writerow([name, idx, repr(rep.rate), rep.n_cohort, rep.n_hit,
                            ";".join(sorted({r.config_digest for r in runs}))])
    written.append(path)

    path = dest / "cadence.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "t_days", "mean_removed_cumulative", "mean_total", "config_digest"])
        for name, runs in by_variant.items():
            agg = aggregates(runs)
            for k, t in enumerate(agg["times"]):
                removed = np.mean([sum(1 for r_t, _ in r.removals if r_t <= t) for r in runs])
                w.writerow([name, repr(float(t)), repr(float(removed)), repr(agg["mean_series"][k][0]),
                            ";".join(agg["config_digest"])])
    written.append(path)

    path = dest / "cost.csv"
    rows = suite_rows(by_variant, {k: ";".join(sorted({r.config_digest for r in v})) for k, v in by_variant.items()},
                      baseline if baseline in by_variant else None)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUITE_HEADER + ["reference_ratio"])
        for r in rows:
            w.writerow([r.name, repr(r.mean_final), repr(r.std_final), repr(r.mean_wall_time), repr(r.relative_cost),
                        r.config_digest, repr(REFERENCE_COST_RATIO)])
    written.append(path)
    return written


def load_runs_by_variant(root) -> dict[str, list[RunResult]]:
    root = Path(root)
    return {p.name: load_runs(p) for p in sorted(root.iterdir()) if p.is_dir() and any(p.glob("run_*"))}
