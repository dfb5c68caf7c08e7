"""Acceptance criteria C1-C12 at their stated tolerances.

Campaigns run on the bundled desk scenario (about 4800 objects, 50 years,
10 seeds). Each criterion prints one PASS/FAIL line, collected again in the
terminal summary. Set ADRSIM_ACCEPTANCE_CACHE=<dir> to keep finished runs on
disk so later sessions reload them instead of re-simulating.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from adrsim.conjunctions import (
    brute_force_pairs, build_cube_grid, object_total_probability, pair_probability,
)
from adrsim.engine import bundled_config, initial_catalog, load_run, run, save_run
from adrsim.events import EventKind
from adrsim.fragmentation import (
    Parent, classify_collision, nfrag_catastrophic, nfrag_noncatastrophic, sample_fragments,
)
from adrsim.reporting import REFERENCE_COST_RATIO, paired_less, pooled_identification
from adrsim.risk import (
    epsilon1, epsilon2, g_inclination, shell_density, update_expectation,
)
from adrsim.catalog import ShellGrid

SEEDS = list(range(10))
COST_SEEDS = list(range(5))
THRESHOLD = 5
TOP = 0.005
INTERVALS = {"static": None, "30d": 30.0, "90d": 90.0, "180d": 180.0}

RESULTS: list[str] = []


def report(n, ok, msg):
    line = f"C{n:<2} {'PASS' if ok else 'FAIL'}  {msg}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def rel(a, b):
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------------------
# Shared campaigns


def _one(kind, name=None, **kw):
    return [dict(name=name or kind, kind=kind, **kw)]


def _topk(index, k, cadence=1):
    return dict(kind="TopKByIndex", k=k, cadence_years=cadence, index=index)


_ident = [dict(name="CSI", kind="CSI")]
for tag, iv in INTERVALS.items():
    _ident += [dict(name=f"MITRI_{tag}", kind="MITRI", density_interval_days=iv),
               dict(name=f"FMM_{tag}", kind="FMM", density_interval_days=iv)]

VARIANTS = {
    # baseline carries every tracker the identification criterion compares
    "none": dict(trackers=_ident, snapshot_years=[50]),
    "mitri1": dict(trackers=_one("MITRI"), policy=_topk("MITRI", 1)),
    "rand1": dict(trackers=[], policy=dict(kind="RandomK", k=1)),
    "rand5": dict(trackers=[], policy=dict(kind="RandomK", k=5)),
    "fmm5": dict(trackers=_one("FMM"), policy=_topk("FMM", 5)),
    "fmm5_m1": dict(trackers=_one("FMM", mass_exponent=1.0), policy=_topk("FMM", 5)),
    "fmm5_m0": dict(trackers=_one("FMM", mass_exponent=0.0), policy=_topk("FMM", 5)),
    "fmm5_c5": dict(trackers=_one("FMM"), policy=_topk("FMM", 5, 5)),
    "fmm5_c10": dict(trackers=_one("FMM"), policy=_topk("FMM", 5, 10)),
    "fmm1": dict(trackers=_one("FMM"), policy=_topk("FMM", 1)),
    "fmm1_50kg": dict(trackers=_one("FMM", filter_min_mass=50.0), policy=_topk("FMM", 1)),
    "fmm5_50kg": dict(trackers=_one("FMM", filter_min_mass=50.0), policy=_topk("FMM", 5)),
    "cost_mitri": dict(trackers=_one("MITRI"), snapshot_years=[]),
    "cost_fmm": dict(trackers=_one("FMM"), snapshot_years=[]),
}

_memo: dict = {}


def desk():
    return bundled_config("desk")


def variant_config(name):
    d = desk().to_dict()
    d.update(VARIANTS[name])
    return type(desk()).from_dict(d)


def runs_for(name, seeds=SEEDS):
    cfg = variant_config(name)
    cache = os.environ.get("ADRSIM_ACCEPTANCE_CACHE")
    cat = None
    out = []
    for s in seeds:
        key = (cfg.digest(), s)
        if key not in _memo:
            d = Path(cache) / f"{name}_{cfg.digest()}" if cache else None
            if d is not None and (d / f"run_{s}" / "manifest.json").exists():
                _memo[key] = load_run(d / f"run_{s}")
            else:
                cat = initial_catalog(cfg) if cat is None else cat
                _memo[key] = run(cfg, s, cat)
                if d is not None:
                    save_run(_memo[key], d, cfg)
        out.append(_memo[key])
    return out


def finals(name, seeds=SEEDS):
    return np.array([r.final_population for r in runs_for(name, seeds)], float)


# ---------------------------------------------------------------------------
# C1


def test_c1_equation_oracles():
    tol = 1e-9
    checks = {
        "g(0)": (g_inclination(0.0), 1 / 1.6),
        "g(pi/2)": (g_inclination(math.pi / 2), 1.3 / 1.6),
        "g(pi)": (g_inclination(math.pi), 1.0),
        "pair P": (pair_probability(50.0, 10.0, 1e-5, 432000.0), 10.0 * 1e-5 * 432000.0 / 50.0**3),
        "P_C": (object_total_probability([0.1, 0.2, 0.3]), 1 - 0.9 * 0.8 * 0.7),
        "N_C 100kg": (nfrag_catastrophic(0.1, 50.0, 50.0), 0.1 * 0.1**-0.5 * 100**0.75),
        "N_C 1000kg": (nfrag_catastrophic(0.1, 500.0, 500.0), 0.1 * 0.1**-0.5 * 1000**0.75),
        "N_NC": (nfrag_noncatastrophic(0.1, 10.0, 10.0), 0.1 * 0.1**-0.5 * 1000**0.75),
        "eps1 rand=P": (epsilon1(0.04, 0.04, 0.5, 0.09), 0.5 + 0.5 / 0.3 * 0.2),
        "eps2 equal": (epsilon2(0.3, 0.3), 1.0),
        "eps2 half": (epsilon2(0.5, 0.25), 0.5),
    }
    E, seq = None, []
    for x in [0, 1, 1, 1]:
        E = update_expectation(E, x)
        seq.append(E)
    bad = [k for k, (a, b) in checks.items() if rel(a, b) > tol]
    bad += [] if seq == [0, 0.5, 0.75, 0.875] else ["E_n sequence"]
    bad += [] if epsilon2(0.1, 0.5) == 0.0 else ["eps2 clamp"]
    grid = ShellGrid()
    c = np.zeros(grid.n_shells)
    c[4] = 100
    bad += [] if rel(shell_density(2 * c, grid)[4], 2 * shell_density(c, grid)[4]) <= tol else ["density doubling"]
    bad += [] if abs(checks["N_C 1000kg"][0] - 56.23) < 0.01 else ["56.23"]
    bad += [] if abs(checks["pair P"][0] - 3.456e-4) < 1e-12 and abs(checks["P_C"][0] - 0.496) < 1e-12 else ["ex"]
    report(1, not bad, f"{len(checks) + 4} closed-form oracles at 1e-9 relative" + (f", failing {bad}" if bad else ""))


# ---------------------------------------------------------------------------
# C2, C3


@pytest.mark.slow
def test_c2_determinism():
    cfg = desk()
    cat = initial_catalog(cfg)
    a = run(cfg, 0, cat, threads=1)
    b = run(cfg, 0, cat, threads=4)
    same = a.same_outcome(b)
    report(2, same, f"desk seed 0 twice (threads 1 vs 4): series, {len(a.log)} events and "
                    f"{sum(len(v) for v in a.rankings.values())} ranking snapshots identical={same}")


@pytest.mark.slow
def test_c3_bookkeeping():
    r = runs_for("none")[0]
    s = r.steps
    net = s[:, 8] + s[:, 9] - s[:, 2] - s[:, 3] - s[:, 4] - s[:, 5] - s[:, 7]
    ok = bool(np.all(s[:, 1] == s[:, 0] + net) and np.all(s[1:, 0] == s[:-1, 1]) and len(s) == 3653)
    report(3, ok, f"population identity exact over all {len(s)} steps of a 50-year run")


# ---------------------------------------------------------------------------
# C4 - C8, C12


@pytest.mark.slow
def test_c4_risk_vs_random():
    base, mitri, r1, r5 = (finals(v) for v in ("none", "mitri1", "rand1", "rand5"))
    p = paired_less(mitri, r5)
    d1, d5 = rel(r1.mean(), base.mean()), rel(r5.mean(), base.mean())
    ok = mitri.mean() < r5.mean() and p < 0.05 and d1 < 0.05 and d5 < 0.05
    report(4, ok, f"MITRI k=1 {mitri.mean():.0f} < RandomK k=5 {r5.mean():.0f} (paired p={p:.2g}); "
                  f"RandomK vs baseline {base.mean():.0f}: k=1 {100 * d1:.1f}%, k=5 {100 * d5:.1f}% (< 5%)")


@pytest.mark.slow
def test_c5_identification():
    runs = runs_for("none")
    rates = {}
    for tag in INTERVALS:
        for idx in ("MITRI", "FMM"):
            rates[idx, tag] = pooled_identification(runs, f"{idx}_{tag}", THRESHOLD, TOP).rate
    csi = pooled_identification(runs, "CSI", THRESHOLD, TOP)
    ok = all(rates["FMM", t] >= rates["MITRI", t] for t in INTERVALS)
    txt = ", ".join(f"{t}: FMM {rates['FMM', t]:.2f} / MITRI {rates['MITRI', t]:.2f}" for t in INTERVALS)
    report(5, ok, f"cohort {csi.n_cohort} (>= {THRESHOLD} collisions) at top 0.5%: {txt}; CSI {csi.rate:.2f}")


@pytest.mark.slow
def test_c6_cost_ordering():
    fmm = np.mean([r.wall_time for r in runs_for("cost_fmm", COST_SEEDS)])
    mitri = np.mean([r.wall_time for r in runs_for("cost_mitri", COST_SEEDS)])
    report(6, fmm > mitri, f"wall time FMM-static {fmm:.1f} s vs MITRI-static {mitri:.1f} s, ratio "
                           f"{fmm / mitri:.2f}x (literature {REFERENCE_COST_RATIO}x)")


@pytest.mark.slow
def test_c7_mass_term():
    base, lin, none = finals("fmm5"), finals("fmm5_m1"), finals("fmm5_m0")
    p = paired_less(base, none)
    ok = none.mean() > lin.mean() >= base.mean() and p < 0.05
    report(7, ok, f"FMM k=5 final means: M^0 {none.mean():.0f} > M^1 {lin.mean():.0f} >= M^1.75 "
                  f"{base.mean():.0f}; M^0 vs M^1.75 paired p={p:.2g}")


@pytest.mark.slow
def test_c8_cadence():
    a, b, c = finals("fmm5"), finals("fmm5_c5"), finals("fmm5_c10")
    ok = a.mean() < b.mean() < c.mean()
    report(8, ok, f"FMM k=5 final means: annual {a.mean():.0f} < 5-year {b.mean():.0f} < 10-year {c.mean():.0f}")


@pytest.mark.slow
def test_c12_filter():
    parts, ok = [], True
    for k, (lo, hi) in {1: ("fmm1", "fmm1_50kg"), 5: ("fmm5", "fmm5_50kg")}.items():
        a, b = finals(lo), finals(hi)
        d = rel(b.mean(), a.mean())
        ok &= d < 0.10 and b.mean() >= a.mean()
        parts.append(f"k={k}: 10 kg {a.mean():.0f}, 50 kg {b.mean():.0f} ({100 * d:.1f}%)")
    report(12, ok, "; ".join(parts))


# ---------------------------------------------------------------------------
# C9 - C11


def test_c9_degenerate_equivalence():
    cfg = desk().with_updates(horizon_years=5.0, trackers=[
        dict(name="MITRI", kind="MITRI"),
        dict(name="FMM", kind="FMM", fictitious=False, filtering=False, density_interval_days=None)])
    r = run(cfg, 3)
    a, b = r.accumulators["MITRI"], r.accumulators["FMM"]
    same = all(np.array_equal(a[k], b[k], equal_nan=True) for k in a)
    n_coll = len(r.log.of_kind(EventKind.Collision))
    ok = same and n_coll > 0 and np.any(a["D_acc"] > 0)
    report(9, ok, f"{len(a['ids'])} objects, {n_coll} collisions over 5 years: all accumulators bit-equal={same}")


def test_c10_cube_oracle_and_scaling():
    agree = True
    for seed in range(5):
        pos = np.random.default_rng(seed).uniform(-300, 300, (1000, 3))
        _, pairs = build_cube_grid(pos, 50.0)
        agree &= {tuple(p) for p in pairs.tolist()} == brute_force_pairs(pos, 50.0)

    # interleave the two sizes and keep the best of many repeats to damp scheduler noise
    big = np.random.default_rng(0).uniform(-7000, 7000, (100_000, 3))
    small = big[:10_000].copy()
    t = {10_000: np.inf, 100_000: np.inf}
    for _ in range(25):
        for n, pos in ((10_000, small), (100_000, big)):
            t0 = time.perf_counter()
            build_cube_grid(pos, 50.0)
            t[n] = min(t[n], time.perf_counter() - t0)
    ratio = t[100_000] / t[10_000]
    report(10, agree and ratio < 15, f"brute-force agreement on 5 x 1000 objects={agree}; "
                                     f"build time ratio 1e5/1e4 = {ratio:.1f} (< 15)")


def test_c11_sbm_sampling():
    rng = np.random.default_rng(2024)
    r0 = np.array([7000.0, 0, 0])
    v0 = np.array([0, 7.5, 0])
    cases = [(400.0, 600.0, 10.0), (0.05, 2000.0, 10.0)]
    worst, mass_ok = 0.0, True
    for mp, mt, v in cases:
        col = classify_collision(mp, mt, v)
        parents = (Parent(1, mp, 0.5, r0, v0 + [v, 0, 0]), Parent(2, mt, 3.0, r0, v0))
        outs = [sample_fragments(col, parents, 0.1, rng) for _ in range(100)]
        mass_ok &= all(o.masses.sum() <= (mp + mt) * (1 + 1e-12) for o in outs)
        for thr in (0.1, 0.2, 0.5, 1.0):
            expect = float(nfrag_catastrophic(thr, mp, mt) if col.catastrophic
                           else nfrag_noncatastrophic(thr, mp, v))
            mean = np.mean([np.sum(o.lengths >= thr) for o in outs])
            # half a fragment of slack for rounding the total before sampling
            worst = max(worst, (abs(mean - expect) - 0.5) / math.sqrt(expect / 100))
    report(11, worst <= 3 and mass_ok, f"worst deviation {max(worst, 0):.2f} sigma over 100 breakups x 4 thresholds "
                                       f"x 2 regimes; fragment mass within parents={mass_ok}")
