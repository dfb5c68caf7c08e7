"""Simulation loop, seeded ensembles and run persistence."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .adr import PolicyKind, RemovalPolicy, removal_due, select_removals
from .catalog import (
    Catalog,
    ClassSpec,
    ObjectClass,
    PopulationSpec,
    ShellGrid,
    apply_properties,
    load_catalog,
    synth_population,
)
from .conjunctions import find_conjunctions, total_probability_by_object
from .constants import DAYS_PER_YEAR, EARTH, SECONDS_PER_DAY
from .events import (
    ConsistencyError,
    EventConfig,
    EventLog,
    EventKind,
    IdCounter,
    apply_pmd,
    collision_outcome,
    commit_timestep,
    draw_collisions,
    draw_explosions,
    explosion_outcome,
    generate_launches,
)
from .propagation import (
    DEFAULT_LIFETIME_CAP,
    DEFAULT_REENTRY_ALTITUDE,
    LifetimeTable,
    NumericError,
    load_atmosphere,
    propagate_elements,
)
from .risk import Ranking, RiskTracker, TrackerConfig, read_rankings, row_mapping, write_rankings
from .rng import CounterStream


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class PopulationConfig:
    catalog_file: str | None = None  # TLE or snapshot CSV; overrides the synthetic spec
    properties_file: str | None = None
    synthetic: PopulationSpec = field(default_factory=PopulationSpec)
    population_seed: int = 0  # the initial catalog is shared by every run seed


def _default_trackers():
    return [TrackerConfig("CSI", "CSI"), TrackerConfig("MITRI", "MITRI"), TrackerConfig("FMM", "FMM")]


@dataclass
class SimulationConfig:
    horizon_years: float = 200.0
    timestep_days: float = 5.0
    cube_edge_km: float = 50.0
    shell_floor_km: float = 200.0
    shell_width_km: float = 50.0
    shell_ceiling_km: float = 2000.0
    atmosphere_file: str | None = None
    atmosphere_scale: float = 1.0
    reentry_altitude_km: float = DEFAULT_REENTRY_ALTITUDE
    lifetime_cap_years: float = DEFAULT_LIFETIME_CAP
    sigma_scale: float = 1.0  # multiplies the hard-body cross-section
    conjunction_samples: int = 1
    events: EventConfig = field(default_factory=EventConfig)
    trackers: list = field(default_factory=_default_trackers)
    policy: RemovalPolicy = field(default_factory=RemovalPolicy)
    ranking_interval_years: float = 1.0
    record_every: int = 10
    snapshot_years: list | None = None  # ranking years to keep; None keeps all
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "results"
    population: PopulationConfig = field(default_factory=PopulationConfig)
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        errs = []
        if not self.horizon_years >= 0:
            errs.append("horizon_years must be non-negative")
        if not self.timestep_days > 0:
            errs.append("timestep_days must be positive")
        if not self.cube_edge_km > 0:
            errs.append("cube_edge_km must be positive")
        if not self.sigma_scale > 0:
            errs.append("sigma_scale must be positive")
        if self.conjunction_samples < 1:
            errs.append("conjunction_samples must be >= 1")
        if not self.ranking_interval_years > 0:
            errs.append("ranking_interval_years must be positive")
        if self.record_every < 1:
            errs.append("record_every must be >= 1")
        if self.threads < 1:
            errs.append("threads must be >= 1")
        if self.atmosphere_scale < 0:
            errs.append("atmosphere_scale must be non-negative")
        if len(set(self.seeds)) != len(self.seeds):
            errs.append("seeds must be distinct")
        names = [t.name for t in self.trackers]
        if len(set(names)) != len(names):
            errs.append("tracker names must be unique")
        if self.policy.kind_enum == PolicyKind.TopKByIndex and self.policy.index not in names:
            errs.append(f"policy index {self.policy.index!r} is not a configured tracker")
        try:
            self.shell_grid
        except ValueError as e:
            errs.append(str(e))
        if errs:
            raise ConfigError("; ".join(errs))

    @property
    def shell_grid(self) -> ShellGrid:
        return ShellGrid(self.shell_floor_km, self.shell_width_km, self.shell_ceiling_km)

    @property
    def horizon_days(self) -> float:
        return self.horizon_years * DAYS_PER_YEAR

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon_days / self.timestep_days - 1e-9))

    def to_dict(self) -> dict:
        return _to_plain(self)

    def digest(self) -> str:
        d = self.to_dict()
        for k in ("seeds", "output_dir", "threads"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationConfig":
        try:
            return _build(cls, data or {}, "config")
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

    def with_updates(self, **kw) -> "SimulationConfig":
        d = self.to_dict()
        d.update(kw)
        return SimulationConfig.from_dict(d)


_NESTED = {
    (SimulationConfig, "events"): EventConfig,
    (SimulationConfig, "policy"): RemovalPolicy,
    (SimulationConfig, "population"): PopulationConfig,
    (SimulationConfig, "trackers"): [TrackerConfig],
    (PopulationConfig, "synthetic"): PopulationSpec,
    (PopulationSpec, "active"): ClassSpec,
    (PopulationSpec, "derelict"): ClassSpec,
    (PopulationSpec, "rocket_body"): ClassSpec,
    (PopulationSpec, "debris"): ClassSpec,
}


def _build(cls, data, path):
    if isinstance(data, cls):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    kw = {}
    for k, v in data.items():
        sub = _NESTED.get((cls, k))
        if isinstance(sub, list):
            if not isinstance(v, list):
                raise ConfigError(f"{path}.{k}: expected a list")
            v = [_build(sub[0], x, f"{path}.{k}[{i}]") for i, x in enumerate(v)]
        elif sub is ClassSpec and isinstance(v, list):
            v = [_build(sub, x, f"{path}.{k}[{i}]") for i, x in enumerate(v)]
        elif sub is not None:
            v = _build(sub, v, f"{path}.{k}")
        elif isinstance(v, list) and cls is ClassSpec:
            v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        kw[k] = v
    return cls(**kw)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    return obj


def load_config(path: str | os.PathLike) -> SimulationConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    return SimulationConfig.from_dict(data)


def bundled_config(name: str = "desk") -> SimulationConfig:
    text = resources.files("adrsim").joinpath(f"data/{name}.yaml").read_text()
    return SimulationConfig.from_dict(yaml.safe_load(text))


def apply_delta(config: SimulationConfig, assignments: dict) -> SimulationConfig:
    """Apply dotted-path overrides such as ``{"policy.k": 5, "trackers.1.kind": "FMM"}``."""
    d = config.to_dict()
    for path, value in assignments.items():
        node = d
        keys = path.split(".")
        for key in keys[:-1]:
            node = node[int(key)] if isinstance(node, list) else node.setdefault(key, {})
        last = keys[-1]
        if isinstance(node, list):
            node[int(last)] = value
        else:
            node[last] = value
    return SimulationConfig.from_dict(d)


def parse_variant(text: str) -> tuple[str, dict]:
    """``name=path=value,path=value`` -> (name, {path: value}); values are YAML scalars."""
    name, sep, rest = text.partition("=")
    if not sep or not name:
        raise ConfigError(f"variant {text!r} must look like name=path=value[,path=value]")
    out = {}
    for part in filter(None, rest.split(",")):
        path, sep, value = part.partition("=")
        if not sep:
            raise ConfigError(f"variant {name}: {part!r} is not path=value")
        out[path.strip()] = yaml.safe_load(value)
    return name, out


# ---------------------------------------------------------------------------
# Results


SERIES_HEADER = ["t_days", "n_total", "n_active", "n_derelict", "n_rb", "n_debris"]
TALLY_FIELDS = ("n_before", "n_after", "decayed", "collided_parents", "exploded", "pmd_success",
                "pmd_failure", "removed", "fragments", "launched", "collisions")


@dataclass
class RunResult:
    seed: int
    config_digest: str
    times: np.ndarray
    series: np.ndarray  # (n_records, 5): total, active, derelict, rocket body, debris
    log: EventLog
    rankings: dict  # tracker name -> list[Ranking]
    collision_counts: dict  # object id -> triggered collisions
    wall_time: float
    steps: np.ndarray | None = None  # (n_steps, len(TALLY_FIELDS)) per-step bookkeeping
    accumulators: dict = field(default_factory=dict)  # tracker name -> {"ids": ..., "D_acc": ...}

    @property
    def final_population(self) -> int:
        return int(self.series[-1, 0])

    @property
    def removals(self) -> list[tuple[float, int]]:
        return [(r.t, r.id_a) for r in self.log.of_kind(EventKind.Removal)]

    def same_outcome(self, other: "RunResult") -> bool:
        """Bit-identical comparison ignoring wall time."""
        if not (self.seed == other.seed and np.array_equal(self.times, other.times)
                and np.array_equal(self.series, other.series) and self.log == other.log
                and self.collision_counts == other.collision_counts):
            return False
        if set(self.rankings) != set(other.rankings):
            return False
        for k in self.rankings:
            a, b = self.rankings[k], other.rankings[k]
            if len(a) != len(b):
                return False
            for x, y in zip(a, b):
                if x.epoch != y.epoch or not np.array_equal(x.ids, y.ids) or not np.array_equal(x.values, y.values):
                    return False
        return True


def class_counts(catalog: Catalog) -> list[int]:
    c = np.bincount(catalog.cls.astype(np.int64), minlength=4)
    return [len(catalog), int(c[ObjectClass.ActivePayload]), int(c[ObjectClass.DerelictPayload]),
            int(c[ObjectClass.RocketBody]), int(c[ObjectClass.Debris])]


def initial_catalog(config: SimulationConfig) -> Catalog:
    pc = config.population
    if pc.catalog_file:
        cat = load_catalog(pc.catalog_file)
        if pc.properties_file:
            with open(pc.properties_file) as fh:
                cat = apply_properties(cat, fh.read())
    else:
        cat = synth_population(pc.synthetic, pc.population_seed)
    return Catalog(*(getattr(cat, c) for c in Catalog.columns), epoch=0.0)


def _crossed(t: float, dt: float, period: float) -> bool:
    eps = 1e-9
    return math.floor(t / period + eps) > math.floor(max(t - dt, 0.0) / period + eps)


# ---------------------------------------------------------------------------
# The loop


def run(config: SimulationConfig, seed: int, catalog: Catalog | None = None, threads: int | None = None) -> RunResult:
    """Simulate one seed. Identical (config, seed) gives identical results."""
    config.validate()
    threads = config.threads if threads is None else threads
    catalog = initial_catalog(config) if catalog is None else catalog
    grid = config.shell_grid
    dt = config.timestep_days
    dt_s = dt * SECONDS_PER_DAY
    ev = config.events
    if ev.timestep != dt:
        ev = dataclasses.replace(ev, timestep=dt)
    atm = load_atmosphere(config.atmosphere_file)
    if config.atmosphere_scale != 1.0:
        atm = dataclasses.replace(atm, scale=config.atmosphere_scale)
    table = LifetimeTable(atm, config.reentry_altitude_km, config.lifetime_cap_years)
    stream = CounterStream(seed)
    trackers = {tc.name: RiskTracker(tc, catalog, grid, table, dt) for tc in config.trackers}
    template = catalog.take(np.flatnonzero(catalog.cls == ObjectClass.ActivePayload))
    launch_rate = ev.resolved_launch_rate(catalog)
    ids = IdCounter.for_catalog(catalog)
    log = EventLog()
    rankings: dict[str, list[Ranking]] = {k: [] for k in trackers}
    counts: dict[int, int] = {}
    times, series = [0.0], [class_counts(catalog)]
    n_steps = config.n_steps
    steps = np.zeros((n_steps, len(TALLY_FIELDS)), np.int64)
    period_rank = config.ranking_interval_years * DAYS_PER_YEAR
    keep_years = None if config.snapshot_years is None else {int(y) for y in config.snapshot_years}
    r_stop = EARTH.earth_radius + config.reentry_altitude_km
    pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def each(fn):
        items = list(trackers.values())
        if pool is None:
            return [fn(x) for x in items]
        return list(pool.map(fn, items))

    t0 = time.perf_counter()
    try:
        for s in range(1, n_steps + 1):
            t_prev, t = (s - 1) * dt, s * dt
            n_before = len(catalog)
            # density refresh
            each(lambda tr: tr.refresh_density(catalog, t_prev))
            # propagate with station-keeping for active payloads still on mission
            active = catalog.cls == ObjectClass.ActivePayload
            mission = np.where(active, catalog.mission - dt / DAYS_PER_YEAR, catalog.mission)
            hold = active & (mission > 0) & ev.station_keeping
            try:
                a, raan, argp, ma, decayed = propagate_elements(
                    catalog.a, catalog.e, catalog.inc, catalog.raan, catalog.argp, catalog.ma, catalog.bc,
                    dt_s, EARTH, atm, config.reentry_altitude_km, hold)
            except (NumericError, ValueError) as e:
                raise NumericError(f"step {s} (t = {t} d): {e}") from e
            a = np.where(decayed, np.maximum(a, r_stop), a)
            catalog = Catalog(catalog.ids, catalog.cls, a, catalog.e, catalog.inc, raan, argp, ma, catalog.mass,
                              catalog.radius, catalog.area, catalog.bc,
                              np.where(active, np.maximum(mission, 0.0), np.nan), catalog.constellation,
                              catalog.born, epoch=t, check=False)
            decayed_ids = catalog.ids[decayed]
            live = catalog.take(np.flatnonzero(~decayed)) if decayed.any() else catalog
            m = row_mapping(catalog.ids, live.ids)
            each(lambda tr: tr.realign(live, m))
            # conjunctions
            pairs, pos, vel, neigh = find_conjunctions(
                live, config.cube_edge_km, dt_s, stream.at("phase", s), stream.at("pair", s),
                config.sigma_scale, config.conjunction_samples)
            p_total = total_probability_by_object(len(live), pairs.rows_i, pairs.rows_j, pairs.probability)
            each(lambda tr: tr.observe(live, t, pairs, neigh, p_total))
            # event draws
            hits = draw_collisions(pairs, ev, stream.at("avoid", s), live)
            coll = [collision_outcome(hits, k, live, pos, vel,
                                      stream.generator("frag", s, int(hits.ids_i[k]), int(hits.ids_j[k])),
                                      ev.threshold_length) for k in range(len(hits))]
            involved = {int(x) for x in np.concatenate([hits.ids_i, hits.ids_j])}
            boom = [int(i) for i in draw_explosions(live, ev, stream.at("explode", s)) if int(i) not in involved]
            expl = [explosion_outcome(int(live.index_of([i])[0]), live, pos, vel,
                                      stream.generator("burst", s, i), ev.threshold_length, ev.explosion_scale)
                    for i in boom]
            pmd = apply_pmd(live, ev, stream.at("pmd", s))
            launches = generate_launches(dt, ev, template, stream.at("launch", s), ids.next_launch, t, launch_rate)
            ids.launches(len(launches))
            each(lambda tr: tr.observe_events(live, coll))
            for out in coll:
                for pid in out.parent_ids:
                    counts[int(pid)] = counts.get(int(pid), 0) + 1
            # ranking and ADR selection
            rank_now = _crossed(t, dt, period_rank)
            due = config.policy.active and removal_due(t, config.policy, dt)
            removals = np.zeros(0, np.int64)
            if rank_now or due:
                snap = {name: tr.ranking(live, t) for name, tr in trackers.items()}
                year = int(math.floor(t / DAYS_PER_YEAR + 1e-9))
                if rank_now and (keep_years is None or year in keep_years):
                    for name, rk in snap.items():
                        rankings[name].append(rk)
                if due:
                    gone = set(involved) | set(boom) | {int(x) for x in pmd[0]}
                    mask = ~np.isin(live.ids, np.fromiter(gone, np.int64, len(gone)))
                    pool_cat = live.take(np.flatnonzero(mask))
                    removals = select_removals(pool_cat, config.policy, snap.get(config.policy.index),
                                               stream.generator("adr", s))
            # commit
            catalog, tally, _ = commit_timestep(
                catalog, t, log, ids, decays=decayed_ids, collisions=coll, explosions=expl, pmd=pmd,
                launches=launches, removals=removals, reentry_altitude=config.reentry_altitude_km)
            if len(catalog) != n_before + tally.net:
                raise ConsistencyError(f"population bookkeeping broke at step {s}")
            m = row_mapping(live.ids, catalog.ids)
            each(lambda tr: tr.realign(catalog, m))
            steps[s - 1] = [n_before, len(catalog), tally.decayed, tally.collided_parents, tally.exploded,
                            tally.pmd_success, tally.pmd_failure, tally.removed, tally.fragments, tally.launched,
                            tally.collisions]
            if s % config.record_every == 0 or s == n_steps:
                times.append(t)
                series.append(class_counts(catalog))
    finally:
        if pool is not None:
            pool.shutdown()
    wall = time.perf_counter() - t0
    acc = {name: {"ids": tr.ids.copy(), **tr.accumulators()} for name, tr in trackers.items()}
    return RunResult(int(seed), config.digest(), np.array(times), np.array(series, np.int64), log, rankings,
                     counts, max(wall, 1e-9), steps, acc)


def snapshot(config: SimulationConfig, catalog: Catalog | None = None, window_days: float = DAYS_PER_YEAR,
             seed: int = 0) -> dict[str, Ranking]:
    """One-shot index rankings: observe the catalog for ``window_days`` with no events.

    Objects that decay during the window drop out; nothing collides, explodes
    or launches, so the rankings only reflect the starting population.
    """
    config.validate()
    catalog = initial_catalog(config) if catalog is None else catalog
    dt = config.timestep_days
    dt_s = dt * SECONDS_PER_DAY
    atm = load_atmosphere(config.atmosphere_file)
    if config.atmosphere_scale != 1.0:
        atm = dataclasses.replace(atm, scale=config.atmosphere_scale)
    table = LifetimeTable(atm, config.reentry_altitude_km, config.lifetime_cap_years)
    stream = CounterStream(seed)
    trackers = {tc.name: RiskTracker(tc, catalog, config.shell_grid, table, dt) for tc in config.trackers}
    n = max(1, int(math.ceil(window_days / dt - 1e-9)))
    for s in range(1, n + 1):
        t = s * dt
        for tr in trackers.values():
            tr.refresh_density(catalog, t - dt)
        a, raan, argp, ma, decayed = propagate_elements(
            catalog.a, catalog.e, catalog.inc, catalog.raan, catalog.argp, catalog.ma, catalog.bc,
            dt_s, EARTH, atm, config.reentry_altitude_km, catalog.cls == ObjectClass.ActivePayload)
        catalog = Catalog(catalog.ids, catalog.cls, a, catalog.e, catalog.inc, raan, argp, ma, catalog.mass,
                          catalog.radius, catalog.area, catalog.bc, catalog.mission, catalog.constellation,
                          catalog.born, epoch=t, check=False)
        if decayed.any():
            catalog = catalog.take(np.flatnonzero(~decayed))
            for tr in trackers.values():
                tr.realign(catalog)
        if len(catalog) == 0:
            raise ConfigError("every object decayed inside the ranking window")
        pairs, _, _, neigh = find_conjunctions(
            catalog, config.cube_edge_km, dt_s, stream.at("phase", s), stream.at("pair", s),
            config.sigma_scale, config.conjunction_samples)
        p_total = total_probability_by_object(len(catalog), pairs.rows_i, pairs.rows_j, pairs.probability)
        for tr in trackers.values():
            tr.observe(catalog, t, pairs, neigh, p_total)
    return {name: tr.ranking(catalog, n * dt) for name, tr in trackers.items()}


# ---------------------------------------------------------------------------
# Ensembles


@dataclass
class CampaignResult:
    config_digest: str
    runs: list  # RunResult sorted by seed

    @property
    def seeds(self) -> list[int]:
        return [r.seed for r in self.runs]

    @property
    def times(self) -> np.ndarray:
        return self.runs[0].times

    @property
    def mean_series(self) -> np.ndarray:
        return np.mean([r.series for r in self.runs], axis=0)

    @property
    def std_series(self) -> np.ndarray:
        return np.std([r.series for r in self.runs], axis=0)

    @property
    def final_populations(self) -> np.ndarray:
        return np.array([r.final_population for r in self.runs], float)

    @property
    def mean_final(self) -> float:
        return float(self.final_populations.mean())

    @property
    def mean_wall_time(self) -> float:
        return float(np.mean([r.wall_time for r in self.runs]))

    def cohort(self, threshold: int) -> set:
        from .reporting import ground_truth_cohort

        return ground_truth_cohort(self.runs, threshold).members


def campaign(config: SimulationConfig, seeds=None, workers: int = 1, catalog: Catalog | None = None) -> CampaignResult:
    """Run every seed; aggregates do not depend on the order seeds are given in."""
    seeds = list(config.seeds if seeds is None else seeds)
    if not seeds:
        raise ConfigError("campaign needs at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("duplicate seeds in campaign")
    catalog = initial_catalog(config) if catalog is None else catalog
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as ex:
            runs = list(ex.map(run, [config] * len(seeds), seeds, [catalog] * len(seeds)))
    else:
        runs = [run(config, s, catalog) for s in seeds]
    runs.sort(key=lambda r: r.seed)
    return CampaignResult(config.digest(), runs)


# ---------------------------------------------------------------------------
# Persistence


def save_run(result: RunResult, out_dir, config: SimulationConfig | None = None) -> Path:
    d = Path(out_dir) / f"run_{result.seed}"
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "population.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for t, row in zip(result.times, result.series):
            w.writerow([repr(float(t)), *map(int, row)])
    with open(d / "events.csv", "w", newline="") as fh:
        result.log.write(fh)
    for name, rks in result.rankings.items():
        with open(d / f"rankings_{name}.csv", "w", newline="") as fh:
            write_rankings(fh, rks)
    with open(d / "collisions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "n_collisions"])
        for k in sorted(result.collision_counts):
            w.writerow([k, result.collision_counts[k]])
    if result.steps is not None:
        with open(d / "steps.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TALLY_FIELDS)
            w.writerows(result.steps.tolist())
    manifest = {
        "seed": result.seed,
        "config_digest": result.config_digest,
        "wall_time": result.wall_time,
        "trackers": sorted(result.rankings),
        "final_counts": dict(zip(SERIES_HEADER[1:], map(int, result.series[-1]))),
    }
    if config is not None:
        manifest["config"] = config.to_dict()
    with open(d / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return d


def load_run(path) -> RunResult:
    d = Path(path)
    with open(d / "manifest.json") as fh:
        m = json.load(fh)
    with open(d / "population.csv") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != SERIES_HEADER:
        raise ConfigError(f"{d}: population header mismatch")
    times = np.array([float(r[0]) for r in rows[1:]])
    series = np.array([[int(x) for x in r[1:]] for r in rows[1:]], np.int64)
    with open(d / "events.csv") as fh:
        log = EventLog.read(fh)
    rankings = {}
    for name in m["trackers"]:
        with open(d / f"rankings_{name}.csv") as fh:
            rankings[name] = read_rankings(fh)
    counts = {}
    with open(d / "collisions.csv") as fh:
        for r in list(csv.reader(fh))[1:]:
            counts[int(r[0])] = int(r[1])
    steps = None
    if (d / "steps.csv").exists():
        with open(d / "steps.csv") as fh:
            steps = np.array([[int(x) for x in r] for r in list(csv.reader(fh))[1:]], np.int64)
    return RunResult(int(m["seed"]), m["config_digest"], times, series, log, rankings, counts,
                     float(m["wall_time"]), steps)


def load_runs(out_dir) -> list[RunResult]:
    d = Path(out_dir)
    dirs = sorted(p for p in d.glob("run_*") if (p / "manifest.json").exists()) if d.is_dir() else []
    if not dirs:
        raise FileNotFoundError(f"no runs found in {out_dir}")
    runs = [load_run(p) for p in dirs]
    runs.sort(key=lambda r: r.seed)
    return runs
