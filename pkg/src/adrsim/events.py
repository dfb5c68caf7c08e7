"""Per-step stochastic events and the deterministic commit.

Collisions, explosions, launches and post-mission disposal are drawn from a
snapshot, then applied in a fixed order: decays, collisions, explosions,
PMD, launches, removals.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .catalog import Catalog, CatalogError, ObjectClass
from .conjunctions import PairSet
from .constants import DAYS_PER_YEAR, EARTH
from .fragmentation import (
    DEFAULT_THRESHOLD_LENGTH,
    FragmentationOutcome,
    Parent,
    classify_collision,
    explosion_fragments,
    sample_fragments,
)
from .rng import StepStream, generator_of, uniforms


class EventError(ValueError):
    pass


class ContractError(EventError):
    pass


class ConsistencyError(RuntimeError):
    pass


_CLASS_NAMES = {c.name: c for c in ObjectClass}


def _default_explosions():
    return {"RocketBody": 1e-4, "DerelictPayload": 1e-4}


@dataclass
class EventConfig:
    launch_rate: float | None = None  # objects/yr; None matches initial actives / mission lifetime
    explosion_prob: dict = field(default_factory=_default_explosions)  # per object per year, by class name
    pmd_success_prob: float = 0.9
    mission_lifetime: float = 8.0  # years
    avoidance_failure_prob: float = 0.01
    timestep: float = 5.0  # days
    threshold_length: float = DEFAULT_THRESHOLD_LENGTH  # m, smallest simulated fragment
    explosion_scale: float = 1.0
    station_keeping: bool = True

    def __post_init__(self):
        for name in ("pmd_success_prob", "avoidance_failure_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise EventError(f"{name} must lie in [0, 1]")
        if self.launch_rate is not None and self.launch_rate < 0:
            raise EventError("launch_rate must be non-negative")
        if not self.timestep > 0 or not self.mission_lifetime > 0 or not self.threshold_length > 0:
            raise EventError("timestep, mission_lifetime and threshold_length must be positive")
        if self.explosion_scale < 0:
            raise EventError("explosion_scale must be non-negative")
        for k, v in self.explosion_prob.items():
            if k not in _CLASS_NAMES:
                raise EventError(f"unknown object class {k!r} in explosion_prob")
            if not 0.0 <= v <= 1.0:
                raise EventError("explosion probabilities must lie in [0, 1]")

    def explosion_rates(self) -> np.ndarray:
        out = np.zeros(len(ObjectClass))
        for k, v in self.explosion_prob.items():
            out[_CLASS_NAMES[k]] = v
        return out

    def resolved_launch_rate(self, catalog: Catalog) -> float:
        if self.launch_rate is not None:
            return self.launch_rate
        return float(np.sum(catalog.cls == ObjectClass.ActivePayload)) / self.mission_lifetime


class EventKind(Enum):
    Collision = "Collision"
    Explosion = "Explosion"
    Launch = "Launch"
    PMDSuccess = "PMDSuccess"
    PMDFailure = "PMDFailure"
    Decay = "Decay"
    Removal = "Removal"


EVENT_HEADER = ["t_days", "kind", "id_a", "id_b", "n_fragments"]


@dataclass(frozen=True)
class EventRecord:
    t: float
    kind: EventKind
    id_a: int
    id_b: int | None = None
    n_fragments: int = 0


class EventLog:
    """Append-only, time-ordered list of event records."""

    def __init__(self, records=None):
        self.records: list[EventRecord] = list(records or [])

    def append(self, rec: EventRecord) -> None:
        if self.records and rec.t < self.records[-1].t:
            raise ConsistencyError("event log must be time-ordered")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other):
        return isinstance(other, EventLog) and self.records == other.records

    def of_kind(self, kind: EventKind) -> list[EventRecord]:
        return [r for r in self.records if r.kind == kind]

    def write(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_HEADER)
        for r in self.records:
            w.writerow([repr(float(r.t)), r.kind.value, r.id_a, "" if r.id_b is None else r.id_b, r.n_fragments])

    @classmethod
    def read(cls, fh) -> "EventLog":
        rows = csv.DictReader(fh)
        if rows.fieldnames != EVENT_HEADER:
            raise EventError("event log header mismatch")
        return cls(EventRecord(float(r["t_days"]), EventKind(r["kind"]), int(r["id_a"]),
                               None if r["id_b"] == "" else int(r["id_b"]), int(r["n_fragments"])) for r in rows)


# ---------------------------------------------------------------------------
# Draws


def draw_collisions(pairs: PairSet, config: EventConfig, rng, catalog: Catalog | None = None) -> PairSet:
    """Pairs whose draw falls below their probability, after avoidance and de-duplication.

    Active payloads (looked up in ``catalog``) dodge unless their own avoidance
    draw is below alpha; for two active payloads both must dodge, so the
    suppression probability is (1 - alpha)^2. An object in several triggered
    pairs collides only in the first one in (id_i, id_j) order.
    """
    if not pairs.is_sorted():
        raise ContractError("pairs must be sorted by (id_i, id_j)")
    hit = pairs.rand_draw < pairs.probability
    if catalog is not None and hit.any():
        act_i = catalog.cls[pairs.rows_i] == ObjectClass.ActivePayload
        act_j = catalog.cls[pairs.rows_j] == ObjectClass.ActivePayload
        if isinstance(rng, StepStream):
            fail_i = uniforms(rng, pairs.ids_i, pairs.ids_j, 0) < config.avoidance_failure_prob
            fail_j = uniforms(rng, pairs.ids_i, pairs.ids_j, 1) < config.avoidance_failure_prob
        else:
            u = rng.random((len(pairs), 2))
            fail_i = u[:, 0] < config.avoidance_failure_prob
            fail_j = u[:, 1] < config.avoidance_failure_prob
        dodged = (act_i | act_j) & ~((act_i & fail_i) | (act_j & fail_j))
        hit &= ~dodged
    keep = np.zeros(len(pairs), bool)
    used: set[int] = set()
    for k in np.flatnonzero(hit):
        a, b = int(pairs.ids_i[k]), int(pairs.ids_j[k])
        if a in used or b in used:
            continue
        used.update((a, b))
        keep[k] = True
    return pairs.subset(keep)


def draw_explosions(catalog: Catalog, config: EventConfig, rng) -> np.ndarray:
    """Ids of objects exploding this step, in catalog order."""
    p = config.explosion_rates()[catalog.cls.astype(np.int64)] * (config.timestep / DAYS_PER_YEAR)
    if len(catalog) == 0 or not np.any(p > 0):
        return np.zeros(0, np.int64)
    u = uniforms(rng, catalog.ids)
    return catalog.ids[u < p]


def generate_launches(dt_days: float, config: EventConfig, template: Catalog, rng, next_id: int,
                      epoch: float = 0.0, rate: float | None = None) -> Catalog:
    """Poisson(rate * dt / 365.25) new active payloads cloned from template rows.

    Semi-major axis, eccentricity, inclination and physical properties come
    from a uniformly chosen template row; the angles are redrawn uniformly.
    Ids are ``next_id, next_id + 1, ...``.
    """
    rate = config.launch_rate if rate is None else rate
    rate = 0.0 if rate is None else rate
    if rate > 0 and len(template) == 0:
        raise EventError("launch template is empty but launch_rate > 0")
    if rate <= 0:
        return Catalog.empty(epoch)
    g = generator_of(rng)
    n = int(g.poisson(rate * dt_days / DAYS_PER_YEAR))
    if n == 0:
        return Catalog.empty(epoch)
    rows = g.integers(0, len(template), n)
    ang = g.random((n, 3)) * 2 * np.pi
    t = template
    return Catalog(
        np.arange(next_id, next_id + n, dtype=np.int64), np.full(n, int(ObjectClass.ActivePayload), np.int8),
        t.a[rows], t.e[rows], t.inc[rows], ang[:, 0], ang[:, 1], ang[:, 2],
        t.mass[rows], t.radius[rows], t.area[rows], t.bc[rows],
        mission=np.full(n, config.mission_lifetime), constellation=t.constellation[rows],
        born=np.full(n, float(epoch)), epoch=epoch,
    )


def apply_pmd(catalog: Catalog, config: EventConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """(successes, failures) among active payloads whose mission time has run out."""
    eol = (catalog.cls == ObjectClass.ActivePayload) & (catalog.mission <= 0)
    ids = catalog.ids[eol]
    if len(ids) == 0:
        z = np.zeros(0, np.int64)
        return z, z
    u = uniforms(rng, ids)
    ok = u < config.pmd_success_prob
    return ids[ok], ids[~ok]


# ---------------------------------------------------------------------------
# Commit


@dataclass
class StepTally:
    decayed: int = 0
    collided_parents: int = 0
    exploded: int = 0
    pmd_success: int = 0
    pmd_failure: int = 0
    removed: int = 0
    fragments: int = 0
    launched: int = 0
    collisions: int = 0

    @property
    def net(self) -> int:
        return (self.fragments + self.launched - self.decayed - self.collided_parents - self.exploded
                - self.pmd_success - self.removed)


@dataclass
class IdCounter:
    """Separate id ranges for fragments and launches, so a launch gets the
    same id in every policy variant of a seed."""

    next_fragment: int
    next_launch: int

    def fragments(self, n: int) -> np.ndarray:
        out = np.arange(self.next_fragment, self.next_fragment + n, dtype=np.int64)
        self.next_fragment += n
        if n and self.next_fragment > self.launch_base:
            raise ConsistencyError("fragment ids ran into the launch id range")
        return out

    def launches(self, n: int) -> np.ndarray:
        out = np.arange(self.next_launch, self.next_launch + n, dtype=np.int64)
        self.next_launch += n
        return out

    @property
    def launch_base(self) -> int:
        return LAUNCH_ID_BASE

    @classmethod
    def for_catalog(cls, catalog: Catalog) -> "IdCounter":
        top = int(catalog.ids.max()) + 1 if len(catalog) else 1
        if top >= LAUNCH_ID_BASE:
            raise CatalogError("initial ids overlap the launch id range")
        return cls(top, LAUNCH_ID_BASE)


LAUNCH_ID_BASE = 1 << 40


def fragments_catalog(outcome: FragmentationOutcome, ids: np.ndarray, epoch: float,
                      min_radius: float) -> Catalog:
    """Catalog rows for the bound fragments of an outcome (ids must match bound count)."""
    keep = outcome.bound & (outcome.elements[0] >= min_radius) if len(outcome.lengths) else np.zeros(0, bool)
    a, e, inc, raan, argp, ma = (x[keep] for x in outcome.elements) if keep.any() else ([],) * 6
    n = int(keep.sum())
    if n != len(ids):
        raise ConsistencyError("fragment id count mismatch")
    if n == 0:
        return Catalog.empty(epoch)
    area = outcome.areas[keep]
    mass = outcome.masses[keep]
    return Catalog(ids, np.full(n, int(ObjectClass.Debris), np.int8), a, e, inc, raan, argp, ma,
                   mass, np.sqrt(area / np.pi), area, 2.2 * area / mass,
                   born=np.full(n, float(epoch)), epoch=epoch)


def n_inserted(outcome: FragmentationOutcome, min_radius: float) -> int:
    if not len(outcome.lengths):
        return 0
    return int(np.sum(outcome.bound & (outcome.elements[0] >= min_radius)))


def commit_timestep(catalog: Catalog, t: float, log: EventLog, ids: IdCounter, *,
                    decays=(), collisions=(), explosions=(), pmd=((), ()), launches: Catalog | None = None,
                    removals=(), reentry_altitude: float = 150.0, consts=EARTH):
    """Apply one step's events in the fixed order and log them.

    ``collisions`` is a list of FragmentationOutcome for triggered pairs,
    ``explosions`` a list of FragmentationOutcome (one parent each).
    Returns ``(new_catalog, tally, inserted)`` where ``inserted`` maps each
    outcome index (collisions first, then explosions) to its fragment ids.
    """
    tally = StepTally()
    alive = dict(zip(catalog.ids.tolist(), range(len(catalog))))
    gone: set[int] = set()
    mass = catalog.mass.copy()
    bc = catalog.bc.copy()
    cls = catalog.cls.copy()
    mission = catalog.mission.copy()
    new_parts: list[Catalog] = []
    inserted: list[np.ndarray] = []
    min_radius = consts.earth_radius + reentry_altitude

    def remove(i, strict=True):
        i = int(i)
        if i not in alive or i in gone:
            if strict:
                raise ConsistencyError(f"object {i} removed twice or never present")
            return False
        gone.add(i)
        return True

    for i in decays:
        remove(i)
        tally.decayed += 1
        log.append(EventRecord(t, EventKind.Decay, int(i)))

    for out in collisions:
        if any(int(p) in gone for p in out.parent_ids):
            inserted.append(np.zeros(0, np.int64))
            continue
        for p in out.destroyed:
            remove(p)
            tally.collided_parents += 1
        if out.target_mass_loss > 0:
            r = alive[int(out.parent_ids[1])]
            mass[r] = max(mass[r] - out.target_mass_loss, 1e-3 * mass[r])
            bc[r] = 2.2 * catalog.area[r] / mass[r]
        fid = ids.fragments(n_inserted(out, min_radius))
        new_parts.append(fragments_catalog(out, fid, t, min_radius))
        inserted.append(fid)
        tally.fragments += len(fid)
        tally.collisions += 1
        log.append(EventRecord(t, EventKind.Collision, int(out.parent_ids[0]), int(out.parent_ids[1]), len(fid)))

    for out in explosions:
        pid = int(out.parent_ids[0])
        if pid in gone:  # collision wins
            inserted.append(np.zeros(0, np.int64))
            continue
        remove(pid)
        tally.exploded += 1
        fid = ids.fragments(n_inserted(out, min_radius))
        new_parts.append(fragments_catalog(out, fid, t, min_radius))
        inserted.append(fid)
        tally.fragments += len(fid)
        log.append(EventRecord(t, EventKind.Explosion, pid, None, len(fid)))

    success, failure = pmd
    for i in success:
        if remove(i, strict=False):
            tally.pmd_success += 1
            log.append(EventRecord(t, EventKind.PMDSuccess, int(i)))
    for i in failure:
        if int(i) in gone:
            continue
        r = alive[int(i)]
        cls[r] = ObjectClass.DerelictPayload
        mission[r] = np.nan
        tally.pmd_failure += 1
        log.append(EventRecord(t, EventKind.PMDFailure, int(i)))

    if launches is not None and len(launches):
        new_parts.append(launches)
        tally.launched += len(launches)
        for i in launches.ids:
            log.append(EventRecord(t, EventKind.Launch, int(i)))

    for i in removals:
        remove(i)
        tally.removed += 1
        log.append(EventRecord(t, EventKind.Removal, int(i)))

    keep = np.array([i not in gone for i in catalog.ids.tolist()], bool) if gone else np.ones(len(catalog), bool)
    base = Catalog(catalog.ids, cls, catalog.a, catalog.e, catalog.inc, catalog.raan, catalog.argp, catalog.ma,
                   mass, catalog.radius, catalog.area, bc, mission, catalog.constellation, catalog.born,
                   epoch=t, check=False).take(np.flatnonzero(keep))
    base.epoch = t
    for part in new_parts:
        if len(part):
            base = base.extend(part)
    base.epoch = t
    return base, tally, inserted


def remove_objects(catalog: Catalog, t: float, log: EventLog, ids) -> tuple[Catalog, int]:
    """Removal phase on its own (used for ADR after ranking)."""
    ids = np.asarray(list(ids), np.int64)
    if len(ids) == 0:
        return catalog, 0
    if len(np.unique(ids)) != len(ids):
        raise ConsistencyError("duplicate removal ids")
    rows = catalog.index_of(ids)
    for i in ids:
        log.append(EventRecord(t, EventKind.Removal, int(i)))
    keep = np.ones(len(catalog), bool)
    keep[rows] = False
    out = catalog.take(np.flatnonzero(keep))
    out.epoch = t
    return out, len(ids)


def collision_outcome(pairs: PairSet, k: int, catalog: Catalog, pos, vel, rng, threshold: float):
    """Classify and fragment the k-th triggered pair using sampled states."""
    i, j = int(pairs.rows_i[k]), int(pairs.rows_j[k])
    pi = Parent(int(catalog.ids[i]), float(catalog.mass[i]), float(catalog.radius[i]), pos[i], vel[i],
                catalog.cls[i] == ObjectClass.RocketBody)
    pj = Parent(int(catalog.ids[j]), float(catalog.mass[j]), float(catalog.radius[j]), pos[j], vel[j],
                catalog.cls[j] == ObjectClass.RocketBody)
    p, tg = sorted((pi, pj), key=lambda q: (q.mass, q.id))
    v = max(float(np.linalg.norm(vel[i] - vel[j])), 1e-9)
    c = classify_collision(p.mass, tg.mass, v)
    return sample_fragments(c, (p, tg), threshold, rng)


def explosion_outcome(row: int, catalog: Catalog, pos, vel, rng, threshold: float, scale: float):
    parent = Parent(int(catalog.ids[row]), float(catalog.mass[row]), float(catalog.radius[row]), pos[row],
                    vel[row], catalog.cls[row] == ObjectClass.RocketBody)
    return explosion_fragments(parent, threshold, rng, scale)
