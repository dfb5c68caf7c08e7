"""Risk indices: static CSI, event-driven MITRI and filtered FMM.

A :class:`RiskTracker` keeps per-object accumulators aligned with catalog
rows. Several trackers can follow the same run, so one simulation yields
MITRI and FMM rankings at several density-refresh intervals at once.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .catalog import Catalog, ShellGrid, shell_counts, shell_index
from .conjunctions import PairSet
from .constants import DAYS_PER_YEAR, R_EARTH
from .fragmentation import NO_FILTER, DebrisFilter, FragmentationOutcome, filtered_counts

NORM_FLOOR = 1e-12
K_INCLINATION = 0.6


class RiskError(ValueError):
    pass


class StaleRecordError(RiskError):
    pass


class IndexKind(Enum):
    CSI = "CSI"
    MITRI = "MITRI"
    FMM = "FMM"


class EpsilonMode(Enum):
    Off = "Off"
    Sigmoid = "Sigmoid"
    Linear = "Linear"


@dataclass(frozen=True)
class EpsilonConfig:
    mode: EpsilonMode = EpsilonMode.Off
    eps_max: float = 0.0
    slope: float = 10.0

    def __post_init__(self):
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", EpsilonMode(self.mode))
        if self.mode == EpsilonMode.Sigmoid and not self.eps_max > 0:
            raise RiskError("eps_max must be positive in Sigmoid mode")
        if self.eps_max < 0:
            raise RiskError("eps_max must be non-negative")


# ---------------------------------------------------------------------------
# Closed-form pieces


def g_inclination(i, k: float = K_INCLINATION):
    """Inclination flux factor, 1/(1+k) at i = 0 rising to 1 at i = pi."""
    i = np.asarray(i, float)
    if np.any((i < 0) | (i > np.pi)) or k < 0:
        raise RiskError("inclination must lie in [0, pi] and k >= 0")
    out = (1.0 + k * (1.0 - np.cos(i)) / 2.0) / (1.0 + k)
    return float(out) if out.ndim == 0 else out


def update_expectation(prev, x):
    """Smoothed running expectation E_n = (E_{n-1} + x_n) / 2; ``prev=None`` starts it."""
    if prev is None:
        return x
    if not (np.all(np.isfinite(prev)) and np.all(np.isfinite(x))):
        raise RiskError("expectation inputs must be finite")
    return (prev + x) / 2.0


def exp_fit_mean(samples) -> float:
    """Mean of an exponential fitted by maximum likelihood (1/lambda = sample mean)."""
    s = np.asarray(samples, float)
    if s.size == 0:
        raise RiskError("exp_fit_mean needs at least one sample")
    if np.any(s < 0):
        raise RiskError("samples must be non-negative")
    return float(s.mean())


def epsilon1(rand_draw, p_coll, eps_max: float, p_max: float, slope: float = 10.0):
    """Sigmoid damping plus k*sqrt(P), k = eps_max/sqrt(p_max), clamped to [0, 1+eps_max]."""
    if not p_max > 0:
        raise RiskError("p_max must be positive")
    r = np.asarray(rand_draw, float)
    p = np.asarray(p_coll, float)
    k = eps_max / math.sqrt(p_max)
    z = np.clip(slope * (r - p), -700.0, 700.0)
    out = np.clip(1.0 / (1.0 + np.exp(z)) + k * np.sqrt(p), 0.0, 1.0 + eps_max)
    return float(out) if out.ndim == 0 else out


def epsilon2(rand_draw, p_coll):
    """Linear damping 1 - |rand - P|/rand, clamped to [0, 1]."""
    r = np.asarray(rand_draw, float)
    p = np.asarray(p_coll, float)
    if np.any(r <= 0):
        raise RiskError("rand_draw must be positive")
    out = np.clip(1.0 - np.abs(r - p) / r, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def epsilon_factors(pairs: PairSet, eps: EpsilonConfig) -> np.ndarray:
    if eps.mode == EpsilonMode.Off or len(pairs) == 0:
        return np.ones(len(pairs))
    if eps.mode == EpsilonMode.Sigmoid:
        p_max = float(pairs.probability.max())
        if p_max <= 0:
            return np.ones(len(pairs))
        return epsilon1(pairs.rand_draw, pairs.probability, eps.eps_max, p_max, eps.slope)
    # a zero draw (probability ~2^-53) counts as an exact match
    r = np.where(pairs.rand_draw > 0, pairs.rand_draw, np.maximum(pairs.probability, 1e-300))
    return epsilon2(r, pairs.probability)


def fictitious_debris_increment(pairs: PairSet, catalog: Catalog, filt: DebrisFilter | None,
                                eps: EpsilonConfig = EpsilonConfig()) -> np.ndarray:
    """Per-row increments from treating every conjunction pair as a collision."""
    n = len(catalog)
    if len(pairs) == 0:
        return np.zeros(n)
    counts = filtered_counts(catalog.mass[pairs.rows_i], catalog.mass[pairs.rows_j], pairs.rel_velocity,
                             filt or NO_FILTER)
    w = counts * epsilon_factors(pairs, eps)
    return np.bincount(pairs.rows_i, w, minlength=n) + np.bincount(pairs.rows_j, w, minlength=n)


def outcome_count(outcome: FragmentationOutcome, filt: DebrisFilter | None) -> float:
    if filt is None:
        return float(outcome.total_count)
    ok = (outcome.masses > filt.min_mass) & (outcome.lengths > filt.min_length)
    return float(np.sum(ok))


def event_debris_increment(outcomes, filt: DebrisFilter | None = None) -> dict[int, float]:
    """Both parents of every triggered collision gain its fragment count."""
    inc: dict[int, float] = {}
    for out in outcomes:
        c = outcome_count(out, filt)
        for pid in out.parent_ids:
            inc[int(pid)] = inc.get(int(pid), 0.0) + c
    return inc


# ---------------------------------------------------------------------------
# Background density


@dataclass
class BackgroundDensityField:
    """Per-shell object density in objects/km^3, refreshed every ``update_interval`` days."""

    density: np.ndarray
    last_update: float = 0.0
    update_interval: float = math.inf

    def __post_init__(self):
        if np.any(np.asarray(self.density) < 0):
            raise RiskError("densities must be non-negative")
        if not self.update_interval > 0:
            raise RiskError("update interval must be positive")

    def due(self, t: float) -> bool:
        return math.isfinite(self.update_interval) and t - self.last_update >= self.update_interval - 1e-9

    def at(self, altitude, grid: ShellGrid) -> np.ndarray:
        s = np.atleast_1d(shell_index(altitude, grid))
        out = np.zeros(len(s))
        ok = s >= 0
        out[ok] = self.density[s[ok]]
        return out


def shell_density(counts, grid: ShellGrid) -> np.ndarray:
    return np.asarray(counts, float) / grid.volumes()


def refresh_background_density(fld: BackgroundDensityField, counts, grid: ShellGrid, t: float,
                               force: bool = False) -> BackgroundDensityField:
    """rho[s] = N[s]/V[s] when the refresh is due; otherwise the field is returned unchanged."""
    if not (force or fld.due(t)):
        return fld
    return BackgroundDensityField(shell_density(counts, grid), t, fld.update_interval)


# ---------------------------------------------------------------------------
# Normalisation, records, indices


@dataclass
class Normalizations:
    m0: float
    rho_b0: float
    l0: float
    r0: float = 1.0
    d0: float = 1.0
    p0: float = 1.0
    k_incl: float = K_INCLINATION

    def __post_init__(self):
        for name in ("m0", "rho_b0", "l0", "r0", "d0", "p0"):
            v = getattr(self, name)
            if not v > 0:
                setattr(self, name, NORM_FLOOR)


@dataclass(frozen=True)
class CSINorms:
    m0: float = 10000.0  # kg
    rho_ref: float = 1.0  # density at the 770 km reference shell
    l_ref: float = 1.0  # lifetime at 1000 km
    k_incl: float = K_INCLINATION


def csi(mass, inclination, density, lifetime, norms: CSINorms):
    """CSI = (M/M0) (rho/rho_ref) (l/l_ref) g(i)."""
    if norms.rho_ref <= 0 or norms.l_ref <= 0:
        raise RiskError("CSI references must be positive")
    return (np.asarray(mass, float) / norms.m0 * np.asarray(density, float) / norms.rho_ref
            * np.asarray(lifetime, float) / norms.l_ref * g_inclination(inclination, norms.k_incl))


@dataclass
class RiskRecord:
    id: int
    mass_term: float = 0.0
    density_term: float = 0.0
    lifetime_term: float = 0.0
    exp_R: float = 0.0
    exp_D: float = 0.0
    exp_P: float = 0.0
    p_samples: list = field(default_factory=list)
    index_value: float = 0.0
    epoch: float | None = None


def compute_index(record: RiskRecord, kind: IndexKind, norms: Normalizations, mass_exponent: float = 1.75,
                  epoch: float | None = None) -> float:
    """Six-factor product for MITRI/FMM; ``mass_term`` holds M/M0 before the exponent.

    ``density_term`` is rho_B(h) g(i) / rho_B0 and ``lifetime_term`` is L/L0.
    """
    if epoch is not None and record.epoch != epoch:
        raise StaleRecordError(f"record {record.id} last updated at {record.epoch}, not {epoch}")
    if kind == IndexKind.CSI:
        return record.index_value
    value = (record.mass_term ** mass_exponent * record.density_term * record.lifetime_term
             * (record.exp_R / norms.r0) * (record.exp_D / norms.d0) * (record.exp_P / norms.p0))
    record.index_value = value
    return value


RANKING_HEADER = ["epoch_days", "rank", "id", "index_value", "percentile", "mass_term", "density_term",
                  "lifetime_term", "ER", "ED", "EP"]


@dataclass
class Ranking:
    """Objects in descending index order (ties by ascending id)."""

    epoch: float
    ids: np.ndarray
    values: np.ndarray
    terms: np.ndarray | None = None  # (n, 6): mass, density, lifetime, ER, ED, EP

    def __len__(self):
        return len(self.ids)

    @property
    def percentile(self) -> np.ndarray:
        n = len(self.ids)
        return np.arange(1, n + 1) / n if n else np.zeros(0)

    def top(self, fraction: float) -> np.ndarray:
        return self.ids[: int(math.ceil(fraction * len(self.ids) - 1e-12))]

    def percentile_of(self) -> dict[int, float]:
        return dict(zip(self.ids.tolist(), self.percentile.tolist()))

    def rows(self):
        terms = self.terms if self.terms is not None else np.full((len(self), 6), np.nan)
        for r, (i, v, p) in enumerate(zip(self.ids, self.values, self.percentile)):
            yield [repr(float(self.epoch)), r + 1, int(i), repr(float(v)), repr(float(p)),
                   *(repr(float(x)) for x in terms[r])]


def rank(ids, values, epoch: float = 0.0, terms=None) -> Ranking:
    ids = np.asarray(ids, np.int64)
    values = np.asarray(values, float)
    order = np.lexsort((ids, -values))
    return Ranking(float(epoch), ids[order], values[order], None if terms is None else np.asarray(terms)[order])


def write_rankings(fh, rankings, header: bool = True) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(RANKING_HEADER)
    for rk in rankings:
        w.writerows(rk.rows())


def read_rankings(fh) -> list[Ranking]:
    rows = list(csv.reader(fh))
    if not rows or rows[0] != RANKING_HEADER:
        raise RiskError("ranking file header mismatch")
    out, cur, epoch = [], [], None
    for r in rows[1:]:
        e = float(r[0])
        if epoch is not None and e != epoch:
            out.append(_ranking_from_rows(epoch, cur))
            cur = []
        epoch = e
        cur.append(r)
    if cur:
        out.append(_ranking_from_rows(epoch, cur))
    return out


def _ranking_from_rows(epoch, rows) -> Ranking:
    ids = np.array([int(r[2]) for r in rows], np.int64)
    vals = np.array([float(r[3]) for r in rows])
    terms = np.array([[float(x) for x in r[5:11]] for r in rows])
    return Ranking(epoch, ids, vals, terms)


# ---------------------------------------------------------------------------
# Vectorised tracker


@dataclass
class TrackerConfig:
    name: str = "MITRI"
    kind: str = "MITRI"
    density_interval_days: float | None = None  # None = static t=0 field
    mass_exponent: float = 1.75
    fictitious: bool | None = None  # default: FMM only
    filtering: bool | None = None  # default: FMM only
    filter_min_mass: float = 10.0
    filter_min_length: float = 0.10
    epsilon_mode: str = "Off"
    eps_max: float = 0.0

    def __post_init__(self):
        self.kind_enum  # validates
        if self.density_interval_days is not None and not self.density_interval_days > 0:
            raise RiskError("density_interval_days must be positive or null (static)")
        if self.mass_exponent < 0:
            raise RiskError("mass_exponent must be non-negative")
        self.epsilon  # validates
        DebrisFilter(self.filter_min_mass, self.filter_min_length)

    @property
    def kind_enum(self) -> IndexKind:
        try:
            return IndexKind(self.kind)
        except ValueError:
            raise RiskError(f"unknown index kind {self.kind!r}") from None

    @property
    def epsilon(self) -> EpsilonConfig:
        return EpsilonConfig(EpsilonMode(self.epsilon_mode), self.eps_max)

    @property
    def is_fictitious(self) -> bool:
        return self.kind_enum == IndexKind.FMM if self.fictitious is None else self.fictitious

    @property
    def debris_filter(self) -> DebrisFilter | None:
        on = self.kind_enum == IndexKind.FMM if self.filtering is None else self.filtering
        return DebrisFilter(self.filter_min_mass, self.filter_min_length) if on else None

    @property
    def interval(self) -> float:
        return math.inf if self.density_interval_days is None else float(self.density_interval_days)


_STATE = ("sum_R", "n_obs", "E_R", "D_acc", "E_D", "P_sum", "P_cnt", "E_P",
          "first_R", "first_D", "first_P", "csi")
# nan marks "no observation yet"
_FILL = {k: np.nan if k.startswith(("E_", "first_")) or k == "csi" else 0.0 for k in _STATE}


class RiskTracker:
    """Accumulators for one index configuration, aligned with catalog rows."""

    def __init__(self, config: TrackerConfig, catalog: Catalog, grid: ShellGrid, lifetime, dt_days: float):
        self.config = config
        self.kind = config.kind_enum
        self.grid = grid
        self.lifetime = lifetime
        self.dt_days = dt_days
        self.filter = config.debris_filter
        self.fictitious = config.is_fictitious
        self.eps = config.epsilon
        self.ids = catalog.ids.copy()
        n = len(catalog)
        for name in _STATE:
            setattr(self, name, np.full(n, _FILL[name]))
        rho0 = shell_density(shell_counts(catalog, grid), grid)
        self.field0 = BackgroundDensityField(rho0, 0.0, math.inf)
        self.field = BackgroundDensityField(rho0.copy(), 0.0, config.interval)
        life0 = lifetime(catalog.a, catalog.bc) if n else np.ones(1)
        self.norms = Normalizations(
            m0=float(np.median(catalog.mass)) if n else 1.0,
            rho_b0=float(rho0.max()),
            l0=float(np.median(life0)),
        )
        self.csi_norms = CSINorms(
            rho_ref=float(self.field0.at(np.array([770.0]), grid)[0]) or NORM_FLOOR,
            l_ref=float(lifetime(np.array([grid_radius(1000.0)]), np.array([CSI_REFERENCE_BC]))[0]),
        )
        if self.kind == IndexKind.CSI:
            self._fill_csi(catalog)

    # -- alignment --------------------------------------------------------

    def realign(self, catalog: Catalog, mapping=None) -> None:
        """Carry accumulators over to a new catalog (new rows start empty).

        ``mapping`` is an optional precomputed ``row_mapping(self.ids, catalog.ids)``.
        """
        new = catalog.ids
        if mapping is None:
            mapping = row_mapping(self.ids, new)
        if mapping is SAME:
            return
        found, pos_c = mapping
        src = pos_c[found]
        for name in _STATE:
            arr = np.full(len(new), _FILL[name])
            arr[found] = getattr(self, name)[src]
            setattr(self, name, arr)
        self.ids = new.copy()
        if self.kind == IndexKind.CSI:
            self._fill_csi(catalog)

    def _fill_csi(self, catalog: Catalog) -> None:
        miss = np.isnan(self.csi)
        if not miss.any():
            return
        alt = catalog.mean_altitude[miss]
        rho = self.field0.at(alt, self.grid)
        life = self.lifetime(catalog.a[miss], np.full(miss.sum(), CSI_REFERENCE_BC))
        self.csi[miss] = csi(catalog.mass[miss], catalog.inc[miss], rho, life, self.csi_norms)

    # -- per-step updates -------------------------------------------------

    def refresh_density(self, catalog: Catalog, t: float) -> bool:
        if self.field.due(t):
            self.field = refresh_background_density(self.field, shell_counts(catalog, self.grid), self.grid, t)
            return True
        return False

    def observe(self, catalog: Catalog, t: float, pairs: PairSet, neighbours, p_total) -> None:
        """R, D and P updates for one step (catalog rows must match)."""
        if self.kind == IndexKind.CSI:
            return
        self.sum_R += neighbours
        self.n_obs += 1
        x = self.sum_R / self.n_obs
        self.E_R = _smooth(self.E_R, x)
        _first(self.first_R, x)
        if self.fictitious:
            self.D_acc += fictitious_debris_increment(pairs, catalog, self.filter, self.eps)
        age = np.maximum(t - np.maximum(catalog.born, 0.0), self.dt_days) / DAYS_PER_YEAR
        x = self.D_acc / age
        self.E_D = _smooth(self.E_D, x)
        _first(self.first_D, x)
        self.P_sum += p_total
        self.P_cnt += 1

    def observe_events(self, catalog: Catalog, outcomes) -> None:
        """Event-based debris (MITRI, or FMM with fictitious collisions off)."""
        if self.kind == IndexKind.CSI or self.fictitious or not outcomes:
            return
        for pid, inc in event_debris_increment(outcomes, self.filter).items():
            r = np.searchsorted(self.ids, pid)
            if r < len(self.ids) and self.ids[r] == pid:
                self.D_acc[r] += inc

    # -- ranking ----------------------------------------------------------

    def terms(self, catalog: Catalog) -> np.ndarray:
        n = len(catalog)
        if self.kind == IndexKind.CSI:
            return np.full((n, 6), np.nan)
        x_P = np.where(self.P_cnt > 0, self.P_sum / np.maximum(self.P_cnt, 1), 0.0)
        self.E_P = _smooth(self.E_P, x_P)
        _first(self.first_P, x_P)
        nm = self.norms
        nm.r0, nm.d0, nm.p0 = (_median_first(a) for a in (self.first_R, self.first_D, self.first_P))
        fld = self.field0 if not math.isfinite(self.config.interval) else self.field
        rho = fld.at(catalog.mean_altitude, self.grid)
        mass_term = catalog.mass / nm.m0
        density_term = rho * g_inclination(catalog.inc, nm.k_incl) / nm.rho_b0
        lifetime_term = self.lifetime(catalog.a, catalog.bc) / nm.l0
        return np.stack([mass_term, density_term, lifetime_term,
                         np.nan_to_num(self.E_R), np.nan_to_num(self.E_D), np.nan_to_num(self.E_P)], axis=1)

    def index_values(self, catalog: Catalog, terms: np.ndarray | None = None) -> np.ndarray:
        if self.kind == IndexKind.CSI:
            return self.csi.copy()
        terms = self.terms(catalog) if terms is None else terms
        nm = self.norms
        return (terms[:, 0] ** self.config.mass_exponent * terms[:, 1] * terms[:, 2]
                * (terms[:, 3] / nm.r0) * (terms[:, 4] / nm.d0) * (terms[:, 5] / nm.p0))

    def ranking(self, catalog: Catalog, t: float) -> Ranking:
        terms = self.terms(catalog)
        return rank(catalog.ids, self.index_values(catalog, terms), t, terms)

    def records(self, catalog: Catalog, t: float) -> list[RiskRecord]:
        terms = self.terms(catalog)
        vals = self.index_values(catalog, terms)
        return [RiskRecord(int(i), *map(float, terms[r]), index_value=float(vals[r]), epoch=t)
                for r, i in enumerate(catalog.ids)]

    def accumulators(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name).copy() for name in _STATE}


SAME = object()


def row_mapping(old_ids, new_ids):
    """(found, rows): which new ids existed before, and their old row."""
    if len(new_ids) == len(old_ids) and np.array_equal(new_ids, old_ids):
        return SAME
    if not len(old_ids):
        return np.zeros(len(new_ids), bool), np.zeros(len(new_ids), np.int64)
    pos = np.searchsorted(old_ids, new_ids)
    pos_c = np.minimum(pos, len(old_ids) - 1)
    return old_ids[pos_c] == new_ids, pos_c


CSI_REFERENCE_BC = 0.01  # m^2/kg, used for the altitude-only lifetime l(h)


def grid_radius(altitude: float) -> float:
    return R_EARTH + altitude


def _smooth(E, x):
    return np.where(np.isnan(E), x, (E + x) / 2.0)


def _first(first, x):
    hit = np.isnan(first) & (x > 0)
    first[hit] = x[hit]


def _median_first(a) -> float:
    v = a[~np.isnan(a)]
    return max(float(np.median(v)), NORM_FLOOR) if v.size else 1.0
