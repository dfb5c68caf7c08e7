"""Breakup modelling after the NASA standard breakup model (EVOLVE 4.0).

Fragment counts follow cumulative power laws in characteristic length L
(metres). Collisions above 40 J/g are catastrophic. Fragment area-to-mass
ratios use the SBM bimodal log-normal distributions for fragments larger
than 11 cm. Fictitious collisions use the sampling-free
:func:`filtered_fragment_count`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .constants import EARTH, GravityConstants

CATASTROPHIC_THRESHOLD = 40.0  # J/g
DEFAULT_THRESHOLD_LENGTH = 0.10  # m


class FragmentationError(ValueError):
    pass


class ArgumentOrderError(FragmentationError):
    pass


class CollisionKind(Enum):
    Catastrophic = "Catastrophic"
    NonCatastrophic = "NonCatastrophic"
    Explosion = "Explosion"


@dataclass(frozen=True)
class CollisionClass:
    kind: CollisionKind
    energy_ratio: float  # J/g

    @property
    def catastrophic(self) -> bool:
        return self.kind == CollisionKind.Catastrophic


@dataclass(frozen=True)
class DebrisFilter:
    """Fragments count only when mass > min_mass and length > min_length."""

    min_mass: float = 10.0  # kg
    min_length: float = 0.10  # m

    def __post_init__(self):
        if self.min_mass < 0 or self.min_length < 0:
            raise FragmentationError("filter thresholds must be non-negative")


NO_FILTER = DebrisFilter(0.0, DEFAULT_THRESHOLD_LENGTH)


def energy_ratio(m_projectile, m_target, v_imp):
    """Projectile kinetic energy per gram of target, J/g (v in km/s)."""
    return 0.5 * np.asarray(m_projectile) * (1000.0 * np.asarray(v_imp)) ** 2 / (1000.0 * np.asarray(m_target))


def classify_collision(m_projectile: float, m_target: float, v_imp: float) -> CollisionClass:
    if not (m_projectile > 0 and m_target > 0 and v_imp > 0):
        raise FragmentationError("masses and impact velocity must be positive")
    if m_projectile > m_target:
        raise ArgumentOrderError("projectile must be the lighter object")
    er = float(energy_ratio(m_projectile, m_target, v_imp))
    kind = CollisionKind.Catastrophic if er > CATASTROPHIC_THRESHOLD else CollisionKind.NonCatastrophic
    return CollisionClass(kind, er)


def _check_positive(**kw):
    for k, v in kw.items():
        if np.any(np.asarray(v) <= 0):
            raise FragmentationError(f"{k} must be positive")


def nfrag_catastrophic(L_c, m_i, m_j):
    """Cumulative number of fragments with length >= L_c (m) from a catastrophic collision."""
    _check_positive(L_c=L_c, m_i=m_i, m_j=m_j)
    return 0.1 * np.asarray(L_c, float) ** -0.5 * (np.asarray(m_i, float) + np.asarray(m_j, float)) ** 0.75


def nfrag_noncatastrophic(L_c, m_p, v_imp):
    """Cumulative fragment count for a non-catastrophic impact, v in km/s."""
    _check_positive(L_c=L_c, m_p=m_p)
    if np.any(np.asarray(v_imp) < 0):
        raise FragmentationError("impact velocity must be non-negative")
    return 0.1 * np.asarray(L_c, float) ** -0.5 * (np.asarray(m_p, float) * np.asarray(v_imp, float) ** 2) ** 0.75


def nfrag_explosion(L_c, scale: float = 1.0):
    """Cumulative explosion fragment count 6 S L^-1.6."""
    _check_positive(L_c=L_c)
    return 6.0 * scale * np.asarray(L_c, float) ** -1.6


# ---------------------------------------------------------------------------
# Area-to-mass and delta-v distributions


def area_from_length(L):
    return 0.556945 * np.asarray(L, float) ** 2.0047077


def _ramp(x, x0, x1, y0, y1):
    return np.where(x <= x0, y0, np.where(x >= x1, y1, y0 + (y1 - y0) * (x - x0) / (x1 - x0)))


def am_parameters(L, rocket_body=False):
    """Bimodal log10(A/m) mixture parameters (alpha, mu1, s1, mu2, s2) for fragments."""
    lam = np.log10(np.asarray(L, float))
    rb = np.asarray(rocket_body, bool)
    sc = (
        _ramp(lam, -1.95, 0.55, 0.0, 1.0),
        _ramp(lam, -1.1, 0.0, -0.6, -0.95),
        _ramp(lam, -1.3, -0.3, 0.1, 0.3),
        _ramp(lam, -0.7, -0.1, -1.2, -2.0),
        _ramp(lam, -0.5, -0.3, 0.5, 0.3),
    )
    rbp = (
        _ramp(lam, -1.4, 0.0, 1.0, 0.5),
        _ramp(lam, -0.5, 0.0, -0.45, -0.9),
        np.full_like(lam, 0.55),
        np.full_like(lam, -0.9),
        _ramp(lam, -1.0, 0.1, 0.28, 0.1),
    )
    return tuple(np.where(rb, r, s) for r, s in zip(rbp, sc))


def mean_log_am(L, rocket_body=False):
    alpha, mu1, _, mu2, _ = am_parameters(L, rocket_body)
    return alpha * mu1 + (1.0 - alpha) * mu2


def mean_mass(L, rocket_body=False):
    """Mass of a fragment of length L on the mean area-to-mass curve."""
    return area_from_length(L) / 10.0 ** mean_log_am(L, rocket_body)


@lru_cache(maxsize=256)
def length_at_mass(mass: float, rocket_body: bool = False) -> float:
    """Invert the mean mass-length relation; 0 kg maps to 0 m."""
    if mass <= 0:
        return 0.0
    f = lambda x: np.log(mean_mass(10.0**x, rocket_body)) - np.log(mass)  # noqa: E731
    lo, hi = -6.0, 4.0
    if f(lo) >= 0:
        return 10.0**lo
    if f(hi) <= 0:
        return 10.0**hi
    return float(10.0 ** brentq(f, lo, hi, xtol=1e-12))


def sample_log_am(L, rng, rocket_body=False):
    alpha, mu1, s1, mu2, s2 = am_parameters(L, rocket_body)
    first = rng.random(np.shape(L)) < alpha
    z = rng.standard_normal(np.shape(L))
    return np.where(first, mu1 + s1 * z, mu2 + s2 * z)


def sample_delta_v(log_am, rng, explosion=False):
    """Fragment delta-v magnitude in km/s."""
    mean = 0.2 * log_am + 1.85 if explosion else 0.9 * log_am + 2.9
    return 10.0 ** (mean + 0.4 * rng.standard_normal(np.shape(log_am))) / 1000.0


def isotropic(n, rng):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_lengths(n, threshold, rng, exponent=0.5, l_max=None):
    """Draw lengths from N(>=L) ~ L^-exponent above ``threshold``; clip at ``l_max``."""
    L = threshold * rng.random(n) ** (-1.0 / exponent)
    return L if l_max is None else np.minimum(L, max(l_max, threshold))


# ---------------------------------------------------------------------------
# Orbits from state vectors


def elements_from_state(r, v, consts: GravityConstants = EARTH):
    """Vectorised classical elements (a, e, i, raan, argp, M) from r, v in km, km/s.

    Hyperbolic or parabolic states return a = nan.
    """
    r = np.atleast_2d(r).astype(float)
    v = np.atleast_2d(v).astype(float)
    mu = consts.mu
    rn = np.linalg.norm(r, axis=1)
    vn2 = np.einsum("ij,ij->i", v, v)
    h = np.cross(r, v)
    hn = np.linalg.norm(h, axis=1)
    energy = 0.5 * vn2 - mu / rn
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(energy < 0, -mu / (2 * energy), np.nan)
    evec = ((vn2 - mu / rn)[:, None] * r - np.einsum("ij,ij->i", r, v)[:, None] * v) / mu
    e = np.linalg.norm(evec, axis=1)
    inc = np.arccos(np.clip(h[:, 2] / hn, -1, 1))
    node = np.stack([-h[:, 1], h[:, 0], np.zeros(len(h))], axis=1)
    nn = np.linalg.norm(node, axis=1)
    equatorial = nn < 1e-10 * hn
    circular = e < 1e-10
    safe_nn = np.where(equatorial, 1.0, nn)
    raan = np.where(equatorial, 0.0, np.arctan2(node[:, 1], node[:, 0]))
    # argument of perigee measured from the node (or the x axis when equatorial)
    ref = np.where(equatorial[:, None], np.array([1.0, 0.0, 0.0]), node / safe_nn[:, None])
    ref_perp = np.cross(h / hn[:, None], ref)
    safe_e = np.where(circular, 1.0, e)
    argp = np.where(circular, 0.0, np.arctan2(np.einsum("ij,ij->i", evec, ref_perp),
                                              np.einsum("ij,ij->i", evec, ref)))
    # true anomaly from perigee (or from ref when circular)
    pdir = np.where(circular[:, None], ref, evec / safe_e[:, None])
    qdir = np.cross(h / hn[:, None], pdir)
    nu = np.arctan2(np.einsum("ij,ij->i", r, qdir), np.einsum("ij,ij->i", r, pdir))
    ec = np.minimum(e, 0.999999)
    E = 2 * np.arctan2(np.sqrt(1 - ec) * np.sin(nu / 2), np.sqrt(1 + ec) * np.cos(nu / 2))
    M = E - ec * np.sin(E)
    two_pi = 2 * np.pi
    return a, e, inc, np.mod(raan, two_pi), np.mod(argp, two_pi), np.mod(M, two_pi)


# ---------------------------------------------------------------------------
# Outcomes


@dataclass
class Parent:
    id: int
    mass: float  # kg
    radius: float  # m
    position: np.ndarray  # km
    velocity: np.ndarray  # km/s
    rocket_body: bool = False


@dataclass
class FragmentationOutcome:
    """Classification plus sampled fragments (column arrays)."""

    parent_ids: tuple
    collision: CollisionClass
    total_count: int
    lengths: np.ndarray = field(default_factory=lambda: np.zeros(0))
    masses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    area_to_mass: np.ndarray = field(default_factory=lambda: np.zeros(0))
    areas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    delta_v: np.ndarray = field(default_factory=lambda: np.zeros(0))
    elements: tuple = ()  # (a, e, inc, raan, argp, ma) arrays
    destroyed: tuple = ()  # parent ids removed from the catalog
    target_mass_loss: float = 0.0  # kg removed from a surviving target

    @property
    def fragments(self) -> list[dict]:
        keys = ("a", "e", "inc", "raan", "argp", "ma")
        return [
            dict(characteristic_length=float(self.lengths[k]), mass=float(self.masses[k]),
                 area_to_mass=float(self.area_to_mass[k]), delta_v=float(self.delta_v[k]),
                 **{n: float(self.elements[q][k]) for q, n in enumerate(keys)})
            for k in range(len(self.lengths))
        ]

    @property
    def bound(self) -> np.ndarray:
        """Fragments left on closed orbits (others escape or re-enter at once)."""
        if not self.elements:
            return np.zeros(0, bool)
        a, e = self.elements[0], self.elements[1]
        return np.isfinite(a) & (e < 1.0)


def _round_count(n: float) -> int:
    return int(np.floor(n + 0.5))


def _fragments(count, threshold, budget, sources, weights, rng, exponent, explosion, rocket_body,
               l_max, consts):
    if count == 0:
        z = np.zeros(0)
        return z, z, z, z, z, (z, z, z, z, z, z)
    L = sample_lengths(count, threshold, rng, exponent, l_max)
    src = rng.choice(len(sources), size=count, p=weights) if len(sources) > 1 else np.zeros(count, int)
    rb = np.array([sources[k].rocket_body for k in src]) if rocket_body is None else np.full(count, rocket_body)
    log_am = sample_log_am(L, rng, rb)
    am = 10.0**log_am
    A = area_from_length(L)
    m = A / am
    total = m.sum()
    if total > budget:
        m *= budget / total
        am = A / m
        log_am = np.log10(am)
    dv = sample_delta_v(log_am, rng, explosion)
    dirs = isotropic(count, rng)
    r = np.stack([sources[k].position for k in src])
    v = np.stack([sources[k].velocity for k in src]) + dv[:, None] * dirs
    elems = elements_from_state(r, v, consts)
    return L, m, am, A, dv, elems


def sample_fragments(collision: CollisionClass, parents: tuple[Parent, Parent],
                     threshold_length: float = DEFAULT_THRESHOLD_LENGTH, rng=None,
                     consts: GravityConstants = EARTH) -> FragmentationOutcome:
    """Sample the fragments of a collision between two parents.

    Draws round(N) fragments, where N is the cumulative count at the
    threshold. Catastrophic breakups destroy both parents and spend at most
    their combined mass; non-catastrophic impacts destroy the projectile and
    eject at most m_p * v^2 (kg, km/s) from the target.
    """
    if not threshold_length > 0:
        raise FragmentationError("threshold length must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    p, t = sorted(parents, key=lambda q: (q.mass, q.id))
    v_imp = float(np.linalg.norm(np.asarray(p.velocity) - np.asarray(t.velocity)))
    if collision.catastrophic:
        n = float(nfrag_catastrophic(threshold_length, p.mass, t.mass))
        budget = p.mass + t.mass
        sources, weights = (p, t), np.array([p.mass, t.mass]) / budget
        destroyed = (p.id, t.id)
    else:
        n = float(nfrag_noncatastrophic(threshold_length, p.mass, max(v_imp, 0.0))) if v_imp > 0 else 0.0
        budget = min(p.mass * v_imp**2, t.mass) + p.mass
        sources, weights = (t,), None
        destroyed = (p.id,)
    count = _round_count(n)
    l_max = 2.0 * max(p.radius, t.radius)
    L, m, am, A, dv, elems = _fragments(count, threshold_length, budget, sources, weights, rng, 0.5,
                                        False, None, l_max, consts)
    loss = 0.0 if collision.catastrophic else max(0.0, float(m.sum()) - p.mass)
    return FragmentationOutcome((p.id, t.id), collision, count, L, m, am, A, dv, elems, destroyed, loss)


def explosion_fragments(parent: Parent, threshold_length: float = DEFAULT_THRESHOLD_LENGTH, rng=None,
                        scale: float = 1.0, consts: GravityConstants = EARTH) -> FragmentationOutcome:
    """Fragments of an explosion with N(>=L) = 6 S L^-1.6; the parent is destroyed."""
    if not parent.mass > 0:
        raise FragmentationError("parent mass must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    n = float(nfrag_explosion(threshold_length, scale)) if scale > 0 else 0.0
    count = _round_count(n)
    L, m, am, A, dv, elems = _fragments(count, threshold_length, parent.mass, (parent,), None, rng, 1.6,
                                        True, parent.rocket_body, 2.0 * parent.radius, consts)
    return FragmentationOutcome((parent.id,), CollisionClass(CollisionKind.Explosion, 0.0), count,
                                L, m, am, A, dv, elems, (parent.id,), 0.0)


# ---------------------------------------------------------------------------
# Sampling-free filtered counts (fictitious collisions)


def filter_length(filt: DebrisFilter) -> float:
    """Smallest length that passes both the length and the (mean-curve) mass cut."""
    return max(filt.min_length, length_at_mass(filt.min_mass))


def filtered_fragment_count(collision: CollisionClass, m_projectile: float, m_target: float, v_imp: float,
                            filt: DebrisFilter = DebrisFilter()) -> float:
    """Expected number of fragments that survive the debris filter (real-valued)."""
    L = filter_length(filt)
    if L <= 0:
        raise FragmentationError("filter must impose a positive length or mass threshold")
    if collision.catastrophic:
        return float(nfrag_catastrophic(L, m_projectile, m_target))
    return float(nfrag_noncatastrophic(L, m_projectile, v_imp))


def filtered_counts(m_i, m_j, v_imp, filt: DebrisFilter = DebrisFilter()) -> np.ndarray:
    """Vectorised :func:`filtered_fragment_count` for hypothetical pair collisions."""
    m_i, m_j, v = (np.asarray(x, float) for x in (m_i, m_j, v_imp))
    mp, mt = np.minimum(m_i, m_j), np.maximum(m_i, m_j)
    L = filter_length(filt)
    cat = energy_ratio(mp, mt, v) > CATASTROPHIC_THRESHOLD
    scale = 0.1 * L**-0.5
    return scale * np.where(cat, (mp + mt) ** 0.75, (mp * v**2) ** 0.75)


def closed_form_count(m_i, m_j, v_imp, threshold_length):
    """Cumulative count at a threshold for a collision, classifying it first."""
    mp, mt = min(m_i, m_j), max(m_i, m_j)
    c = classify_collision(mp, mt, v_imp)
    if c.catastrophic:
        return float(nfrag_catastrophic(threshold_length, mp, mt))
    return float(nfrag_noncatastrophic(threshold_length, mp, v_imp))


FRAGMENT_HEADER = ["t_days", "parent_i", "parent_j", "frag_id", "Lc_m", "mass_kg", "dv_kms"]


def write_fragments(fh, t_days, outcome: FragmentationOutcome, frag_ids, header=False) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(FRAGMENT_HEADER)
    pi = outcome.parent_ids[0]
    pj = outcome.parent_ids[1] if len(outcome.parent_ids) > 1 else ""
    for k, fid in enumerate(frag_ids):
        w.writerow([repr(float(t_days)), pi, pj, int(fid), repr(float(outcome.lengths[k])),
                    repr(float(outcome.masses[k])), repr(float(outcome.delta_v[k]))])
