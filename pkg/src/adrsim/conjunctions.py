"""CUBE method: hash sampled positions into cubic cells, pair co-resident
objects, and score each pair with the kinetic-gas collision probability."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .catalog import Catalog
from .constants import EARTH, GravityConstants
from .rng import uniforms

TWO_PI = 2.0 * np.pi
_OFFSET = 1 << 20
_BITS = 21


class ConjunctionError(ValueError):
    pass


def solve_kepler(M, e, iterations: int = 8):
    """Eccentric anomaly from mean anomaly (Newton, vectorised)."""
    M = np.asarray(M, float)
    e = np.asarray(e, float)
    E = np.where(e < 0.8, M, np.pi)
    for _ in range(iterations):
        step = (E - e * np.sin(E) - M) / (1.0 - e * np.cos(E))
        E = E - step
        if np.all(np.abs(step) < 1e-13):
            break
    return E


def state_vectors(a, e, inc, raan, argp, M, consts: GravityConstants = EARTH):
    """Cartesian position (km) and velocity (km/s) from Keplerian elements."""
    a, e, inc, raan, argp, M = (np.asarray(x, float) for x in (a, e, inc, raan, argp, M))
    if np.any(~np.isfinite(a)) or np.any(a <= 0) or np.any((e < 0) | (e >= 1)):
        raise ConjunctionError("elements must describe closed orbits")
    E = solve_kepler(M, e)
    cE, sE = np.cos(E), np.sin(E)
    sq = np.sqrt(1.0 - e**2)
    # perifocal frame
    xp = a * (cE - e)
    yp = a * sq * sE
    r = a * (1.0 - e * cE)
    f = np.sqrt(consts.mu * a) / r
    vxp = -f * sE
    vyp = f * sq * cE
    cO, sO = np.cos(raan), np.sin(raan)
    cw, sw = np.cos(argp), np.sin(argp)
    ci, si = np.cos(inc), np.sin(inc)
    p1 = np.stack([cO * cw - sO * sw * ci, sO * cw + cO * sw * ci, sw * si], axis=-1)
    q1 = np.stack([-cO * sw - sO * cw * ci, -sO * sw + cO * cw * ci, cw * si], axis=-1)
    pos = xp[..., None] * p1 + yp[..., None] * q1
    vel = vxp[..., None] * p1 + vyp[..., None] * q1
    return pos, vel


def positions_at(catalog: Catalog, mean_anomaly, consts: GravityConstants = EARTH):
    return state_vectors(catalog.a, catalog.e, catalog.inc, catalog.raan, catalog.argp, mean_anomaly, consts)


def sample_positions(catalog: Catalog, rng, consts: GravityConstants = EARTH, return_velocity: bool = False):
    """Positions at a uniformly sampled mean-anomaly phase on each object's current orbit.

    ``rng`` is a numpy Generator (draws in catalog order) or a keyed step
    stream (one draw per object id).
    """
    phase = TWO_PI * uniforms(rng, catalog.ids) if len(catalog) else np.zeros(0)
    pos, vel = positions_at(catalog, phase, consts)
    return (pos, vel) if return_velocity else pos


def cube_keys(positions, edge: float) -> np.ndarray:
    """Pack integer cell coordinates floor(position/edge) into one int64 per object."""
    if not edge > 0:
        raise ConjunctionError("cube edge must be positive")
    c = np.floor(np.asarray(positions, float).reshape(-1, 3) / edge).astype(np.int64) + _OFFSET
    return (c[:, 0] << (2 * _BITS)) | (c[:, 1] << _BITS) | c[:, 2]


def unpack_key(key: int) -> tuple[int, int, int]:
    mask = (1 << _BITS) - 1
    return ((key >> (2 * _BITS)) & mask) - _OFFSET, ((key >> _BITS) & mask) - _OFFSET, (key & mask) - _OFFSET


@dataclass
class CubeGrid:
    """Cell assignment of one position snapshot.

    ``keys`` holds one packed cell key per object (input order); ``pairs``
    lists every co-resident index pair; ``cells`` maps integer 3-vectors to
    the list of object ids in that cell.
    """

    edge: float
    keys: np.ndarray
    ids: np.ndarray
    pairs: np.ndarray

    @property
    def order(self) -> np.ndarray:
        return np.argsort(self.keys, kind="stable")

    @property
    def cells(self) -> dict[tuple[int, int, int], list[int]]:
        out: dict[tuple[int, int, int], list[int]] = {}
        order = self.order
        for k, i in zip(self.keys[order], order):
            out.setdefault(unpack_key(int(k)), []).append(int(self.ids[i]))
        return out

    def neighbour_counts(self) -> np.ndarray:
        """Number of other objects sharing each object's cell."""
        n = len(self.keys)
        p = self.pairs
        return np.bincount(p[:, 0], minlength=n) + np.bincount(p[:, 1], minlength=n)


_HASH_MUL = np.uint64(0x9E3779B97F4A7C15)


def _hash_order(keys):
    """Order grouping equal 32-bit key hashes together, via two 16-bit radix passes.

    numpy's stable sort is a linear radix sort for 16-bit ints, so this stays
    O(n) where a full int64 argsort would not.
    """
    h = keys.view(np.uint64) * _HASH_MUL
    h >>= np.uint64(32)
    h = h.astype(np.uint32)
    o = np.argsort(h.astype(np.uint16), kind="stable")
    o = o[np.argsort((h >> np.uint32(16)).astype(np.uint16)[o], kind="stable")]
    return o, h[o]


def build_cube_grid(positions, edge: float = 50.0, ids=None):
    """Hash positions into cubes of side ``edge`` km.

    Returns ``(grid, pairs)`` where ``pairs`` is an (m, 2) array of object
    indices (i < j) for every unordered pair sharing a cell, sorted by
    (ids[i], ids[j]). ``ids`` default to the row indices and must be
    ascending when given.
    """
    keys = cube_keys(positions, edge)
    n = len(keys)
    ids = np.arange(n) if ids is None else np.asarray(ids)
    empty = np.zeros((0, 2), np.int64)
    if n < 2:
        return CubeGrid(edge, keys, ids, empty), empty
    order, sh = _hash_order(keys)
    same = sh[1:] == sh[:-1]
    if not same.any():
        return CubeGrid(edge, keys, ids, empty), empty
    # only objects in a shared hash bucket can share a cell; sort those few by full key
    member = np.zeros(n, bool)
    member[1:] |= same
    member[:-1] |= same
    sub_rows = order[member]
    sub_rows = sub_rows[np.argsort(keys[sub_rows], kind="stable")]
    sub_keys = keys[sub_rows]
    left, right = [], []
    d = 1
    while d < len(sub_rows):
        hit = sub_keys[d:] == sub_keys[:-d]
        if not hit.any():
            break
        idx = np.flatnonzero(hit)
        left.append(sub_rows[idx])
        right.append(sub_rows[idx + d])
        d += 1
    if not left:
        return CubeGrid(edge, keys, ids, empty), empty
    i = np.concatenate(left)
    j = np.concatenate(right)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    srt = np.lexsort((ids[hi], ids[lo]))
    pairs = np.stack([lo[srt], hi[srt]], axis=1)
    return CubeGrid(edge, keys, ids, pairs), pairs


def brute_force_pairs(positions, edge: float) -> set[tuple[int, int]]:
    """O(n^2) reference: all index pairs whose cell coordinates coincide."""
    c = np.floor(np.asarray(positions, float) / edge).astype(np.int64)
    n = len(c)
    out = set()
    for i in range(n):
        same = np.all(c[i + 1:] == c[i], axis=1)
        for j in np.flatnonzero(same):
            out.add((i, i + 1 + int(j)))
    return out


def pair_probability(edge, rel_velocity, sigma, dt):
    """Collision probability of a single co-resident pair over ``dt`` seconds.

    With one object of each kind in the cube the spatial densities are
    1/dU, so the rate s_i s_j V sigma dU reduces to V sigma / dU; multiplying
    by dt gives a probability, clamped to [0, 1].
    """
    edge = np.asarray(edge, float)
    if np.any(edge <= 0):
        raise ConjunctionError("cube edge must be positive")
    p = np.asarray(rel_velocity, float) * np.asarray(sigma, float) * dt / edge**3
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def object_total_probability(pair_probs) -> float:
    """P_C = 1 - prod(1 - p_j) over an object's pair probabilities."""
    p = np.asarray(list(pair_probs) if not isinstance(pair_probs, np.ndarray) else pair_probs, float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ConjunctionError("pair probabilities must lie in [0, 1]")
    return float(1.0 - np.prod(1.0 - p)) if p.size else 0.0


def total_probability_by_object(n: int, rows_i, rows_j, p) -> np.ndarray:
    """Vectorised P_C for every object given pair rows and probabilities."""
    with np.errstate(divide="ignore"):  # p = 1 gives log 0 = -inf and P_C = 1
        logq = np.log1p(-np.minimum(p, 1.0))
    s = np.bincount(rows_i, logq, minlength=n) + np.bincount(rows_j, logq, minlength=n)
    return -np.expm1(s)


@dataclass(frozen=True)
class ConjunctionPair:
    id_i: int
    id_j: int
    rel_velocity: float  # km/s
    combined_sigma: float  # km^2
    pair_probability: float
    rand_draw: float

    def __post_init__(self):
        if self.id_i >= self.id_j:
            raise ConjunctionError("pairs are stored with id_i < id_j")
        if not 0.0 <= self.pair_probability <= 1.0 or self.rel_velocity < 0:
            raise ConjunctionError("invalid pair geometry")


@dataclass
class PairSet:
    """Column form of one timestep's conjunction pairs, sorted by (id_i, id_j)."""

    rows_i: np.ndarray
    rows_j: np.ndarray
    ids_i: np.ndarray
    ids_j: np.ndarray
    rel_velocity: np.ndarray
    sigma: np.ndarray
    probability: np.ndarray
    rand_draw: np.ndarray

    def __len__(self) -> int:
        return len(self.ids_i)

    @classmethod
    def empty(cls) -> "PairSet":
        zi, zf = np.zeros(0, np.int64), np.zeros(0)
        return cls(zi, zi, zi, zi, zf, zf, zf, zf)

    @classmethod
    def from_pairs(cls, pairs: list[ConjunctionPair]) -> "PairSet":
        if not pairs:
            return cls.empty()
        ids_i = np.array([p.id_i for p in pairs])
        ids_j = np.array([p.id_j for p in pairs])
        return cls(ids_i.copy(), ids_j.copy(), ids_i, ids_j,
                   np.array([p.rel_velocity for p in pairs]), np.array([p.combined_sigma for p in pairs]),
                   np.array([p.pair_probability for p in pairs]), np.array([p.rand_draw for p in pairs]))

    def records(self) -> list[ConjunctionPair]:
        return [ConjunctionPair(int(a), int(b), float(v), float(s), float(p), float(r))
                for a, b, v, s, p, r in zip(self.ids_i, self.ids_j, self.rel_velocity, self.sigma,
                                            self.probability, self.rand_draw)]

    def is_sorted(self) -> bool:
        if len(self) < 2:
            return True
        a, b = self.ids_i, self.ids_j
        return bool(np.all((a[1:] > a[:-1]) | ((a[1:] == a[:-1]) & (b[1:] > b[:-1]))))

    def subset(self, mask) -> "PairSet":
        return PairSet(*(getattr(self, f)[mask] for f in self.__dataclass_fields__))


def find_conjunctions(catalog: Catalog, edge: float, dt: float, phase_rng, rand_rng,
                      sigma_scale: float = 1.0, samples: int = 1, consts: GravityConstants = EARTH):
    """Sample positions, build the grid and score every co-resident pair.

    ``samples > 1`` repeats the position draw and averages probabilities
    over the repetitions (an oversampling hook for convergence studies).
    Returns ``(pairs, positions, velocities, neighbour_counts)`` where the
    geometry arrays come from the first sample.
    """
    n = len(catalog)
    if n < 2:
        z = np.zeros((n, 3))
        return PairSet.empty(), z, z, np.zeros(n, np.int64)
    chunks = []
    first = None
    neigh = np.zeros(n)
    for s in range(samples):
        phase = TWO_PI * (uniforms(phase_rng, catalog.ids, s) if samples > 1 else uniforms(phase_rng, catalog.ids))
        pos, vel = positions_at(catalog, phase, consts)
        grid, pairs = build_cube_grid(pos, edge, catalog.ids)
        neigh += grid.neighbour_counts()
        if first is None:
            first = (pos, vel)
        if len(pairs):
            i, j = pairs[:, 0], pairs[:, 1]
            v = np.linalg.norm(vel[i] - vel[j], axis=1)
            sigma = np.pi * ((catalog.radius[i] + catalog.radius[j]) * 1e-3) ** 2 * sigma_scale
            chunks.append((i, j, v, sigma))
    neigh /= samples
    if not chunks:
        return PairSet.empty(), first[0], first[1], neigh
    i, j, v, sigma = (np.concatenate(x) for x in zip(*chunks))
    p = pair_probability(edge, v, sigma, dt) / samples
    if samples > 1:
        key = i * n + j
        uk, inv = np.unique(key, return_inverse=True)
        cnt = np.bincount(inv)
        p = np.bincount(inv, p)
        v = np.bincount(inv, v) / cnt
        sigma = np.bincount(inv, sigma) / cnt
        i, j = uk // n, uk % n
    ids_i, ids_j = catalog.ids[i], catalog.ids[j]
    rand = uniforms(rand_rng, ids_i, ids_j)
    return PairSet(i, j, ids_i, ids_j, v, sigma, p, rand), first[0], first[1], neigh


CONJUNCTION_HEADER = ["t_days", "id_i", "id_j", "rel_vel_kms", "sigma_km2", "p_pair", "rand_draw"]


def write_conjunctions(fh, t_days: float, pairs: PairSet, header: bool = False) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(CONJUNCTION_HEADER)
    for r in pairs.records():
        w.writerow([repr(t_days), r.id_i, r.id_j, repr(r.rel_velocity), repr(r.combined_sigma),
                    repr(r.pair_probability), repr(r.rand_draw)])
