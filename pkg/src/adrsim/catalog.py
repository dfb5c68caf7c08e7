"""Object population: types, TLE ingestion, synthetic generation and shell binning.

The :class:`Catalog` stores the population column-wise (one numpy array per
field) because the engine touches every object every timestep.
:class:`ResidentSpaceObject` is the record view used at API boundaries.
"""

from __future__ import annotations

import csv
import io
import math
import string
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable

import numpy as np

from .constants import MU, R_EARTH, SECONDS_PER_DAY
from .rng import hash_keys, to_unit

TWO_PI = 2.0 * math.pi
DRAG_COEFFICIENT = 2.2
OUT_OF_RANGE = -1


class CatalogError(ValueError):
    pass


class TLEError(CatalogError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyCatalogError(CatalogError):
    pass


class ObjectClass(IntEnum):
    ActivePayload = 0
    DerelictPayload = 1
    RocketBody = 2
    Debris = 3


# mass kg, hard-body radius m
CLASS_DEFAULTS = {
    ObjectClass.ActivePayload: (700.0, 1.0),
    ObjectClass.DerelictPayload: (700.0, 1.0),
    ObjectClass.RocketBody: (2000.0, 2.5),
    ObjectClass.Debris: (5.0, 0.2),
}


def wrap_angle(x):
    return np.mod(x, TWO_PI)


@dataclass(frozen=True)
class OrbitalState:
    semi_major_axis: float  # km
    eccentricity: float
    inclination: float  # rad
    raan: float
    arg_perigee: float
    mean_anomaly: float
    epoch: float = 0.0  # days since simulation start

    def __post_init__(self):
        if not self.semi_major_axis > R_EARTH:
            raise CatalogError(f"semi-major axis {self.semi_major_axis} km is inside the Earth")
        if not 0.0 <= self.eccentricity < 1.0:
            raise CatalogError(f"eccentricity {self.eccentricity} outside [0, 1)")
        if not 0.0 <= self.inclination <= math.pi:
            raise CatalogError(f"inclination {self.inclination} outside [0, pi]")
        for name in ("raan", "arg_perigee", "mean_anomaly"):
            object.__setattr__(self, name, float(wrap_angle(getattr(self, name))))

    @property
    def mean_altitude(self) -> float:
        return self.semi_major_axis - R_EARTH

    @property
    def perigee_altitude(self) -> float:
        return self.semi_major_axis * (1.0 - self.eccentricity) - R_EARTH


@dataclass(frozen=True)
class PhysicalProperties:
    mass: float  # kg
    radius: float  # m
    cross_section: float | None = None  # m^2
    ballistic_coefficient: float | None = None  # m^2/kg, Cd*A/m

    def __post_init__(self):
        if not (self.mass > 0 and self.radius > 0):
            raise CatalogError("mass and radius must be strictly positive")
        if self.cross_section is None:
            object.__setattr__(self, "cross_section", math.pi * self.radius**2)
        if self.ballistic_coefficient is None:
            object.__setattr__(self, "ballistic_coefficient", DRAG_COEFFICIENT * self.cross_section / self.mass)
        for name in ("mass", "radius", "cross_section", "ballistic_coefficient"):
            if not getattr(self, name) > 0:
                raise CatalogError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class ResidentSpaceObject:
    id: int
    state: OrbitalState
    props: PhysicalProperties
    object_class: ObjectClass
    mission_years_remaining: float | None = None
    constellation_flag: bool = False

    def __post_init__(self):
        active = self.object_class == ObjectClass.ActivePayload
        if active and (self.mission_years_remaining is None or self.mission_years_remaining < 0):
            raise CatalogError(f"active payload {self.id} needs mission_years_remaining >= 0")
        if not active and self.mission_years_remaining is not None:
            raise CatalogError(f"object {self.id}: mission_years_remaining only applies to active payloads")


_FLOAT_COLUMNS = ("a", "e", "inc", "raan", "argp", "ma", "mass", "radius", "area", "bc", "mission")


class Catalog:
    """Column store of resident space objects, kept in ascending id order."""

    columns = ("ids", "cls", *_FLOAT_COLUMNS, "constellation", "born")

    def __init__(self, ids, cls, a, e, inc, raan, argp, ma, mass, radius, area, bc,
                 mission=None, constellation=None, born=None, epoch: float = 0.0, check: bool = True):
        n = len(ids)
        self.ids = np.asarray(ids, dtype=np.int64)
        self.cls = np.asarray(cls, dtype=np.int8)
        self.a = np.asarray(a, dtype=float)
        self.e = np.asarray(e, dtype=float)
        self.inc = np.asarray(inc, dtype=float)
        self.raan = wrap_angle(np.asarray(raan, dtype=float))
        self.argp = wrap_angle(np.asarray(argp, dtype=float))
        self.ma = wrap_angle(np.asarray(ma, dtype=float))
        self.mass = np.asarray(mass, dtype=float)
        self.radius = np.asarray(radius, dtype=float)
        self.area = np.asarray(area, dtype=float)
        self.bc = np.asarray(bc, dtype=float)
        self.mission = np.full(n, np.nan) if mission is None else np.asarray(mission, dtype=float)
        self.constellation = np.zeros(n, bool) if constellation is None else np.asarray(constellation, dtype=bool)
        # days at which the object entered the catalog
        self.born = np.full(n, float(epoch)) if born is None else np.asarray(born, dtype=float)
        self.epoch = float(epoch)
        if check:
            self.validate()

    # -- construction -------------------------------------------------------

    @classmethod
    def empty(cls, epoch: float = 0.0) -> "Catalog":
        z = np.zeros(0)
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int8), *([z] * 10), epoch=epoch)

    @classmethod
    def from_objects(cls, objects: Iterable[ResidentSpaceObject], epoch: float = 0.0) -> "Catalog":
        objs = sorted(objects, key=lambda o: o.id)
        if not objs:
            return cls.empty(epoch)
        s = [o.state for o in objs]
        p = [o.props for o in objs]
        return cls(
            ids=[o.id for o in objs],
            cls=[int(o.object_class) for o in objs],
            a=[x.semi_major_axis for x in s], e=[x.eccentricity for x in s],
            inc=[x.inclination for x in s], raan=[x.raan for x in s],
            argp=[x.arg_perigee for x in s], ma=[x.mean_anomaly for x in s],
            mass=[x.mass for x in p], radius=[x.radius for x in p],
            area=[x.cross_section for x in p], bc=[x.ballistic_coefficient for x in p],
            mission=[np.nan if o.mission_years_remaining is None else o.mission_years_remaining for o in objs],
            constellation=[o.constellation_flag for o in objs],
            born=[x.epoch for x in s],
            epoch=epoch,
        )

    def validate(self) -> None:
        n = len(self.ids)
        for name in self.columns:
            if len(getattr(self, name)) != n:
                raise CatalogError(f"column {name} has length {len(getattr(self, name))}, expected {n}")
        if n and np.any(np.diff(self.ids) <= 0):
            raise CatalogError("catalog ids must be unique and ascending")
        if n and not np.all(self.a > R_EARTH):
            raise CatalogError("semi-major axis inside the Earth")
        if n and not np.all((self.e >= 0) & (self.e < 1)):
            raise CatalogError("eccentricity outside [0, 1)")
        active = self.cls == ObjectClass.ActivePayload
        if np.any(active & ~(self.mission >= 0)) or np.any(~active & ~np.isnan(self.mission)):
            raise CatalogError("mission_years_remaining must be set exactly for active payloads")

    # -- views --------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def mean_altitude(self) -> np.ndarray:
        return self.a - R_EARTH

    def index_of(self, ids) -> np.ndarray:
        """Row positions of the given ids (which must be present)."""
        ids = np.asarray(ids, dtype=np.int64)
        rows = np.searchsorted(self.ids, ids)
        if np.any(rows >= len(self.ids)) or np.any(self.ids[np.minimum(rows, len(self.ids) - 1)] != ids):
            raise KeyError("id not in catalog")
        return rows

    def object(self, row: int) -> ResidentSpaceObject:
        c = ObjectClass(int(self.cls[row]))
        return ResidentSpaceObject(
            id=int(self.ids[row]),
            state=OrbitalState(self.a[row], self.e[row], self.inc[row], self.raan[row],
                               self.argp[row], self.ma[row], float(self.born[row])),
            props=PhysicalProperties(self.mass[row], self.radius[row], self.area[row], self.bc[row]),
            object_class=c,
            mission_years_remaining=float(self.mission[row]) if c == ObjectClass.ActivePayload else None,
            constellation_flag=bool(self.constellation[row]),
        )

    @property
    def objects(self) -> list[ResidentSpaceObject]:
        return [self.object(i) for i in range(len(self))]

    def __iter__(self):
        return iter(self.objects)

    # -- mutation helpers (return new catalogs) -----------------------------

    def take(self, rows) -> "Catalog":
        rows = np.asarray(rows)
        return Catalog(*(getattr(self, c)[rows] for c in self.columns), epoch=self.epoch, check=False)

    def copy(self) -> "Catalog":
        return Catalog(*(getattr(self, c).copy() for c in self.columns), epoch=self.epoch, check=False)

    def extend(self, other: "Catalog") -> "Catalog":
        """Append objects whose ids are all larger than the current maximum."""
        if len(other) == 0:
            return self.copy()
        if len(self) and other.ids.min() <= self.ids.max():
            order = np.argsort(np.concatenate([self.ids, other.ids]), kind="stable")
        else:
            order = None
        cols = [np.concatenate([getattr(self, c), getattr(other, c)]) for c in self.columns]
        if order is not None:
            cols = [c[order] for c in cols]
        return Catalog(*cols, epoch=self.epoch)

    def count_by_class(self) -> dict[ObjectClass, int]:
        counts = np.bincount(self.cls.astype(np.int64), minlength=4)
        return {c: int(counts[c]) for c in ObjectClass}

    def equals(self, other: "Catalog") -> bool:
        return len(self) == len(other) and all(
            np.array_equal(getattr(self, c), getattr(other, c), equal_nan=getattr(self, c).dtype.kind == "f")
            for c in self.columns
        )


def make_catalog(ids, cls, a, e, inc, raan, argp, ma, mass, radius, mission=None,
                 constellation=None, born=None, epoch=0.0, area=None, bc=None) -> Catalog:
    """Build a catalog, deriving area (pi r^2) and Cd*A/m when not given."""
    radius = np.asarray(radius, float)
    mass = np.asarray(mass, float)
    area = np.pi * radius**2 if area is None else np.asarray(area, float)
    bc = DRAG_COEFFICIENT * area / mass if bc is None else np.asarray(bc, float)
    order = np.argsort(np.asarray(ids), kind="stable")
    cols = [ids, cls, a, e, inc, raan, argp, ma, mass, radius, area, bc]
    cols = [np.asarray(c)[order] for c in cols]
    extra = [None if x is None else np.asarray(x)[order] for x in (mission, constellation, born)]
    return Catalog(*cols, *extra, epoch=epoch)


# ---------------------------------------------------------------------------
# Shell binning


@dataclass(frozen=True)
class ShellGrid:
    shell_floor: float = 200.0  # km
    shell_width: float = 50.0
    shell_ceiling: float = 2000.0

    def __post_init__(self):
        if not self.shell_width > 0:
            raise CatalogError("shell_width must be positive")
        if not self.shell_ceiling > self.shell_floor:
            raise CatalogError("shell_ceiling must exceed shell_floor")

    @property
    def n_shells(self) -> int:
        return int(math.ceil((self.shell_ceiling - self.shell_floor) / self.shell_width - 1e-12))

    @property
    def edges(self) -> np.ndarray:
        e = self.shell_floor + self.shell_width * np.arange(self.n_shells + 1)
        e[-1] = min(e[-1], self.shell_ceiling)
        return e

    def volumes(self) -> np.ndarray:
        """Shell volumes in km^3."""
        r = R_EARTH + self.edges
        return 4.0 * np.pi / 3.0 * (r[1:] ** 3 - r[:-1] ** 3)


def shell_index(altitude, grid: ShellGrid = ShellGrid()):
    """Shell id of each altitude, or ``OUT_OF_RANGE`` outside [floor, ceiling)."""
    alt = np.asarray(altitude, dtype=float)
    idx = np.floor((alt - grid.shell_floor) / grid.shell_width).astype(np.int64)
    bad = (alt < grid.shell_floor) | (alt >= grid.shell_ceiling) | ~np.isfinite(alt)
    idx = np.where(bad, OUT_OF_RANGE, np.minimum(idx, grid.n_shells - 1))
    return int(idx) if idx.ndim == 0 else idx


def shell_counts(catalog: Catalog, grid: ShellGrid = ShellGrid()) -> np.ndarray:
    """Per-shell object counts using mean altitude a - R_earth."""
    idx = shell_index(catalog.mean_altitude, grid)
    idx = np.atleast_1d(idx)
    return np.bincount(idx[idx >= 0], minlength=grid.n_shells)[: grid.n_shells]


# ---------------------------------------------------------------------------
# Synthetic populations


@dataclass
class ClassSpec:
    count: int = 0
    altitude_km: tuple = (600.0, 900.0)
    # a single (lo, hi) band or a list of bands picked with equal weight
    inclination_deg: tuple | list = (0.0, 100.0)
    mass_kg: tuple = (1.0, 1.0)
    radius_m: tuple = (0.1, 0.1)
    eccentricity: tuple = (0.0, 0.01)
    constellation_fraction: float = 0.0


@dataclass
class PopulationSpec:
    # each class takes one ClassSpec or a list of them (sub-populations)
    active: ClassSpec | list = field(default_factory=ClassSpec)
    derelict: ClassSpec | list = field(default_factory=ClassSpec)
    rocket_body: ClassSpec | list = field(default_factory=ClassSpec)
    debris: ClassSpec | list = field(default_factory=ClassSpec)
    mission_lifetime: float = 8.0  # years; active payloads get U(0, this) remaining

    def items(self):
        out = []
        for c, spec in ((ObjectClass.ActivePayload, self.active), (ObjectClass.DerelictPayload, self.derelict),
                        (ObjectClass.RocketBody, self.rocket_body), (ObjectClass.Debris, self.debris)):
            for cs in spec if isinstance(spec, (list, tuple)) else [spec]:
                out.append((c, cs))
        return tuple(out)


def _check_bounds(name, lo, hi, lower=-math.inf):
    if not (lo <= hi) or lo < lower:
        raise CatalogError(f"invalid bounds for {name}: ({lo}, {hi})")


def _bands(inc):
    if len(inc) == 2 and all(isinstance(x, (int, float)) for x in inc):
        return [tuple(inc)]
    return [tuple(b) for b in inc]


def synth_population(spec: PopulationSpec, seed: int) -> Catalog:
    """Draw a synthetic catalog; bitwise reproducible for a given (spec, seed).

    Mass is log-uniform within its bounds and radius tracks the same quantile,
    so heavier objects are also larger.
    """
    for c, cs in spec.items():
        if cs.count < 0:
            raise CatalogError(f"{c.name}: count must be >= 0")
        _check_bounds(f"{c.name}.altitude_km", *cs.altitude_km, lower=0.0)
        _check_bounds(f"{c.name}.mass_kg", *cs.mass_kg, lower=1e-12)
        _check_bounds(f"{c.name}.radius_m", *cs.radius_m, lower=1e-12)
        _check_bounds(f"{c.name}.eccentricity", *cs.eccentricity, lower=0.0)
        if cs.eccentricity[1] >= 1:
            raise CatalogError(f"{c.name}: eccentricity must stay below 1")
        for b in _bands(cs.inclination_deg):
            _check_bounds(f"{c.name}.inclination_deg", *b, lower=0.0)
            if b[1] > 180:
                raise CatalogError(f"{c.name}: inclination above 180 deg")

    rng = np.random.default_rng(seed)
    parts = []
    for c, cs in spec.items():
        n = int(cs.count)
        alt = rng.uniform(*cs.altitude_km, n)
        ecc = rng.uniform(*cs.eccentricity, n)
        a = (R_EARTH + alt)
        bands = _bands(cs.inclination_deg)
        pick = rng.integers(0, len(bands), n)
        lo = np.array([b[0] for b in bands])[pick]
        hi = np.array([b[1] for b in bands])[pick]
        inc = np.radians(lo + (hi - lo) * rng.random(n))
        raan, argp, ma = (rng.uniform(0, TWO_PI, n) for _ in range(3))
        q = rng.random(n)
        mass = np.exp(np.log(cs.mass_kg[0]) + q * (np.log(cs.mass_kg[1]) - np.log(cs.mass_kg[0])))
        radius = cs.radius_m[0] + q * (cs.radius_m[1] - cs.radius_m[0])
        mission = rng.uniform(0, spec.mission_lifetime, n) if c == ObjectClass.ActivePayload else np.full(n, np.nan)
        constellation = rng.random(n) < cs.constellation_fraction
        parts.append((np.full(n, int(c)), a, ecc, inc, raan, argp, ma, mass, radius, mission, constellation))

    cols = [np.concatenate(x) for x in zip(*parts)]
    n = len(cols[0])
    ids = rng.permutation(n) + 1
    cls, a, e, inc, raan, argp, ma, mass, radius, mission, constellation = cols
    # a perigee under the Earth's surface is not a valid orbit
    e = np.minimum(e, np.maximum(0.0, 1.0 - (R_EARTH + 100.0) / a))
    return make_catalog(ids, cls, a, e, inc, raan, argp, ma, mass, radius, mission, constellation)


# ---------------------------------------------------------------------------
# TLE format


def tle_checksum(line: str) -> int:
    s = 0
    for ch in line[:68]:
        if ch in string.digits:
            s += int(ch)
        elif ch == "-":
            s += 1
    return s % 10


def _classify_name(name: str | None) -> ObjectClass:
    if not name:
        return ObjectClass.ActivePayload
    up = name.upper()
    if "R/B" in up or "ROCKET" in up:
        return ObjectClass.RocketBody
    if "DEB" in up:
        return ObjectClass.Debris
    if "DERELICT" in up:
        return ObjectClass.DerelictPayload
    return ObjectClass.ActivePayload


def _check_line(line: str, number: int, lineno: int) -> None:
    if len(line) != 69:
        raise TLEError(f"TLE line {number} has length {len(line)}, expected 69", lineno)
    if line[0] != str(number):
        raise TLEError(f"expected TLE line {number}, found {line[:1]!r}", lineno)
    if not line[68].isdigit() or int(line[68]) != tle_checksum(line):
        raise TLEError(f"checksum mismatch on TLE line {number} (expected {tle_checksum(line)})", lineno)


def _epoch_days(field_: str) -> float:
    yy = int(field_[:2])
    year = 2000 + yy if yy < 57 else 1900 + yy
    doy = float(field_[2:])
    # days since 1957-01-01, a monotone absolute scale
    return (year - 1957) * 365.25 + doy


def parse_tle_file(text: str, strict: bool = True, mission_lifetime: float = 8.0):
    """Parse 2- or 3-line TLE records into a :class:`Catalog`.

    Mean motion is converted to semi-major axis with a = (mu / n^2)^(1/3).
    Classes come from the name line (``R/B`` rocket body, ``DEB`` debris,
    otherwise active payload); physical properties take class defaults and
    can be overridden afterwards with :func:`apply_properties`.

    With ``strict=False`` malformed records are skipped; the skipped errors
    are available on the returned catalog as ``catalog.errors``.
    """
    lines = [(i + 1, ln.rstrip("\r\n")) for i, ln in enumerate(io.StringIO(text))]
    lines = [(i, ln) for i, ln in lines if ln.strip()]
    records, errors = [], []
    k = 0
    while k < len(lines):
        name = None
        lineno, ln = lines[k]
        if not ln.startswith("1 ") or len(ln) != 69:
            if ln.startswith("1 ") or ln.startswith("2 "):
                err = TLEError(f"malformed or out-of-sequence TLE line (length {len(ln)})", lineno)
                if strict:
                    raise err
                errors.append(err)
                k += 1
                continue
            name = ln[2:].strip() if ln.startswith("0 ") else ln.strip()
            k += 1
        if k + 1 >= len(lines):
            err = TLEError("incomplete TLE record", lines[min(k, len(lines) - 1)][0])
            if strict:
                raise err
            errors.append(err)
            break
        (n1, l1), (n2, l2) = lines[k], lines[k + 1]
        k += 2
        try:
            _check_line(l1, 1, n1)
            _check_line(l2, 2, n2)
            if l1[2:7] != l2[2:7]:
                raise TLEError("catalog numbers differ between lines 1 and 2", n2)
            rec = _parse_record(name, l1, l2, n1, n2)
        except TLEError as err:
            if strict:
                raise
            errors.append(err)
            continue
        records.append(rec)
    if not records:
        raise EmptyCatalogError("no valid TLE records found")

    ids = np.array([r["id"] for r in records])
    if len(np.unique(ids)) != len(ids):
        raise CatalogError("duplicate catalog numbers in TLE input")
    cls = np.array([int(r["cls"]) for r in records])
    mass = np.array([CLASS_DEFAULTS[ObjectClass(c)][0] for c in cls])
    radius = np.array([CLASS_DEFAULTS[ObjectClass(c)][1] for c in cls])
    # remaining mission life is not in a TLE; spread it deterministically by id
    spread = to_unit(hash_keys(0, "tle-mission", ids)) * mission_lifetime
    mission = np.where(cls == ObjectClass.ActivePayload, spread, np.nan)
    cat = make_catalog(
        ids, cls,
        [r["a"] for r in records], [r["e"] for r in records], [r["inc"] for r in records],
        [r["raan"] for r in records], [r["argp"] for r in records], [r["ma"] for r in records],
        mass, radius, mission=mission,
    )
    cat.errors = errors
    cat.names = {r["id"]: r["name"] for r in records}
    return cat


def _parse_record(name, l1, l2, n1, n2) -> dict:
    try:
        satnum = int(l1[2:7])
        epoch = _epoch_days(l1[18:32].strip())
        inc = math.radians(float(l2[8:16]))
        raan = math.radians(float(l2[17:25]))
        ecc = float("0." + l2[26:33].strip())
        argp = math.radians(float(l2[34:42]))
        ma = math.radians(float(l2[43:51]))
        n_rev_day = float(l2[52:63])
    except ValueError as exc:
        raise TLEError(f"unparsable field: {exc}", n2) from None
    if n_rev_day <= 0:
        raise TLEError("mean motion must be positive", n2)
    n = n_rev_day * TWO_PI / SECONDS_PER_DAY
    a = (MU / n**2) ** (1.0 / 3.0)
    if a <= R_EARTH or not 0 <= inc <= math.pi:
        raise TLEError("elements do not describe a valid orbit", n2)
    return dict(id=satnum, name=name, cls=_classify_name(name), epoch=epoch,
                a=a, e=ecc, inc=inc, raan=raan, argp=argp, ma=ma)


_CLASS_TAG = {
    ObjectClass.ActivePayload: "PAYLOAD",
    ObjectClass.DerelictPayload: "DERELICT",
    ObjectClass.RocketBody: "R/B",
    ObjectClass.Debris: "DEB",
}


def _with_checksum(body: str) -> str:
    body = body.ljust(68)[:68]
    return body + str(tle_checksum(body))


def format_tle(obj: ResidentSpaceObject, epoch_field: str = "24001.00000000") -> str:
    """Emit a 3-line TLE for an object; the name line encodes its class."""
    s = obj.state
    if not 0 <= obj.id <= 99999:
        raise CatalogError("TLE catalog numbers are limited to 5 digits")
    n = math.sqrt(MU / s.semi_major_axis**3) * SECONDS_PER_DAY / TWO_PI
    ecc = f"{s.eccentricity:.7f}"[2:]
    l1 = _with_checksum(
        f"1 {obj.id:05d}U 00000A   {epoch_field} -.00000000  00000-0  00000-0 0  999"
    )
    l2 = _with_checksum(
        f"2 {obj.id:05d} {math.degrees(s.inclination):8.4f} {math.degrees(s.raan):8.4f} {ecc} "
        f"{math.degrees(s.arg_perigee):8.4f} {math.degrees(s.mean_anomaly):8.4f} {n:11.8f}    0"
    )
    return f"0 OBJECT {obj.id} {_CLASS_TAG[obj.object_class]}\n{l1}\n{l2}\n"


def emit_tle(catalog: Catalog) -> str:
    return "".join(format_tle(o) for o in catalog.objects)


# ---------------------------------------------------------------------------
# Delimited-text interfaces

SNAPSHOT_HEADER = ["id", "class", "a_km", "ecc", "inc_rad", "raan_rad", "argp_rad", "ma_rad",
                   "mass_kg", "radius_m", "bc_m2kg"]
PROPERTIES_HEADER = ["id", "mass_kg", "radius_m", "bc_m2kg", "class"]


def _parse_class(value: str) -> ObjectClass:
    try:
        return ObjectClass[value]
    except KeyError:
        return ObjectClass(int(value))


def apply_properties(catalog: Catalog, text: str) -> Catalog:
    """Override mass/radius/BC/class from a sidecar ``id,mass_kg,radius_m,bc_m2kg,class`` file.

    Empty cells keep the current value. Ids not in the catalog are an error.
    """
    out = catalog.copy()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != PROPERTIES_HEADER:
        raise CatalogError(f"properties header must be {','.join(PROPERTIES_HEADER)}")
    for lineno, row in enumerate(reader, start=2):
        try:
            r = out.index_of([int(row["id"])])[0]
        except (KeyError, ValueError):
            raise CatalogError(f"properties line {lineno}: unknown id {row['id']!r}") from None
        if row["mass_kg"].strip():
            out.mass[r] = float(row["mass_kg"])
        if row["radius_m"].strip():
            out.radius[r] = float(row["radius_m"])
            out.area[r] = math.pi * out.radius[r] ** 2
        if row["bc_m2kg"].strip():
            out.bc[r] = float(row["bc_m2kg"])
        else:
            out.bc[r] = DRAG_COEFFICIENT * out.area[r] / out.mass[r]
        if row["class"].strip():
            c = _parse_class(row["class"].strip())
            if c != out.cls[r]:
                out.cls[r] = c
                out.mission[r] = 0.0 if c == ObjectClass.ActivePayload else np.nan
    out.validate()
    return out


def write_snapshot(catalog: Catalog, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SNAPSHOT_HEADER)
    for i in range(len(catalog)):
        w.writerow([int(catalog.ids[i]), ObjectClass(int(catalog.cls[i])).name,
                    *(repr(float(getattr(catalog, c)[i])) for c in ("a", "e", "inc", "raan", "argp", "ma",
                                                                  "mass", "radius", "bc"))])


def read_snapshot(text: str, mission_lifetime: float = 8.0) -> Catalog:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != SNAPSHOT_HEADER:
        raise CatalogError(f"snapshot header must be {','.join(SNAPSHOT_HEADER)}")
    rows = list(reader)
    if not rows:
        raise EmptyCatalogError("snapshot contains no objects")
    get = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
    ids = np.array([int(r["id"]) for r in rows])
    cls = np.array([int(_parse_class(r["class"])) for r in rows])
    radius = get("radius_m")
    spread = to_unit(hash_keys(0, "tle-mission", ids)) * mission_lifetime
    return make_catalog(ids, cls, get("a_km"), get("ecc"), get("inc_rad"), get("raan_rad"),
                        get("argp_rad"), get("ma_rad"), get("mass_kg"), radius,
                        mission=np.where(cls == ObjectClass.ActivePayload, spread, np.nan),
                        bc=get("bc_m2kg"))


def load_catalog(path: str) -> Catalog:
    """Load a catalog from a TLE file or a snapshot CSV (by content sniffing)."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("id,"):
        return read_snapshot(text)
    return parse_tle_file(text)
