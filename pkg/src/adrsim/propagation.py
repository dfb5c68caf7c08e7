"""First-order analytical propagation: J2 secular rates plus drag decay.

Drag follows the circular-orbit decay law da/dt = -BC * rho * sqrt(mu * a)
with BC = Cd*A/m. Units are harmonised internally to km, kg and s
(rho in kg/km^3, BC in km^2/kg).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .catalog import OrbitalState, PhysicalProperties, wrap_angle
from .constants import EARTH, SECONDS_PER_DAY, SECONDS_PER_YEAR, GravityConstants

DEFAULT_REENTRY_ALTITUDE = 150.0  # km
DEFAULT_LIFETIME_CAP = 1000.0  # years

KG_M3_TO_KG_KM3 = 1e9
M2_TO_KM2 = 1e-6


class DomainError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class AtmosphereModel:
    """Piecewise-exponential density table.

    ``scale`` multiplies every density; ``scale=0`` gives a vacuum.
    """

    base_altitude: np.ndarray  # km
    base_density: np.ndarray  # kg/m^3
    scale_height: np.ndarray  # km
    scale: float = 1.0

    def __post_init__(self):
        h, rho, H = (np.asarray(x, float) for x in (self.base_altitude, self.base_density, self.scale_height))
        object.__setattr__(self, "base_altitude", h)
        object.__setattr__(self, "base_density", rho)
        object.__setattr__(self, "scale_height", H)
        if not (len(h) == len(rho) == len(H) and len(h) > 0):
            raise DomainError("atmosphere table columns must be non-empty and equal length")
        if h[0] != 0.0 or np.any(np.diff(h) <= 0):
            raise DomainError("atmosphere bands must start at 0 km and be strictly ordered")
        if np.any(rho <= 0) or np.any(np.diff(rho) > 0) or np.any(H <= 0):
            raise DomainError("band densities must be positive and non-increasing; scale heights positive")
        if self.scale < 0:
            raise DomainError("density scale must be non-negative")

    @classmethod
    def from_csv(cls, text: str) -> "AtmosphereModel":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or set(rows[0]) != {"h_base_km", "rho_kgm3", "scale_height_km"}:
            raise DomainError("atmosphere file header must be h_base_km,rho_kgm3,scale_height_km")
        col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
        return cls(col("h_base_km"), col("rho_kgm3"), col("scale_height_km"))

    @classmethod
    def vacuum(cls) -> "AtmosphereModel":
        return replace(default_atmosphere(), scale=0.0)


_DEFAULT: AtmosphereModel | None = None


def default_atmosphere() -> AtmosphereModel:
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("adrsim").joinpath("data/atmosphere.csv").read_text()
        _DEFAULT = AtmosphereModel.from_csv(text)
    return _DEFAULT


def load_atmosphere(path: str | None) -> AtmosphereModel:
    if path is None:
        return default_atmosphere()
    with open(path) as fh:
        return AtmosphereModel.from_csv(fh.read())


def atmospheric_density(altitude, model: AtmosphereModel | None = None):
    """Density in kg/m^3; above the top band the top scale height extrapolates."""
    model = model or default_atmosphere()
    h = np.asarray(altitude, dtype=float)
    if np.any(h < 0) or np.any(np.isnan(h)):
        raise DomainError("altitude must be non-negative")
    band = np.searchsorted(model.base_altitude, h, side="right") - 1
    rho = model.scale * model.base_density[band] * np.exp(-(h - model.base_altitude[band]) / model.scale_height[band])
    return float(rho) if rho.ndim == 0 else rho


def decay_rate(a, bc, model: AtmosphereModel | None = None, consts: GravityConstants = EARTH):
    """da/dt in km/s for semi-major axis ``a`` (km) and BC in m^2/kg."""
    h = np.maximum(np.asarray(a, float) - consts.earth_radius, 0.0)
    rho = atmospheric_density(h, model) * KG_M3_TO_KG_KM3
    return -np.asarray(bc, float) * M2_TO_KM2 * rho * np.sqrt(consts.mu * np.asarray(a, float))


def j2_rates(a, e, inc, consts: GravityConstants = EARTH):
    """Secular (RAAN, argument of perigee) rates in rad/s and mean motion."""
    n = np.sqrt(consts.mu / a**3)
    p = a * (1.0 - e**2)
    k = n * consts.j2 * (consts.earth_radius / p) ** 2
    ci = np.cos(inc)
    return -1.5 * k * ci, 0.75 * k * (5.0 * ci**2 - 1.0), n


def propagate_elements(a, e, inc, raan, argp, ma, bc, dt: float, consts: GravityConstants = EARTH,
                       atmosphere: AtmosphereModel | None = None,
                       reentry_altitude: float = DEFAULT_REENTRY_ALTITUDE, hold_altitude=None):
    """Vectorised single-step propagation.

    One explicit Euler step of the drag law, J2 secular drift of RAAN and
    argument of perigee, and mean-motion advance of the mean anomaly.
    Rows flagged in ``hold_altitude`` keep their semi-major axis
    (station-keeping). Returns ``(a, raan, argp, ma, decayed)``.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    arrays = [np.asarray(x, float) for x in (a, e, inc, raan, argp, ma, bc)]
    if not all(np.all(np.isfinite(x)) for x in arrays):
        raise NumericError("non-finite orbital state")
    a, e, inc, raan, argp, ma, bc = arrays
    draan, dargp, n = j2_rates(a, e, inc, consts)
    a_new = a + decay_rate(a, bc, atmosphere, consts) * dt
    if hold_altitude is not None:
        a_new = np.where(hold_altitude, a, a_new)
    decayed = a_new - consts.earth_radius < reentry_altitude
    return (
        a_new,
        wrap_angle(raan + draan * dt),
        wrap_angle(argp + dargp * dt),
        wrap_angle(ma + n * dt),
        decayed,
    )


def propagate(state: OrbitalState, props: PhysicalProperties, dt: float, consts: GravityConstants = EARTH,
              atmosphere: AtmosphereModel | None = None,
              reentry_altitude: float = DEFAULT_REENTRY_ALTITUDE) -> tuple[OrbitalState, bool]:
    """Advance one object by ``dt`` seconds; returns the new state and a decayed flag.

    A decayed object's semi-major axis is clamped to the reentry radius so the
    returned state stays valid.
    """
    a, raan, argp, ma, decayed = propagate_elements(
        state.semi_major_axis, state.eccentricity, state.inclination, state.raan,
        state.arg_perigee, state.mean_anomaly, props.ballistic_coefficient, dt, consts,
        atmosphere, reentry_altitude,
    )
    a = float(a)
    if decayed:
        a = max(a, consts.earth_radius + reentry_altitude)
    new = OrbitalState(a, state.eccentricity, state.inclination, float(raan), float(argp), float(ma),
                       state.epoch + dt / SECONDS_PER_DAY)
    return new, bool(decayed)


def residual_lifetime_array(a, bc, cap: float = DEFAULT_LIFETIME_CAP, atmosphere: AtmosphereModel | None = None,
                            reentry_altitude: float = DEFAULT_REENTRY_ALTITUDE,
                            consts: GravityConstants = EARTH, max_step_days: float = 30.0,
                            max_loss_km: float = 5.0) -> np.ndarray:
    """Years until mean altitude falls below reentry, capped at ``cap``.

    Explicit Euler on the drag law with step min(30 days, time to lose 5 km);
    the crossing time inside the final step is interpolated linearly.
    """
    if not cap > 0:
        raise DomainError("cap must be positive")
    a = np.array(a, dtype=float, ndmin=1)
    bc = np.broadcast_to(np.asarray(bc, float), a.shape).copy()
    r_stop = consts.earth_radius + reentry_altitude
    t = np.zeros_like(a)
    cap_s = cap * SECONDS_PER_YEAR
    active = a >= r_stop
    max_step = max_step_days * SECONDS_PER_DAY
    while np.any(active):
        idx = np.flatnonzero(active)
        ai = a[idx]
        rate = decay_rate(ai, bc[idx], atmosphere, consts)
        with np.errstate(divide="ignore"):
            dt = np.where(rate < 0, np.minimum(max_step, max_loss_km / -rate), max_step)
        dt = np.minimum(dt, cap_s - t[idx])
        a_next = ai + rate * dt
        crossed = a_next < r_stop
        frac = np.where(crossed, (ai - r_stop) / np.where(crossed, ai - a_next, 1.0), 1.0)
        t[idx] += dt * frac
        a[idx] = a_next
        done = crossed | (t[idx] >= cap_s) | (rate == 0)
        t[idx[rate == 0]] = cap_s
        active[idx[done]] = False
    return np.minimum(t / SECONDS_PER_YEAR, cap)


def residual_lifetime(state: OrbitalState, props: PhysicalProperties, cap: float = DEFAULT_LIFETIME_CAP,
                      atmosphere: AtmosphereModel | None = None,
                      reentry_altitude: float = DEFAULT_REENTRY_ALTITUDE,
                      consts: GravityConstants = EARTH) -> float:
    return float(residual_lifetime_array(state.semi_major_axis, props.ballistic_coefficient, cap, atmosphere,
                                         reentry_altitude, consts)[0])


@dataclass
class LifetimeTable:
    """Closed-form lifetime lookup used by the engine.

    Because the decay law separates, lifetime(a, BC) = G(a) / BC with
    G(a) = integral from the reentry radius to a of da' / (rho(a') sqrt(mu a')).
    G is tabulated once by trapezoid quadrature on a fine altitude grid.
    """

    atmosphere: AtmosphereModel | None = None
    reentry_altitude: float = DEFAULT_REENTRY_ALTITUDE
    cap: float = DEFAULT_LIFETIME_CAP
    top_altitude: float = 2500.0
    step_km: float = 0.25
    consts: GravityConstants = EARTH
    _h: np.ndarray = field(init=False, repr=False)
    _logG: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        atm = self.atmosphere or default_atmosphere()
        self._vacuum = atm.scale == 0
        h = np.arange(self.reentry_altitude, self.top_altitude + self.step_km, self.step_km)
        if self._vacuum:
            self._h, self._logG = h, np.full_like(h, np.inf)
            return
        a = self.consts.earth_radius + h
        rho = atmospheric_density(h, atm) * KG_M3_TO_KG_KM3
        f = 1.0 / (rho * np.sqrt(self.consts.mu * a))
        G = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(h))])
        self._h = h
        with np.errstate(divide="ignore"):
            self._logG = np.log(G)

    def __call__(self, a, bc) -> np.ndarray:
        h = np.asarray(a, float) - self.consts.earth_radius
        if self._vacuum:
            return np.where(h < self.reentry_altitude, 0.0, self.cap) * np.ones_like(np.asarray(bc, float))
        hc = np.clip(h, self._h[0], self._h[-1])
        i = np.clip(np.searchsorted(self._h, hc) - 1, 0, len(self._h) - 2)
        w = (hc - self._h[i]) / self.step_km
        lo, hi = self._logG[i], self._logG[i + 1]
        # G(reentry) = 0; interpolate G itself in the first cell
        with np.errstate(invalid="ignore"):
            G = np.where(np.isfinite(lo), np.exp(lo + w * (hi - lo)), w * np.exp(hi))
        years = G / (np.asarray(bc, float) * M2_TO_KM2) / SECONDS_PER_YEAR
        return np.where(h < self.reentry_altitude, 0.0, np.minimum(years, self.cap))
