"""Physical constants shared across the simulator."""

from dataclasses import dataclass

DAYS_PER_YEAR = 365.25
SECONDS_PER_DAY = 86400.0
SECONDS_PER_YEAR = DAYS_PER_YEAR * SECONDS_PER_DAY


@dataclass(frozen=True)
class GravityConstants:
    mu: float = 398600.4418  # km^3/s^2
    earth_radius: float = 6378.137  # km
    j2: float = 1.08262668e-3


EARTH = GravityConstants()
MU = EARTH.mu
R_EARTH = EARTH.earth_radius
J2 = EARTH.j2
