import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from adrsim.catalog import ClassSpec, PopulationSpec, make_catalog, synth_population, ObjectClass
from adrsim.constants import R_EARTH

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def mini_spec(n_active=30, n_derelict=40, n_rb=20, n_debris=110, alt=(700.0, 900.0)):
    return PopulationSpec(
        active=ClassSpec(n_active, alt, (80.0, 100.0), (100.0, 1500.0), (0.5, 2.0)),
        derelict=ClassSpec(n_derelict, alt, (80.0, 100.0), (500.0, 3000.0), (1.0, 3.0)),
        rocket_body=ClassSpec(n_rb, alt, (80.0, 100.0), (1000.0, 4000.0), (2.0, 4.0)),
        debris=ClassSpec(n_debris, alt, (80.0, 100.0), (0.1, 5.0), (0.05, 0.3)),
    )


@pytest.fixture
def mini_catalog():
    return synth_population(mini_spec(), 3)


def circular(ids, alt_km, inc=0.0, mass=100.0, radius=1.0, cls=ObjectClass.Debris, ma=None):
    """Circular-orbit catalog helper."""
    ids = np.asarray(ids)
    n = len(ids)
    b = lambda x: np.broadcast_to(np.asarray(x, float), (n,)).copy()  # noqa: E731
    c = np.broadcast_to(np.asarray(int(cls)), (n,)).copy() if np.ndim(cls) == 0 else np.asarray(cls)
    mission = np.where(c == ObjectClass.ActivePayload, 5.0, np.nan)
    return make_catalog(ids, c, R_EARTH + b(alt_km), b(0.0), b(inc), b(0.0), b(0.0),
                        b(0.0) if ma is None else b(ma), b(mass), b(radius), mission=mission)


def small_config(years=2.0, **kw):
    """A fast end-to-end configuration around the mini population."""
    from adrsim.engine import PopulationConfig, SimulationConfig

    # a thin crowded shell and an inflated cross-section so two years see collisions
    base = dict(horizon_years=years, cube_edge_km=100.0, sigma_scale=1000.0, record_every=5,
                population=PopulationConfig(synthetic=mini_spec(alt=(790.0, 810.0)), population_seed=3))
    base.update(kw)
    return SimulationConfig(**base)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s[1:3])):
            terminalreporter.write_line(line)
