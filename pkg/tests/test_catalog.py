import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adrsim.catalog import (
    OUT_OF_RANGE, Catalog, CatalogError, ClassSpec, EmptyCatalogError, ObjectClass, OrbitalState,
    PhysicalProperties, PopulationSpec, ShellGrid, TLEError, apply_properties, emit_tle, parse_tle_file,
    read_snapshot, shell_counts, shell_index, synth_population, write_snapshot,
)
from adrsim.constants import MU, R_EARTH

from conftest import circular, mini_spec


def checksum(body):
    s = sum(int(c) if c.isdigit() else (1 if c == "-" else 0) for c in body[:68])
    return body[:68] + str(s % 10)


L1 = checksum("1 25544U 98067A   24001.50000000  .00016717  00000-0  10270-3 0  9005")
L2 = checksum("2 25544  51.6416 247.4627 0006703 130.5360 325.0288 15.49000000 00001")


def test_iss_semi_major_axis():
    cat = parse_tle_file(f"ISS (ZARYA)\n{L1}\n{L2}\n")
    n = 15.49 * 2 * math.pi / 86400.0
    assert len(cat) == 1
    assert abs(cat.a[0] - (MU / n**2) ** (1 / 3)) < 1e-6
    assert abs(cat.a[0] - 6797.79) < 0.01
    assert abs(cat.inc[0] - math.radians(51.6416)) < 1e-9


def test_bad_checksum_names_line():
    bad = L1[:68] + str((int(L1[68]) + 1) % 10)
    with pytest.raises(TLEError) as e:
        parse_tle_file(f"{bad}\n{L2}\n")
    assert e.value.line == 1


def test_empty_input():
    with pytest.raises(EmptyCatalogError):
        parse_tle_file("")


def test_short_line_rejected():
    with pytest.raises(TLEError):
        parse_tle_file(f"{L1[:60]}\n{L2}\n")


def test_lenient_parse_skips_bad_records():
    bad = L1[:68] + str((int(L1[68]) + 1) % 10)
    l1b = checksum("1 25545U 98067A   24001.50000000  .00016717  00000-0  10270-3 0  9005")
    l2b = checksum("2 25545  51.6416 247.4627 0006703 130.5360 325.0288 15.49000000 00001")
    cat = parse_tle_file(f"{bad}\n{L2}\n{l1b}\n{l2b}\n", strict=False)
    assert cat.ids.tolist() == [25545]
    assert len(cat.errors) == 1


def test_class_defaults_from_names():
    text = f"0 SL-16 R/B\n{L1}\n{L2}\n"
    cat = parse_tle_file(text)
    assert cat.cls[0] == ObjectClass.RocketBody
    assert cat.mass[0] == 2000.0 and cat.radius[0] == 2.5


def test_tle_round_trip(mini_catalog):
    small = mini_catalog.take(np.arange(25))
    back = parse_tle_file(emit_tle(small))
    assert np.array_equal(back.ids, small.ids)
    assert np.array_equal(back.cls, small.cls)
    assert np.allclose(back.inc, small.inc, atol=1e-5)
    assert np.allclose(back.raan, small.raan, atol=1e-5)
    assert np.allclose(back.e, small.e, atol=1e-7)
    assert np.allclose(back.a, small.a, rtol=1e-7)


def test_snapshot_round_trip(mini_catalog):
    buf = io.StringIO()
    write_snapshot(mini_catalog, buf)
    back = read_snapshot(buf.getvalue())
    for c in ("ids", "cls", "a", "e", "inc", "raan", "argp", "ma", "mass", "radius", "bc"):
        assert np.array_equal(getattr(back, c), getattr(mini_catalog, c)), c


def test_properties_sidecar(mini_catalog):
    i = int(mini_catalog.ids[0])
    out = apply_properties(mini_catalog, f"id,mass_kg,radius_m,bc_m2kg,class\n{i},123.0,2.0,,RocketBody\n")
    r = out.index_of([i])[0]
    assert out.mass[r] == 123.0 and out.cls[r] == ObjectClass.RocketBody
    assert abs(out.area[r] - math.pi * 4.0) < 1e-12
    with pytest.raises(CatalogError):
        apply_properties(mini_catalog, "id,mass_kg,radius_m,bc_m2kg,class\n999999,1,1,,\n")


def test_shell_index_examples():
    g = ShellGrid()
    assert shell_index(200.0, g) == 0
    assert shell_index(774.0, g) == 11
    assert shell_index(2500.0, g) == OUT_OF_RANGE
    assert shell_index(199.9, g) == OUT_OF_RANGE


def test_shell_counts_examples():
    g = ShellGrid()
    assert shell_counts(Catalog.empty(), g).sum() == 0
    c = shell_counts(circular([1, 2, 3], 700.0), g)
    assert c[shell_index(700.0, g)] == 3 and c.sum() == 3


def test_shell_counts_brute_force(mini_catalog):
    g = ShellGrid(600.0, 50.0, 1000.0)
    c = shell_counts(mini_catalog, g)
    alt = mini_catalog.a - R_EARTH
    for s in range(g.n_shells):
        lo = 600 + 50 * s
        assert c[s] == np.sum((alt >= lo) & (alt < lo + 50))
    inside = np.sum((alt >= 600) & (alt < 1000))
    assert c.sum() == inside


@given(st.lists(st.floats(0, 3000, allow_nan=False), max_size=50))
def test_every_altitude_in_one_shell(alts):
    g = ShellGrid()
    idx = np.atleast_1d(shell_index(np.array(alts, float), g))
    for h, s in zip(alts, idx):
        if s == OUT_OF_RANGE:
            assert h < g.shell_floor or h >= g.shell_ceiling
        else:
            assert g.shell_floor + s * g.shell_width <= h < g.shell_floor + (s + 1) * g.shell_width


def test_synth_zero_and_bounds():
    assert len(synth_population(PopulationSpec(), 0)) == 0
    spec = PopulationSpec(debris=ClassSpec(1000, (600.0, 900.0), (0.0, 100.0), (1.0, 2.0), (0.1, 0.2)))
    cat = synth_population(spec, 5)
    alt = cat.a - R_EARTH
    assert len(cat) == 1000 and alt.min() >= 600 and alt.max() <= 900
    with pytest.raises(CatalogError):
        synth_population(PopulationSpec(debris=ClassSpec(10, (900.0, 600.0))), 0)


def test_synth_reproducible():
    a, b = synth_population(mini_spec(), 11), synth_population(mini_spec(), 11)
    assert a.equals(b)
    assert not a.equals(synth_population(mini_spec(), 12))


def test_catalog_sorted_unique(mini_catalog):
    assert np.all(np.diff(mini_catalog.ids) > 0)
    only_active = mini_catalog.cls == ObjectClass.ActivePayload
    assert np.all(np.isfinite(mini_catalog.mission[only_active]))
    assert np.all(np.isnan(mini_catalog.mission[~only_active]))


def test_domain_type_invariants():
    with pytest.raises(CatalogError):
        OrbitalState(6000.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    with pytest.raises(CatalogError):
        OrbitalState(7000.0, 1.0, 0.0, 0.0, 0.0, 0.0)
    s = OrbitalState(7000.0, 0.0, 0.5, -1.0, 7.0, 100.0)
    assert 0 <= s.raan < 2 * math.pi and 0 <= s.arg_perigee < 2 * math.pi
    p = PhysicalProperties(10.0, 0.5)
    assert abs(p.cross_section - math.pi * 0.25) < 1e-12
    with pytest.raises(CatalogError):
        PhysicalProperties(0.0, 1.0)
