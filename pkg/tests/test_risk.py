import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adrsim.catalog import ShellGrid, shell_counts
from adrsim.conjunctions import PairSet, find_conjunctions, total_probability_by_object
from adrsim.fragmentation import DebrisFilter, classify_collision, filtered_fragment_count, sample_fragments, Parent
from adrsim.propagation import LifetimeTable
from adrsim.risk import (
    BackgroundDensityField, CSINorms, EpsilonConfig, EpsilonMode, IndexKind, Normalizations, RiskError,
    RiskRecord, RiskTracker, StaleRecordError, TrackerConfig, compute_index, csi, epsilon1, epsilon2,
    event_debris_increment, exp_fit_mean, fictitious_debris_increment, g_inclination, rank, read_rankings,
    refresh_background_density, update_expectation, write_rankings,
)
from adrsim.rng import CounterStream

from conftest import circular

LIFE = LifetimeTable()


def test_g_inclination():
    assert g_inclination(0.0) == pytest.approx(0.625)
    assert g_inclination(math.pi) == pytest.approx(1.0)
    assert g_inclination(math.pi / 2) == pytest.approx(0.8125)
    with pytest.raises(RiskError):
        g_inclination(-0.1)


@given(st.floats(0, math.pi), st.floats(0, math.pi))
def test_g_increasing(a, b):
    lo, hi = sorted([a, b])
    if hi - lo > 1e-6:
        assert g_inclination(lo) < g_inclination(hi)


def test_csi_examples():
    n = CSINorms(m0=10000.0, rho_ref=2.0, l_ref=5.0)
    assert csi(10000.0, 0.0, 2.0, 5.0, n) == pytest.approx(0.625)
    assert csi(20000.0, 0.3, 2.0, 5.0, n) == pytest.approx(2 * csi(10000.0, 0.3, 2.0, 5.0, n))
    assert csi(10000.0, 0.3, 0.0, 5.0, n) == 0.0


def test_update_expectation():
    assert update_expectation(2.0, 4.0) == 3.0
    E, seen = None, []
    for x in [0, 1, 1, 1]:
        E = update_expectation(E, x)
        seen.append(E)
    assert seen == [0, 0.5, 0.75, 0.875]
    E = None
    for _ in range(20):
        E = update_expectation(E, 3.5)
        assert E == 3.5


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
def test_expectation_bounded(xs):
    E = None
    for x in xs:
        E = update_expectation(E, x)
    assert min(xs) - 1e-6 <= E <= max(xs) + 1e-6


def test_exp_fit_mean():
    assert exp_fit_mean([0.1, 0.2, 0.3]) == pytest.approx(0.2)
    assert exp_fit_mean([0.7]) == 0.7
    assert exp_fit_mean([0, 0, 0]) == 0.0
    with pytest.raises(RiskError):
        exp_fit_mean([])


def test_density_refresh():
    grid = ShellGrid()
    counts = np.zeros(grid.n_shells)
    s = int((400 - grid.shell_floor) // grid.shell_width)
    counts[s] = 100
    fld = BackgroundDensityField(np.zeros(grid.n_shells), 0.0, 30.0)
    new = refresh_background_density(fld, counts, grid, 30.0)
    lo, hi = grid.edges[s], grid.edges[s + 1]
    V = 4 * math.pi / 3 * ((6378.137 + hi) ** 3 - (6378.137 + lo) ** 3)
    assert new.density[s] == pytest.approx(100 / V)
    assert new.density[s - 1] == 0.0 and new.last_update == 30.0
    twice = refresh_background_density(fld, 2 * counts, grid, 30.0)
    assert twice.density[s] == pytest.approx(2 * new.density[s])
    assert refresh_background_density(fld, counts, grid, 29.0) is fld
    static = BackgroundDensityField(np.zeros(grid.n_shells), 0.0, math.inf)
    assert refresh_background_density(static, counts, grid, 1e6) is static


def test_shell_from_400():
    grid = ShellGrid()
    assert grid.edges[int((400 - grid.shell_floor) // grid.shell_width)] == 400.0


def test_epsilon1():
    assert epsilon1(0.3, 0.3, 0.0, 0.5) == pytest.approx(0.5)
    assert epsilon1(0.0, 1.0, 0.0, 1.0) == pytest.approx(1 / (1 + math.exp(-10)))
    assert epsilon1(0.2, 0.2, 1.0, 0.2) == pytest.approx(1.5)
    with pytest.raises(RiskError):
        epsilon1(0.1, 0.1, 1.0, 0.0)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 3), st.floats(1e-9, 1))
def test_epsilon1_bounds(r, p, emax, pmax):
    v = epsilon1(r, p, emax, pmax)
    assert 0 <= v <= 1 + emax


def test_epsilon2():
    assert epsilon2(0.4, 0.4) == 1.0
    assert epsilon2(0.5, 0.25) == pytest.approx(0.5)
    assert epsilon2(0.1, 0.5) == 0.0
    with pytest.raises(RiskError):
        epsilon2(0.0, 0.1)


def one_pair(p=0.25, u=0.5):
    return PairSet(np.array([0]), np.array([1]), np.array([0]), np.array([1]), np.array([10.0]),
                   np.array([1.0]), np.array([p]), np.array([u]))


def test_fictitious_increment():
    cat = circular([0, 1, 2], 800.0, mass=500.0)
    filt = DebrisFilter(10.0, 0.1)
    inc = fictitious_debris_increment(one_pair(), cat, filt)
    col = classify_collision(500.0, 500.0, 10.0)
    want = filtered_fragment_count(col, 500.0, 500.0, 10.0, filt)
    assert inc[0] == inc[1] == pytest.approx(want) and inc[2] == 0
    lin = EpsilonConfig(EpsilonMode.Linear)
    same = fictitious_debris_increment(one_pair(0.5, 0.5), cat, filt, lin)
    assert same[0] == pytest.approx(want)
    half = fictitious_debris_increment(one_pair(0.25, 0.5), cat, filt, lin)
    assert half[0] == pytest.approx(want / 2)
    off = fictitious_debris_increment(one_pair(), cat, filt, EpsilonConfig())
    assert np.array_equal(off, inc)


def test_event_increment():
    assert event_debris_increment([]) == {}
    col = classify_collision(1000.0, 1000.0, 10.0)
    r = np.array([7000.0, 0, 0])
    v = np.array([0, 7.5, 0])
    out = sample_fragments(col, (Parent(4, 1000.0, 2, r, v), Parent(9, 1000.0, 2, r, v + [10, 0, 0])), 0.1,
                           np.random.default_rng(0))
    inc = event_debris_increment([out])
    assert inc == {4: float(out.total_count), 9: float(out.total_count)}


def test_compute_index():
    norms = Normalizations(1.0, 1.0, 1.0)
    rec = RiskRecord(1, 1.0, g_inclination(0.0), 1.0, 1.0, 1.0, 1.0, epoch=5.0)
    assert compute_index(rec, IndexKind.MITRI, norms, epoch=5.0) == pytest.approx(0.625)
    rec2 = RiskRecord(1, 2.0, g_inclination(0.0), 1.0, 1.0, 1.0, 1.0, epoch=5.0)
    assert compute_index(rec2, IndexKind.MITRI, norms) == pytest.approx(0.625 * 2**1.75)
    assert 2**1.75 == pytest.approx(3.3636, abs=1e-4)
    assert compute_index(rec2, IndexKind.MITRI, norms, 0.0) == compute_index(rec, IndexKind.MITRI, norms, 0.0)
    with pytest.raises(StaleRecordError):
        compute_index(rec, IndexKind.FMM, norms, epoch=10.0)


def test_normalization_floor():
    n = Normalizations(0.0, 1.0, 1.0, d0=0.0)
    assert n.m0 == 1e-12 and n.d0 == 1e-12


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=60), st.floats(1e-3, 1e3))
def test_rank_oracle_and_scaling(values, c):
    ids = np.arange(len(values))
    r = rank(ids, values)
    oracle = sorted(ids, key=lambda i: (-values[i], i))
    assert r.ids.tolist() == oracle
    assert rank(ids, np.asarray(values) * c).ids.tolist() == oracle
    assert r.percentile[-1] == 1.0


def test_rank_ties_by_id():
    assert rank([5, 3, 9, 1], [2.0, 2.0, 2.0, 2.0]).ids.tolist() == [1, 3, 5, 9]


def test_ranking_round_trip():
    a = rank([1, 2, 3], [3.0, 1.0, 2.0], 5.0, np.arange(18.0).reshape(3, 6))
    b = rank([4, 5], [1.0, 1.0], 10.0, np.ones((2, 6)))
    buf = io.StringIO()
    write_rankings(buf, [a, b])
    assert buf.getvalue().splitlines()[0] == ("epoch_days,rank,id,index_value,percentile,mass_term,density_term,"
                                              "lifetime_term,ER,ED,EP")
    buf.seek(0)
    back = read_rankings(buf)
    assert [x.epoch for x in back] == [5.0, 10.0]
    assert np.array_equal(back[0].ids, a.ids) and np.array_equal(back[0].terms, a.terms)


def test_tracker_config_validation():
    with pytest.raises(RiskError):
        TrackerConfig(kind="XYZ")
    with pytest.raises(RiskError):
        TrackerConfig(density_interval_days=0)
    with pytest.raises(RiskError):
        TrackerConfig(epsilon_mode="Sigmoid", eps_max=0.0)


def drive(trackers, catalog, steps=6, seed=0, with_events=True):
    """Feed identical observations to several trackers."""
    cs = CounterStream(seed)
    rng = np.random.default_rng(seed)
    for k in range(steps):
        t = 5.0 * (k + 1)
        pairs, pos, vel, nb = find_conjunctions(catalog, 1500.0, 5.0, cs.at("phase", k), cs.at("pair", k), 7.0)
        p_tot = total_probability_by_object(len(catalog), pairs.rows_i, pairs.rows_j, pairs.probability)
        outs = []
        if with_events and len(pairs):
            col = classify_collision(*sorted(catalog.mass[[pairs.rows_i[0], pairs.rows_j[0]]]), 10.0)
            r = np.array([7000.0, 0, 0])
            v = np.array([0, 7.5, 0])
            i, j = int(pairs.ids_i[0]), int(pairs.ids_j[0])
            outs = [sample_fragments(col, (Parent(i, 1.0, 1, r, v), Parent(j, 2.0, 1, r, v + [10, 0, 0])), 0.1, rng)]
        for tr in trackers:
            tr.refresh_density(catalog, t)
            tr.observe(catalog, t, pairs, nb, p_tot)
            tr.observe_events(catalog, outs)


def test_mitri_fmm_equivalence(mini_catalog):
    grid = ShellGrid()
    mitri = RiskTracker(TrackerConfig("MITRI", "MITRI"), mini_catalog, grid, LIFE, 5.0)
    fmm = RiskTracker(TrackerConfig("FMM", "FMM", None, fictitious=False, filtering=False), mini_catalog, grid,
                      LIFE, 5.0)
    drive([mitri, fmm], mini_catalog)
    a, b = mitri.accumulators(), fmm.accumulators()
    for k in a:
        assert np.array_equal(a[k], b[k], equal_nan=True), k
    assert np.any(a["D_acc"] > 0)
    ra, rb = mitri.ranking(mini_catalog, 30.0), fmm.ranking(mini_catalog, 30.0)
    assert np.array_equal(ra.ids, rb.ids) and np.array_equal(ra.values, rb.values)


def test_fmm_accumulates_every_pair(mini_catalog):
    fmm = RiskTracker(TrackerConfig("FMM", "FMM"), mini_catalog, ShellGrid(), LIFE, 5.0)
    drive([fmm], mini_catalog, with_events=False)
    assert np.sum(fmm.D_acc > 0) > 5


def test_epsilon_off_matches_plain(mini_catalog):
    a = RiskTracker(TrackerConfig("a", "FMM"), mini_catalog, ShellGrid(), LIFE, 5.0)
    b = RiskTracker(TrackerConfig("b", "FMM", epsilon_mode="Off", eps_max=0.5), mini_catalog, ShellGrid(), LIFE, 5.0)
    drive([a, b], mini_catalog, with_events=False)
    assert np.array_equal(a.D_acc, b.D_acc)


def test_normalization_scaling_keeps_order(mini_catalog):
    tr = RiskTracker(TrackerConfig("MITRI", "MITRI"), mini_catalog, ShellGrid(), LIFE, 5.0)
    drive([tr], mini_catalog)
    terms = tr.terms(mini_catalog)
    base = tr.index_values(mini_catalog, terms)
    order = rank(mini_catalog.ids, base).ids
    for name, mult in (("m0", 1.75), ("rho_b0", 0), ("l0", 0), ("r0", 1), ("d0", 1), ("p0", 1)):
        old = getattr(tr.norms, name)
        setattr(tr.norms, name, old * 3.0)
        t2 = tr.terms(mini_catalog) if name in ("m0",) else terms
        vals = tr.index_values(mini_catalog, t2)
        setattr(tr.norms, name, old)
        assert np.array_equal(rank(mini_catalog.ids, vals).ids, order)


def test_monotone_in_terms(mini_catalog):
    tr = RiskTracker(TrackerConfig("MITRI", "MITRI"), mini_catalog, ShellGrid(), LIFE, 5.0)
    drive([tr], mini_catalog)
    terms = tr.terms(mini_catalog)
    base = tr.index_values(mini_catalog, terms)
    r = int(np.argmax(base))
    for col in (0, 2, 3, 4, 5):
        t2 = terms.copy()
        t2[r, col] *= 1.1
        assert tr.index_values(mini_catalog, t2)[r] > base[r]


def test_mass_exponent_zero(mini_catalog):
    tr = RiskTracker(TrackerConfig("nm", "MITRI", mass_exponent=0.0), mini_catalog, ShellGrid(), LIFE, 5.0)
    drive([tr], mini_catalog)
    terms = tr.terms(mini_catalog)
    t2 = terms.copy()
    t2[:, 0] *= 7.0
    assert np.array_equal(tr.index_values(mini_catalog, terms), tr.index_values(mini_catalog, t2))


def test_csi_tracker_static(mini_catalog):
    tr = RiskTracker(TrackerConfig("CSI", "CSI"), mini_catalog, ShellGrid(), LIFE, 5.0)
    v0 = tr.index_values(mini_catalog)
    drive([tr], mini_catalog)
    assert np.array_equal(tr.index_values(mini_catalog), v0)
    assert np.all(v0 >= 0) and np.any(v0 > 0)


def test_realign_keeps_survivors(mini_catalog):
    tr = RiskTracker(TrackerConfig("MITRI", "MITRI"), mini_catalog, ShellGrid(), LIFE, 5.0)
    drive([tr], mini_catalog)
    before = dict(zip(tr.ids.tolist(), tr.sum_R.tolist()))
    sub = mini_catalog.take(np.arange(0, len(mini_catalog), 3))
    tr.realign(sub)
    assert np.array_equal(tr.ids, sub.ids)
    assert all(before[i] == s for i, s in zip(tr.ids.tolist(), tr.sum_R.tolist()))


def test_density_static_vs_dynamic(mini_catalog):
    grid = ShellGrid()
    static = RiskTracker(TrackerConfig("s", "FMM"), mini_catalog, grid, LIFE, 5.0)
    dyn = RiskTracker(TrackerConfig("d", "FMM", 30.0), mini_catalog, grid, LIFE, 5.0)
    sub = mini_catalog.take(np.arange(0, len(mini_catalog), 2))
    static.realign(sub)
    dyn.realign(sub)
    assert not dyn.refresh_density(sub, 25.0)
    assert dyn.refresh_density(sub, 30.0) and not static.refresh_density(sub, 30.0)
    assert np.array_equal(static.field.density, static.field0.density)
    assert np.allclose(dyn.field.density, shell_counts(sub, grid) / grid.volumes())
