import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gietrenorm import intmat
from gietrenorm.combinatorics import rotation_pair, symmetric_pair
from gietrenorm.errors import ConfigError, ConnectionDetected, FloorBudgetExceeded
from gietrenorm.fixtures import (
    d4_loop,
    golden_iet,
    moebius_conjugate,
    periodic_iet,
    random_path_aiet,
    zorich_blocks,
    zorich_period,
)
from gietrenorm.giet import Iet
from gietrenorm.renorm import (
    LengthOrbit,
    RenormState,
    WordStore,
    accelerate_on_good_returns,
    brute_force_first_return,
    induced_map_error,
    orbit_csv,
    orbit_for,
    orbit_rows,
    partition,
    run_length,
)

GOLD = (math.sqrt(5) - 1) / 2


def test_golden_orbit_alternates_and_is_self_similar(golden):
    orb = LengthOrbit(golden_iet(60), "extended", 60).run(20)
    assert [m.value for m in orb.zorich_moves[:4]] in (["top", "bottom"] * 2, ["bottom", "top"] * 2)
    assert all(z in [((1, 1), (0, 1)), ((1, 0), (1, 1))] for z in orb.zorich_matrices)
    assert orb.lambda_n == pytest.approx(golden.lam, abs=1e-15)
    # heights are Fibonacci numbers
    assert sorted(orb.q) == [10946, 17711]


def test_scale_factor_is_golden_power(golden):
    orb = LengthOrbit(golden, "extended", 80).run(10)
    assert orb.log_a_n == pytest.approx(10 * math.log(GOLD), rel=1e-12)


def test_rational_iet_hits_connection():
    T = Iet(rotation_pair(2), [0.25, 0.75])
    with pytest.raises(ConnectionDetected):
        LengthOrbit(T).run(10)


def test_engines_agree_on_moebius_map(golden):
    T = moebius_conjugate(golden, 0.5)
    a = RenormState(T).run(12)
    b = LengthOrbit(T).run(12)
    assert a.zorich_matrices == b.zorich_matrices
    assert a.lambda_n == pytest.approx(b.lambda_n, rel=1e-8)
    assert a.omega_n() == pytest.approx(b.omega_n(), abs=1e-8)


def test_double_and_extended_agree(d4):
    a = LengthOrbit(d4).run(30)
    b = LengthOrbit(d4, "extended", 120).run(30)
    assert a.zorich_matrices == b.zorich_matrices
    assert a.lambda_n == pytest.approx(b.lambda_n, abs=1e-9)


def test_periodic_fixture_follows_its_loop():
    loop = d4_loop()
    p = zorich_period(loop)
    orb = LengthOrbit(periodic_iet(loop, 160), "extended", 160).run(20 * p)
    assert orb.zorich_matrices == zorich_blocks(loop) * 20


def test_heights_follow_cocycle(rng):
    T = random_path_aiet(rng, 5, 20)
    orb = RenormState(T).run(20)
    q0 = (1,) * 5
    assert intmat.matvec(orb.cocycle(0, 20).entries, q0) == tuple(orb.q)
    assert tuple(orb.q) == intmat.matvec(orb.rauzy_product(0, orb.n), q0)


def test_word_lengths_equal_heights(d4):
    orb = RenormState(d4).run(15)
    assert [len(orb.word(j)) for j in range(4)] == orb.q


def test_word_store_matches_naive_concatenation():
    store = WordStore(3)
    naive = {0: [0], 1: [1], 2: [2]}
    rng = np.random.default_rng(1)
    for _ in range(40):
        a, b = (int(v) for v in rng.integers(0, store.count, 2))
        node = store.concat(a, b)
        naive[node] = naive[a] + naive[b]
    for node in (store.count - 1, store.count // 2, 1):
        assert store.array(node).tolist() == naive[node]


def test_induced_map_matches_brute_force(rng):
    T = moebius_conjugate(random_path_aiet(rng, 4, 20, scale=0.3), 0.4)
    st_ = RenormState(T)
    for _ in range(12):
        st_.step_zorich()
        assert induced_map_error(st_, 40, rng) <= 1e-9


def test_brute_force_agrees_with_plain_iteration(golden):
    T = moebius_conjugate(golden, 0.3)
    x = np.array([0.1234, 0.4321, 0.77])
    out, times = brute_force_first_return(T, 0.2, x)
    for xi, yi, ti in zip(x, out, times):
        y = xi
        for _ in range(ti):
            y = float(T(np.array([y]))[0])
        assert y == pytest.approx(yi, abs=1e-12)
        assert y < 0.2


def test_partition_covers_interval(d4):
    orb = LengthOrbit(d4, track_words=True).run(8)
    part = partition(orb)
    assert part.lengths.sum() == pytest.approx(1.0, abs=1e-12)
    assert part.max_overlap() < 1e-12
    assert part.tower_measures() == pytest.approx(np.array(orb.q) * orb.lambda_n * orb.a_n)


def test_partition_budget(d4):
    orb = LengthOrbit(d4, track_words=True).run(20)
    with pytest.raises(FloorBudgetExceeded):
        partition(orb, budget=100)


def test_partition_needs_words(d4):
    with pytest.raises(ConfigError):
        partition(LengthOrbit(d4).run(3))


def test_good_returns_on_periodic_orbit(d4):
    loop = d4_loop()
    p = zorich_period(loop)
    mats = zorich_blocks(loop) * 10
    good = accelerate_on_good_returns(mats)
    assert intmat.is_positive(good.A)
    assert all(b - a >= 2 * good.window for a, b in zip(good.times, good.times[1:]))
    # one pass of the loop is not positive but two passes are
    A = intmat.product(mats[:p], 4)
    assert not intmat.is_positive(A)
    A2 = intmat.product(mats[: 2 * p], 4)
    explicit = accelerate_on_good_returns(mats, A=A2, p=2 * p)
    assert explicit.times == [0, 4 * p]


def test_orbit_csv_columns(golden):
    rows = list(orbit_rows(LengthOrbit(golden), 5))
    text = orbit_csv(rows, 2)
    header = text.splitlines()[0].split(",")
    assert header[:5] == ["n", "move", "winner", "run", "norm_Z"]
    assert len(text.splitlines()) == 6


def test_orbit_for_picks_engine(golden):
    assert isinstance(orbit_for(golden), LengthOrbit)


def test_run_length():
    assert run_length(np.array([0, 0, 1, 2, 2, 2])) == [[1, 2], [2, 1], [3, 3]]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 4, 5]))
def test_zorich_matrices_multiply_heights(seed, d):
    rng = np.random.default_rng(seed)
    T = random_path_aiet(rng, d, 10, scale=0.0)
    orb = LengthOrbit(T).run(10)
    q = (1,) * d
    for z in orb.zorich_matrices:
        q = intmat.matvec(z, q)
        assert intmat.det(z) == 1
    assert q == tuple(orb.q)
