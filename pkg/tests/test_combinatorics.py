from collections import deque

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gietrenorm.combinatorics import (
    Move,
    PermutationPair,
    RotationPath,
    elementary_matrix,
    is_infinity_complete,
    is_irreducible,
    rauzy_class,
    rauzy_move,
    rotation_pair,
    singularity_data,
    symmetric_pair,
)
from gietrenorm.errors import ConfigError
from gietrenorm import intmat


def _oracle_move(top, bottom, move):
    # written from the definition, independently of the package
    top, bottom = list(top), list(bottom)
    if move == "t":
        w, l = top[-1], bottom[-1]
        bottom.pop()
        bottom.insert(bottom.index(w) + 1, l)
    else:
        w, l = bottom[-1], top[-1]
        top.pop()
        top.insert(top.index(w) + 1, l)
    return tuple(top), tuple(bottom)


def _oracle_class_size(top, bottom):
    seen = {(top, bottom)}
    queue = deque(seen)
    while queue:
        t, b = queue.popleft()
        for mv in "tb":
            nxt = _oracle_move(t, b, mv)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return len(seen)


@pytest.mark.parametrize("d,size", [(2, 1), (3, 3), (4, 7), (5, 15)])
def test_symmetric_class_sizes(d, size):
    pi = symmetric_pair(d)
    assert len(rauzy_class(pi).members) == size
    assert _oracle_class_size(pi.top, pi.bottom) == size


@pytest.mark.parametrize("pi", [rotation_pair(3), PermutationPair((1, 2, 3, 4), (4, 2, 3, 1)),
                                PermutationPair((1, 2, 3, 4, 5), (5, 3, 2, 4, 1))])
def test_class_matches_oracle(pi):
    assert len(rauzy_class(pi).members) == _oracle_class_size(pi.top, pi.bottom)


def test_moves_match_oracle():
    pi = symmetric_pair(5)
    for mv, key in ((Move.TOP, "t"), (Move.BOTTOM, "b")):
        arrow = rauzy_move(pi, mv)
        assert (arrow.target.top, arrow.target.bottom) == _oracle_move(pi.top, pi.bottom, key)


def test_winner_and_loser():
    pi = symmetric_pair(4)
    a = rauzy_move(pi, Move.TOP)
    assert (a.winner, a.loser) == (4, 1)
    b = rauzy_move(pi, Move.BOTTOM)
    assert (b.winner, b.loser) == (1, 4)


def test_elementary_matrix_adds_winner_column():
    a = rauzy_move(symmetric_pair(4), Move.TOP)
    m = elementary_matrix(a)
    assert m[a.loser - 1][a.winner - 1] == 1
    assert intmat.det(m) == 1
    assert sum(map(sum, m)) == 5


@pytest.mark.parametrize("d,genus,kappa", [(2, 1, 1), (3, 1, 2), (4, 2, 1), (5, 2, 2), (6, 3, 1)])
def test_singularity_data_symmetric(d, genus, kappa):
    sd = singularity_data(symmetric_pair(d))
    assert (sd.genus, sd.kappa) == (genus, kappa)
    assert 2 * sd.genus + sd.kappa - 1 == d


def test_reducible_rejected():
    pi = PermutationPair((1, 2, 3), (1, 3, 2))
    assert not is_irreducible(pi)
    with pytest.raises(ConfigError):
        rauzy_class(pi)


def test_bad_pairs_rejected():
    with pytest.raises(ConfigError):
        PermutationPair((1, 2), (1, 3))
    with pytest.raises(ConfigError):
        PermutationPair((1,), (1,))
    with pytest.raises(ConfigError):
        PermutationPair.from_dict({"top": [1, 2]})
    with pytest.raises(ConfigError):
        Move.parse("sideways")


def test_json_roundtrip():
    pi = symmetric_pair(5)
    assert PermutationPair.from_json(pi.to_json()) == pi


def test_rotation_path_closed_loop():
    path = RotationPath.from_moves(rotation_pair(2), "tb")
    assert path.is_closed()
    assert path.winners == [2, 1]
    vec, complete = is_infinity_complete(path, 2)
    assert vec == (1, 1) and complete


def test_dot_output():
    rc = rauzy_class(symmetric_pair(4))
    dot = rc.to_dot()
    assert dot.startswith("digraph")
    assert dot.count("->") == 2 * len(rc.members)


pairs = st.integers(2, 6).flatmap(
    lambda d: st.tuples(st.permutations(range(1, d + 1)), st.permutations(range(1, d + 1))))


@settings(max_examples=60, deadline=None)
@given(pairs, st.lists(st.sampled_from("tb"), min_size=1, max_size=12))
def test_moves_preserve_irreducibility_and_invariants(rows, moves):
    pi = PermutationPair(tuple(rows[0]), tuple(rows[1]))
    if not is_irreducible(pi):
        return
    sd0 = singularity_data(pi)
    for mv in moves:
        arrow = rauzy_move(pi, mv)
        pi = arrow.target
        assert is_irreducible(pi)
        assert intmat.det(elementary_matrix(arrow)) == 1
    sd = singularity_data(pi)
    assert (sd.genus, sd.kappa) == (sd0.genus, sd0.kappa)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5))
def test_every_class_member_reachable_both_ways(d):
    rc = rauzy_class(symmetric_pair(d))
    targets = {a.target for a in rc.arrows}
    assert targets == set(rc.members)
