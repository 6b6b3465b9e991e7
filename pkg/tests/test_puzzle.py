import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.exceptions import NotFittedError

from yoccoz.errors import HorizonExhausted, InvalidArgument, UnsupportedConfiguration
from yoccoz.kneading import cutting_times, fibonacci_map
from yoccoz.partition import OUTSIDE, build_base_partition
from yoccoz.poly import Polynomial
from yoccoz.puzzle import (YoccozPuzzle, children, first_entry, is_critical, itinerary,
                           piece_member, piece_of, realize_piece, return_time, same_piece,
                           smallest_successor)

RABBIT = -0.12256116687665362 + 0.7448617666197442j


# --- depth-0 partition ----------------------------------------------------------------

def test_partition_labels(airplane_puzzle):
    base = airplane_puzzle.base_
    assert [str(a) for a in base.ray_angles] == ["1/3", "2/3"]
    labels = airplane_puzzle.predict(np.array([0.0, 1.0, -1.5, 10.0]))
    assert labels[0] == labels[1] != labels[2]
    assert labels[3] == OUTSIDE


def test_partition_json(airplane_puzzle):
    data = airplane_puzzle.base_.to_json()
    assert data["h0"] > 0 and len(data["sectors"]) == 2
    assert data["separating"][0]["angles"] == ["1/3", "2/3"]


def test_no_separating_point_is_unsupported():
    # attracting fixed point: outside the supported class
    with pytest.raises(UnsupportedConfiguration):
        build_base_partition(Polynomial.quadratic(0.1), resolution=128)


# --- estimator ------------------------------------------------------------------------

def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        YoccozPuzzle().predict(np.array([0.0]))


def test_fit_rejects_non_polynomial():
    with pytest.raises(InvalidArgument):
        YoccozPuzzle().fit("z^2 - 1")


def test_params_round_trip():
    est = YoccozPuzzle(horizon=123, n_pc=45)
    assert est.get_params()["horizon"] == 123
    assert est.set_params(n_pc=7).n_pc == 7


def test_transform_prefixes(airplane_puzzle):
    (a,), (b,) = airplane_puzzle.transform(np.array([0.0]), 2), airplane_puzzle.transform(np.array([0.0]), 5)
    assert b[:3] == a


# --- critical pieces ------------------------------------------------------------------

@given(st.integers(0, 30))
def test_critical_pieces_nest(m):
    pz = _fib_small()
    e = pz.engine_
    outer, inner = e.critical_piece(0, m), e.critical_piece(0, m + 1)
    assert inner.itinerary[:m + 1] == outer.itinerary
    a, b = e.interval(outer)
    c, d = e.interval(inner)
    assert a <= c < d <= b


_CACHE = {}


def _fib_small():
    if "fib" not in _CACHE:
        from yoccoz.kneading import fibonacci_parameter

        _CACHE["fib"] = YoccozPuzzle(n_pc=2000, horizon=2000).fit(
            Polynomial.quadratic(fibonacci_parameter(400)))
    return _CACHE["fib"]


def test_fibonacci_return_times_are_cutting_times(fib_puzzle):
    cuts = set(cutting_times(fibonacci_map, 30))
    e = fib_puzzle.engine_
    times = [return_time(fib_puzzle, e.critical_piece(0, m)) for m in range(40)]
    assert set(times) <= cuts
    assert times == sorted(times)


def test_realized_piece_contains_anchor(fib_puzzle):
    e = fib_puzzle.engine_
    piece = e.critical_piece(0, 5)
    mask = realize_piece(e, piece, 128)
    assert mask.contains_point(piece.anchor)
    assert not mask.touches_edge()


def test_realized_pieces_nest_on_common_grid(fib_puzzle):
    e = fib_puzzle.engine_
    p3 = realize_piece(e, e.critical_piece(0, 3), 128)
    p6 = realize_piece(e, e.critical_piece(0, 6), 128, grid=p3.grid)
    assert p6.subset_of(p3)


def test_perturbed_and_direct_membership_agree(fib_puzzle):
    e = fib_puzzle.engine_
    piece = e.critical_piece(0, 16)
    a, b = e.interval(piece)
    w = np.linspace(a - 0.2 * (b - a), b + 0.2 * (b - a), 41) + 0j
    near, _ = piece_member(e, piece, w, centre=(0, 0))
    far, _ = piece_member(e, piece, w)
    assert np.array_equal(near, far)
    assert near[20] and not near[0] and not near[-1]


def test_itinerary_matches_piece(fib_puzzle):
    q = piece_of(fib_puzzle, 0.0, 4)
    assert tuple(q.itinerary) == itinerary(fib_puzzle, 0.0, 4)
    assert same_piece(fib_puzzle, q, fib_puzzle.engine_.critical_piece(0, 4))
    assert is_critical(fib_puzzle, q) == [0]


def test_first_entry_lands_inside(fib_puzzle):
    e = fib_puzzle.engine_
    piece = e.critical_piece(0, 6)
    k, L = first_entry(fib_puzzle, 0, 1, piece)
    assert k >= 1 and L.depth == piece.depth + k
    assert e.contains_orbit_point(piece, 0, 1 + k)


def test_children_map_onto_parent(fib_puzzle):
    e = fib_puzzle.engine_
    parent = e.critical_piece(0, 3)
    kids, _ = children(fib_puzzle, parent, 0, horizon=2000)
    assert kids
    for n, q in kids:
        assert q.depth == parent.depth + n
        assert e.contains_orbit_point(parent, 0, n)


def test_successor_is_deeper(fib_puzzle):
    e = fib_puzzle.engine_
    assert smallest_successor(fib_puzzle, e.critical_piece(0, 3), horizon=2000).depth > 3


def test_horizon_exhaustion_is_reported(fib_puzzle):
    e = fib_puzzle.engine_
    with pytest.raises(HorizonExhausted):
        first_entry(fib_puzzle, 0, 1, e.critical_piece(0, 19990))


def test_complex_engine_on_rabbit():
    pz = YoccozPuzzle(horizon=500, n_pc=300).fit(Polynomial.quadratic(RABBIT))
    assert type(pz.engine_).__name__ == "ComplexEngine"
    e = pz.engine_
    mask = realize_piece(e, e.critical_piece(0, 2), 128)
    assert mask.contains_point(0j)
    assert return_time(pz, e.critical_piece(0, 2)) == 3
