import dataclasses

import pytest

from yoccoz.boxmap import (NON_RENORMALIZABLE, PERSISTENT, RENORMALIZABLE, audit_box_mapping,
                           combinatorially_equivalent, extract_box_mapping, f_itinerary,
                           find_w_piece, is_renormalizable, persistently_recurrent)
from yoccoz.errors import CheckFailed, InvalidArgument


@pytest.fixture(scope="module")
def fib_box(fib_puzzle):
    return extract_box_mapping(fib_puzzle)


def test_airplane_is_renormalizable(airplane_puzzle):
    (v,) = is_renormalizable(airplane_puzzle)
    assert v.verdict == RENORMALIZABLE and v.period == 3


def test_fibonacci_is_not_renormalizable(fib_puzzle):
    (v,) = is_renormalizable(fib_puzzle)
    assert v.verdict == NON_RENORMALIZABLE
    assert v.witness is not None


def test_w_piece_is_central_and_separated(fib_puzzle):
    w = find_w_piece(fib_puzzle)
    assert w.piece.ref == (0, 0)
    assert w.gap_cells >= 2


def test_fibonacci_box_mapping_audit(fib_box):
    audit = audit_box_mapping(fib_box)
    assert audit["V_disjoint"] and audit["U_compactly_contained"] and audit["F_maps_onto_V"]
    assert audit["critical_per_component"] == [1]
    assert fib_box.to_json()["b"] == 1


def test_audit_names_broken_clause(fib_box):
    doubled = dataclasses.replace(fib_box, V=list(fib_box.V) * 2)
    with pytest.raises(CheckFailed) as exc:
        audit_box_mapping(doubled)
    assert exc.value.clause == "V-disjoint"


def test_fibonacci_persistently_recurrent(fib_box):
    v = persistently_recurrent(fib_box, 0, horizon=2000)
    assert v.verdict == PERSISTENT
    assert list(v.depths) == sorted(v.depths)


def test_itinerary_words(fib_box):
    word = f_itinerary(fib_box, 0, 6)
    assert len(word) == 6


def test_box_mapping_equivalent_to_itself(fib_box):
    assert combinatorially_equivalent(fib_box, fib_box, depth=4).equivalent


def test_verdict_needs_fitted_input():
    with pytest.raises(InvalidArgument):
        is_renormalizable(object())
