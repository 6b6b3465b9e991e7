from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from yoccoz.angles import RationalAngle, angle_orbit, d_tuple, in_arc, periodic_angles
from yoccoz.errors import InvalidArgument

fractions = st.builds(Fraction, st.integers(0, 10 ** 6), st.integers(1, 10 ** 6))


def test_parse_and_reduce():
    a = RationalAngle("4/6")
    assert str(a) == "2/3" and a == Fraction(2, 3)
    assert RationalAngle(5, 3) == Fraction(2, 3)


def test_float_rejected():
    with pytest.raises(InvalidArgument):
        RationalAngle(0.25)


def test_doubling():
    assert d_tuple("1/3", 2) == RationalAngle("2/3")
    assert d_tuple("1/2", 2) == RationalAngle(0)


@given(fractions, st.integers(2, 5))
def test_orbit_is_eventually_periodic(f, d):
    pre, per, cycle = angle_orbit(f, d)
    x = RationalAngle(f)
    for _ in range(pre):
        x = d_tuple(x, d)
    assert x == cycle[0]
    for _ in range(per):
        x = d_tuple(x, d)
    assert x == cycle[0]
    assert len(set(cycle)) == per


@given(fractions, st.integers(2, 4))
def test_preimages_map_back(f, d):
    a = RationalAngle(f)
    pre = a.preimages(d)
    assert len(pre) == d and all(d_tuple(p, d) == a for p in pre)


@pytest.mark.parametrize("period,count", [(1, 1), (2, 1), (3, 2), (4, 3), (5, 6)])
def test_periodic_cycle_counts(period, count):
    # necklace count of exact period n under doubling
    cycles = periodic_angles(2, period)
    assert len(cycles) == count
    assert all(len(c) == period for c in cycles)


def test_arc_wraps():
    assert in_arc("1/10", "9/10", "1/5")
    assert not in_arc("1/2", "9/10", "1/5")
    assert in_arc("9/10", "9/10", "1/5")
    assert not in_arc("1/5", "9/10", "1/5")
