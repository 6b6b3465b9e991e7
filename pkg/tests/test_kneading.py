import mpmath
import pytest

from yoccoz.errors import ConvergenceError
from yoccoz.kneading import (agreement_length, cutting_times, fibonacci_map, fibonacci_parameter,
                             itinerary_signs, kneading_parameter, kneading_sequence,
                             twisted_compare)


def test_fibonacci_cutting_times():
    assert cutting_times(fibonacci_map, 10) == [1, 2, 3, 5, 8, 13, 21, 34, 55, 89]


@pytest.mark.parametrize("bits", [100, 200])
def test_parameter_follows_kneading(bits):
    n = 8 * bits + 64
    c = fibonacci_parameter(bits)
    with mpmath.workprec(bits + 64):
        signs = itinerary_signs(mpmath.mp, mpmath.mpf(c), n)
    assert agreement_length(signs, kneading_sequence(fibonacci_map, n)) == n


def test_more_bits_move_closer():
    ref = fibonacci_parameter(400)
    with mpmath.workdps(200):
        d = [abs(mpmath.mpf(fibonacci_parameter(b)) - mpmath.mpf(ref)) for b in (50, 100, 200)]
    assert d[0] > d[1] > d[2] > 0
    assert -1.9 < float(ref) < -1.85


def test_twisted_order():
    assert twisted_compare([1, 1], [1, -1]) == 2
    # a shared negative symbol flips the orientation
    assert twisted_compare([-1, 1], [-1, -1]) == -2
    assert twisted_compare([1, -1], [1, -1]) == 0


def test_bracket_without_sign_change():
    with pytest.raises(ConvergenceError):
        kneading_parameter(fibonacci_map, 50, lo="-1.9", hi="-1.89")
