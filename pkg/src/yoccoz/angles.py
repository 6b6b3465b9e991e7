"""Exact rational external angles (mod 1) and their dynamics under d-tupling."""
from __future__ import annotations

import math
from fractions import Fraction
from functools import total_ordering

from .errors import InvalidArgument

# refuse angles whose denominators exceed this many bits
MAX_DENOMINATOR_BITS = 1 << 16


@total_ordering
class RationalAngle:
    __slots__ = ("_value",)

    def __init__(self, value, denominator=None):
        if isinstance(value, RationalAngle):
            frac = value._value
        elif denominator is not None:
            frac = Fraction(int(value), int(denominator))
        elif isinstance(value, str):
            frac = Fraction(value.strip())
        elif isinstance(value, float):
            raise InvalidArgument("angles must be exact; pass a Fraction or 'p/q'")
        else:
            frac = Fraction(value)
        frac = frac % 1
        if frac.denominator.bit_length() > MAX_DENOMINATOR_BITS:
            raise InvalidArgument("angle denominator exceeds the configured depth cap")
        self._value = frac

    @property
    def numerator(self):
        return self._value.numerator

    @property
    def denominator(self):
        return self._value.denominator

    @property
    def fraction(self):
        return self._value

    def __float__(self):
        return float(self._value)

    def __eq__(self, other):
        if isinstance(other, RationalAngle):
            return self._value == other._value
        if isinstance(other, (int, Fraction)):
            return self._value == other
        return NotImplemented

    def __lt__(self, other):
        return self._value < RationalAngle(other)._value

    def __hash__(self):
        return hash(("angle", self._value))

    def __str__(self):
        return f"{self.numerator}/{self.denominator}"

    def __repr__(self):
        return f"RationalAngle({self})"

    def tuple(self, d):
        return d_tuple(self, d)

    def preimages(self, d):
        """The d angles mapped onto this one by d-tupling, in increasing order."""
        return [RationalAngle((self._value + k) / d) for k in range(d)]


def d_tuple(theta, d):
    if d < 2:
        raise InvalidArgument("degree must be at least 2")
    theta = RationalAngle(theta)
    return RationalAngle(theta.fraction * d)


def angle_orbit(theta, d):
    """Return (preperiod, period, cycle) of theta under t -> d t mod 1."""
    if d < 2:
        raise InvalidArgument("degree must be at least 2")
    theta = RationalAngle(theta)
    q = theta.denominator
    # multiplying by d divides the denominator by gcd(q, d); the angle is
    # periodic once the denominator is coprime to d
    pre = 0
    g = math.gcd(q, d)
    while g > 1:
        q //= g
        pre += 1
        g = math.gcd(q, d)
    start = RationalAngle(theta.fraction * d ** pre)
    if start.denominator == 1:
        return pre, 1, [start]
    period = 1
    m = d % start.denominator
    while m != 1:
        m = (m * d) % start.denominator
        period += 1
    cycle = [RationalAngle(start.fraction * d ** k) for k in range(period)]
    return pre, period, cycle


def periodic_angles(d, period):
    """All angles of exact period ``period`` grouped into cycles."""
    den = d ** period - 1
    seen = set()
    cycles = []
    for k in range(den):
        a = RationalAngle(k, den)
        if a in seen:
            continue
        _, per, cyc = angle_orbit(a, d)
        seen.update(cyc)
        if per == period:
            cycles.append(cyc)
    return cycles


def in_arc(theta, lo, hi):
    """Membership in the half-open counterclockwise arc [lo, hi)."""
    t, a, b = (RationalAngle(x).fraction for x in (theta, lo, hi))
    if a <= b:
        return a <= t < b
    return t >= a or t < b
