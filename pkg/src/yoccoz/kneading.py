"""Real quadratic kneading theory, used to pin down the Fibonacci parameter.

For z**2 + c with real c the itinerary of the critical value is the sequence of
signs of f^n(0), n >= 1.  Itineraries are compared in the twisted
lexicographic order (orientation flips after each negative symbol), which is
monotone in c.  The Fibonacci combinatorics is the kneading sequence with
kneading map Q(k) = max(k - 2, 0), cutting times 1, 2, 3, 5, 8, ...
"""
from __future__ import annotations

import gmpy2
import mpmath

from .errors import ConvergenceError


def cutting_times(kneading_map, count):
    s = [1]
    for k in range(1, count):
        s.append(s[-1] + s[kneading_map(k)])
    return s


def fibonacci_map(k):
    return max(k - 2, 0)


def kneading_sequence(kneading_map, length):
    """Signs (+1/-1) of f^n(0), n = 1..length, for the kneading map given."""
    # symbols e_1 e_2 ... in {0, 1}; e_1 = 1.  Each block between consecutive
    # cutting times copies e_1..e_{S_Q(k)} with its last symbol flipped
    e = [None, 1]
    k = 1
    s = [1]
    while len(e) - 1 < length:
        s.append(s[-1] + s[kneading_map(k)])
        block = e[1:s[kneading_map(k)] + 1]
        block[-1] = 1 - block[-1]
        e.extend(block)
        k += 1
    # symbol 1 sits on the side of the critical value, which for x**2 + c
    # with c < 0 is the negative side
    return [-1 if x == 1 else 1 for x in e[1:length + 1]]


def itinerary_signs(ctx, c, length):
    z = ctx.mpf(0)
    out = []
    for _ in range(length):
        z = z * z + c
        out.append(1 if z > 0 else (-1 if z < 0 else 0))
    return out


def twisted_compare(a, b):
    """Sign of a - b in the twisted order; 0 when the prefixes agree."""
    orient = 1
    for x, y in zip(a, b):
        if x != y:
            return orient * (x - y)
        if x < 0:
            orient = -orient
    return 0


def agreement_length(a, b):
    for n, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return n
    return min(len(a), len(b))


def _twisted_sign(c, target):
    """Sign of itinerary(c) - target in the twisted order, iterating only up
    to the first disagreement."""
    z = c * 0
    orient = 1
    for t in target:
        z = z * z + c
        s = 1 if z > 0 else (-1 if z < 0 else 0)
        if s != t:
            return orient * (s - t)
        if s < 0:
            orient = -orient
    return 0


def kneading_parameter(kneading_map, bits=200, lo="-2", hi="-1.75"):
    """Bisect c in [lo, hi] toward the parameter whose critical itinerary is
    the given kneading sequence.  The itinerary is compared over 8*bits + 64
    iterates; once 2**-bits is below the width of that cylinder (about 100
    bits for the Fibonacci map) the result follows the whole prefix.  c is
    pinned only as tightly as the prefix allows, which for Fibonacci-like
    maps is far coarser than 2**-bits.
    Returns the decimal string of c."""
    length = 8 * bits + 64
    target = kneading_sequence(kneading_map, length)
    with gmpy2.context(gmpy2.get_context(), precision=bits + 64):
        a, b = gmpy2.mpfr(lo), gmpy2.mpfr(hi)
        sa = _twisted_sign(a, target)
        sb = _twisted_sign(b, target)
        if sa == 0 or sb == 0 or sa == sb:
            raise ConvergenceError("kneading bisection needs a sign change on the bracket")
        for _ in range(bits):
            m = (a + b) / 2
            sm = _twisted_sign(m, target)
            if sm == 0:
                a = b = m
                break
            if sm == sa:
                a = m
            else:
                b = m
        c = (a + b) / 2
        digits = int(bits * 0.30103) + 5
        return mpmath.nstr(mpmath.mpf(c), digits, strip_zeros=False) if digits <= 15 \
            else _decimal(c, digits)


def _decimal(x, digits):
    # gmpy2 formats mpfr exactly to the requested number of significant digits
    return "{0:.{1}e}".format(x, digits - 1) if abs(x) < 1 else "{0:.{1}f}".format(x, digits - 1)


def fibonacci_parameter(bits=200):
    return kneading_parameter(fibonacci_map, bits)
