"""Puzzle pieces, their membership tests, and the induced combinatorics
(first entry domains, children, successors).

Two membership engines share one interface:

* ``RealEngine``: real polynomials with real critical points.  Pieces that
  meet the real line do so in an interval, and y lies in the depth-n piece of
  x iff every image f^i([x, y]), i <= n, stays inside the depth-0 interval of
  the common label.  Images of intervals are computed exactly (endpoints and
  interior critical points) in multiprecision, so the test is a certificate.
* ``ComplexEngine``: anything else.  Equal itineraries plus one raster
  component, with points near the raster boundary reported as ambiguous.

Critical orbits are computed once, up to a trust horizon derived from a
running forward error bound; every scan reports the horizon it used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
import mpmath
import numpy as np
from scipy.optimize import brentq
from sklearn.base import BaseEstimator

from .errors import (BoundaryAmbiguity, HorizonExhausted, InconsistentAnchor,
                     InvalidArgument, OutsidePartition, UnsupportedConfiguration)
from .partition import AMBIGUOUS, OUTSIDE, build_base_partition
from .poly import Polynomial, evaluate, green_array
from .raster import Grid, GridMask, component_at
from .validation import check_fitted, check_positive_int

N_PC = 2000
HORIZON = 100_000
MIN_RESOLUTION = 64


@dataclass(frozen=True, eq=False)
class PuzzlePiece:
    depth: int
    anchor: complex
    itinerary: tuple
    ref: tuple | None = None          # (critical index, orbit index) of the anchor
    exact: object = field(default=None, repr=False)
    raster: GridMask | None = field(default=None, repr=False)
    id: tuple | None = None

    @property
    def key(self):
        return (self.depth, self.ref) if self.ref is not None else (self.depth, self.anchor)

    def with_raster(self, raster, component):
        return PuzzlePiece(self.depth, self.anchor, self.itinerary, self.ref, self.exact,
                           raster, (self.depth, component))

    def to_json(self, resolution=None):
        return {"depth": self.depth,
                "anchor": [self.anchor.real, self.anchor.imag],
                "itinerary": list(self.itinerary),
                "area_cells": None if self.raster is None else self.raster.area_cells,
                "resolution": resolution if self.raster is None else self.raster.resolution}


# --- engines ---------------------------------------------------------------

class _Engine:
    """Shared orbit bookkeeping.  Subclasses provide point iteration, labels
    and the membership certificate."""

    def __init__(self, poly, base, n_pc, horizon):
        self.poly = poly
        self.base = base
        self.n_pc = n_pc
        self.horizon_cap = horizon
        self.crit = [z for z, _ in poly.critical_points]
        self._raster_cache = {}
        self._lcp = {}
        self.orbits = []
        self.labels = []
        self.trust = []
        for c in self.crit:
            orb, trust = self._orbit(c, horizon)
            self.orbits.append(orb)
            self.trust.append(trust)
            self.labels.append(self._labels_of(orb))
        # label strings make window comparisons cheap
        self._lstr = [bytes(int(x) + 2 for x in lab) for lab in self.labels]

    # horizon ------------------------------------------------------------

    def horizon(self, ci):
        """Last orbit index of critical point ci whose label is trusted."""
        lab = self.labels[ci]
        bad = np.flatnonzero(lab < 0)
        h = self.trust[ci]
        if bad.size:
            h = min(h, int(bad[0]) - 1)
        return h

    def pc_indices(self, ci):
        return range(1, min(self.n_pc, self.horizon(ci)) + 1)

    def pc_points(self):
        pts = []
        for ci in range(len(self.crit)):
            pts.extend(complex(self.value(ci, j)) for j in self.pc_indices(ci))
        return np.array(pts)

    # pieces -------------------------------------------------------------

    def orbit_piece(self, ci, j, depth):
        h = self.horizon(ci)
        if j + depth > h:
            raise HorizonExhausted(f"orbit index {j}+{depth} beyond trust horizon {h}", horizon=h)
        word = tuple(int(x) for x in self.labels[ci][j:j + depth + 1])
        return PuzzlePiece(depth, complex(self.value(ci, j)), word, (ci, j),
                           self.orbits[ci][j])

    def critical_piece(self, ci, depth):
        return self.orbit_piece(ci, 0, depth)

    def lcp(self, ci, cj):
        """lcp[j] = length of the common prefix of the label sequences of
        f^j(c_ci) and c_cj (Z-algorithm on the concatenation)."""
        key = (ci, cj)
        if key not in self._lcp:
            a = self.labels[cj]
            b = self.labels[ci]
            s = np.concatenate([a, [-99], b])
            self._lcp[key] = _z_function(s)[len(a) + 1:]
        return self._lcp[key]

    def word_window_equal(self, ci, j, word):
        s = self._lstr[ci]
        w = bytes(x + 2 for x in word)
        return s[j:j + len(w)] == w

    def orbit_hits(self, piece, ci, start, stop):
        """Orbit indices j in [start, stop) with f^j(c_ci) in ``piece``."""
        h = self.horizon(ci)
        if stop + piece.depth - 1 > h:
            raise HorizonExhausted(f"scan to {stop} at depth {piece.depth} exceeds horizon {h}",
                                   horizon=h)
        s = self._lstr[ci]
        w = bytes(x + 2 for x in piece.itinerary)
        out = []
        j = s.find(w, start)
        while j != -1 and j < stop:
            if self.contains_orbit_point(piece, ci, j):
                out.append(j)
            j = s.find(w, j + 1)
        return out

    def contains_orbit_point(self, piece, ci, j):
        if piece.ref == (ci, j):
            return True
        if not self.word_window_equal(ci, j, piece.itinerary):
            return False
        return self._certify(piece, self.orbits[ci][j], (ci, j))

    def contains(self, piece, z):
        """Membership of an arbitrary point (raises on ambiguity)."""
        word = self.itinerary(z, piece.depth)
        if tuple(word) != tuple(piece.itinerary):
            return False
        return self._certify(piece, self.exact_point(z), None)


class RealEngine(_Engine):
    kind = "real"

    def __init__(self, poly, base, n_pc=N_PC, horizon=HORIZON, dps=None):
        if not supports_real_engine(poly):
            raise UnsupportedConfiguration("real engine needs a real polynomial with real critical points")
        self.ctx = mpmath.MPContext()
        if dps is None:
            dps = 60 if poly.exact is None else max(60, max(len(a) for a in poly.exact) + 20)
        self.ctx.dps = dps
        ctx = self.ctx
        if poly.exact is not None:
            self.coeffs = [ctx.mpf(a) for a in poly.exact]
        else:
            self.coeffs = [ctx.mpf(a.real) for a in poly.coefficients]
        self.dcoeffs = [a * (len(self.coeffs) - 1 - k) for k, a in enumerate(self.coeffs[:-1])]
        self.unicritical = all(a == 0 for a in self.coeffs[1:-1])
        self.base = base
        self.poly = poly
        self.crit_exact = [self._polish_root(self.dcoeffs, ctx.mpf(z.real), m - 1)
                           for z, m in poly.critical_points]
        self._build_intervals()
        super().__init__(poly, base, n_pc, horizon)

    # exact helpers --------------------------------------------------------

    def f(self, x):
        acc = self.ctx.mpf(1)
        for a in self.coeffs[1:]:
            acc = acc * x + a
        return acc

    def df(self, x):
        acc = self.ctx.mpf(0)
        for a in self.dcoeffs:
            acc = acc * x + a
        return acc

    def _polish_root(self, coeffs, x, mult=1):
        # a root of multiplicity m is a simple root of the (m-1)-th derivative
        for _ in range(mult - 1):
            n = len(coeffs) - 1
            coeffs = [a * (n - k) for k, a in enumerate(coeffs[:-1])]
        for _ in range(200):
            v = self.ctx.mpf(0)
            dv = self.ctx.mpf(0)
            for a in coeffs:
                dv = dv * x + v
                v = v * x + a
            if dv == 0:
                break
            step = v / dv
            x -= step
            if abs(step) < self.ctx.mpf(10) ** (-self.ctx.dps + 5):
                break
        return x

    def _build_intervals(self):
        ctx = self.ctx
        poly, base = self.poly, self.base
        cuts = []
        for p, _ in base.separating:
            if abs(p.imag) < 1e-9:
                fx = [a - (1 if k == len(self.coeffs) - 2 else 0) for k, a in enumerate(self.coeffs)]
                cuts.append(self._polish_root(fx, ctx.mpf(p.real)))
        cuts.sort()
        if not cuts:
            raise UnsupportedConfiguration("no separating fixed point on the real line")
        h0 = base.h0
        far = 10 * poly.escape_radius

        def g(x):
            return float(green_array(poly, np.array([complex(x)]))[0][0]) - h0

        x_plus = brentq(g, float(cuts[-1]), far, xtol=1e-14)
        x_minus = brentq(g, -far, float(cuts[0]), xtol=1e-14)
        ends = [ctx.mpf(x_minus)] + cuts + [ctx.mpf(x_plus)]
        self.intervals = {}
        for a, b in zip(ends[:-1], ends[1:]):
            lab = None
            for t in (0.5, 0.3, 0.7, 0.1, 0.9):
                lab = int(base.label_array(np.array([complex(float(a + t * (b - a)))]))[0])
                if lab >= 0:
                    break
            if lab is None or lab < 0:
                raise BoundaryAmbiguity("could not label a real depth-0 interval")
            if lab in self.intervals:
                raise UnsupportedConfiguration("a depth-0 sector meets the real line twice")
            self.intervals[lab] = (a, b)
        self._sorted = sorted((a, b, lab) for lab, (a, b) in self.intervals.items())
        self._gv = None

    def real_label(self, x):
        for a, b, lab in self._sorted:
            if a < x < b:
                return lab
        if x <= self._sorted[0][0] or x >= self._sorted[-1][1]:
            return OUTSIDE
        return AMBIGUOUS

    def image(self, lo, hi):
        vals = [self.f(lo), self.f(hi)]
        for c in self.crit_exact:
            if lo < c < hi:
                vals.append(self.f(c))
        return min(vals), max(vals)

    def _orbit(self, c, horizon):
        ctx = self.ctx
        x = self.crit_exact[self.crit.index(c)]
        orb = [x]
        # forward error bound; trust ends when it reaches 1e-10
        err = 0.0
        unit = 10.0 ** (-ctx.dps + 2)
        trust = horizon
        for n in range(horizon):
            dfx = abs(float(self.df(x)))
            x = self.f(x)
            err = dfx * err + unit * max(1.0, abs(float(x)))
            orb.append(x)
            if err > 1e-10:
                trust = n
                break
            if abs(x) > 10 * self.poly.escape_radius:
                trust = n
                break
        return orb, trust

    def _labels_of(self, orb):
        return np.array([self.real_label(x) for x in orb], dtype=np.int64)

    def value(self, ci, j):
        return self.orbits[ci][j]

    def exact_point(self, z):
        if isinstance(z, (complex, np.complexfloating)):
            if abs(z.imag) > 0:
                raise InvalidArgument("real engine takes real points only")
            z = z.real
        return self.ctx.mpf(z)

    def itinerary(self, z, n):
        x = self.exact_point(z)
        out = []
        for k in range(n + 1):
            lab = self.real_label(x)
            if lab == OUTSIDE:
                raise OutsidePartition(f"iterate {k} of {z} leaves the partition")
            if lab == AMBIGUOUS:
                raise BoundaryAmbiguity(f"iterate {k} of {z} is a cut point", step=k, point=z)
            out.append(lab)
            x = self.f(x)
        return tuple(out)

    def _exact_values(self):
        # gmpy2 copies of the orbits: exact comparisons at C speed
        if self._gv is None:
            with gmpy2.context(gmpy2.get_context(), precision=self.ctx.prec + 16):
                self._gv = [[_to_mpfr(x) for x in orb] for orb in self.orbits]
                self._gint = {lab: (_to_mpfr(a), _to_mpfr(b)) for lab, (a, b) in self.intervals.items()}
        return self._gv

    def _certify_refs(self, piece, ref):
        # every endpoint of f^i([x, y]) is an orbit point of x, y or of a
        # critical point, so the whole certificate runs on orbit references
        gv = self._exact_values()
        gint = self._gint
        crit = [(k, gv[k][0]) for k in range(len(gv))]
        (pc, pj), (qc, qj) = piece.ref, ref
        if gv[qc][qj] < gv[pc][pj]:
            pc, pj, qc, qj = qc, qj, pc, pj
        depth = piece.depth
        for i, lab in enumerate(piece.itinerary):
            a, b = gint[lab]
            lo, hi = gv[pc][pj], gv[qc][qj]
            if not (a < lo and hi < b):
                return False
            if i == depth:
                break
            ends = [(pc, pj + 1), (qc, qj + 1)]
            for k, ck in crit:
                if lo < ck < hi:
                    ends.append((k, 1))
            pc, pj = qc, qj = ends[0]
            for rc, rj in ends[1:]:
                v = gv[rc][rj]
                if v < gv[pc][pj]:
                    pc, pj = rc, rj
                if gv[qc][qj] < v:
                    qc, qj = rc, rj
        return True

    def _certify(self, piece, y, ref):
        if piece.ref is not None and ref is not None:
            need = max(piece.ref[1], ref[1], 1) + piece.depth
            if all(len(o) > need for o in self.orbits):
                return self._certify_refs(piece, ref)
        x = piece.exact if piece.exact is not None else self.exact_point(piece.anchor)
        lo, hi = (x, y) if x <= y else (y, x)
        for i, lab in enumerate(piece.itinerary):
            a, b = self.intervals[lab]
            if not (a < lo and hi < b):
                return False
            if i < piece.depth:
                lo, hi = self.image(lo, hi)
        return True

    def interval(self, piece):
        """Endpoints of piece ∩ R, by pulling the final depth-0 interval back
        along the anchor orbit."""
        x = piece.exact if piece.exact is not None else self.exact_point(piece.anchor)
        xs = [x]
        for _ in range(piece.depth):
            xs.append(self.f(xs[-1]))
        a, b = self.intervals[piece.itinerary[-1]]
        for i in range(piece.depth - 1, -1, -1):
            a, b = self._pullback(a, b, xs[i])
            a0, b0 = self.intervals[piece.itinerary[i]]
            a, b = max(a, a0), min(b, b0)
        return a, b

    def _pullback(self, a, b, x):
        """Component of f^{-1}((a, b)) ∩ R containing x."""
        roots = self._real_roots(a) + self._real_roots(b)
        left = [r for r in roots if r < x]
        right = [r for r in roots if r > x]
        lo = max(left) if left else self.ctx.mpf("-inf")
        hi = min(right) if right else self.ctx.mpf("inf")
        return lo, hi

    def _real_roots(self, v):
        ctx = self.ctx
        d = len(self.coeffs) - 1
        if self.unicritical:
            w = v - self.coeffs[-1]
            if d % 2 == 0:
                if w < 0:
                    return []
                r = ctx.root(w, d)
                return [-r, r]
            return [ctx.sign(w) * ctx.root(abs(w), d)]
        cs = list(self.coeffs)
        cs[-1] -= v
        roots = ctx.polyroots(cs, maxsteps=200, extraprec=2 * ctx.prec)
        scale = ctx.mpf(10) ** (-ctx.dps // 2)
        return sorted(ctx.re(r) for r in roots if abs(ctx.im(r)) < scale)


class ComplexEngine(_Engine):
    kind = "complex"

    def __init__(self, poly, base, n_pc=N_PC, horizon=HORIZON, resolution=256):
        self.resolution = resolution
        super().__init__(poly, base, n_pc, horizon)

    def _orbit(self, c, horizon):
        z = complex(c)
        orb = [z]
        err = 0.0
        trust = horizon
        for n in range(horizon):
            dfz = abs(self.poly.derivative(z))
            z = evaluate(self.poly, z)
            err = dfz * err + 2.3e-16 * max(1.0, abs(z))
            orb.append(z)
            if err > 1e-6 * self.base.eps_tube or abs(z) > 10 * self.poly.escape_radius:
                trust = n
                break
        return np.array(orb), trust

    def _labels_of(self, orb):
        return self.base.label_array(orb).astype(np.int64)

    def value(self, ci, j):
        return complex(self.orbits[ci][j])

    def exact_point(self, z):
        return complex(z)

    def itinerary(self, z, n):
        z = complex(z)
        out = []
        for k in range(n + 1):
            lab = int(self.base.label_array(np.array([z]))[0])
            if lab == OUTSIDE:
                raise OutsidePartition(f"iterate {k} leaves the partition")
            if lab == AMBIGUOUS:
                raise BoundaryAmbiguity(f"iterate {k} is inside the boundary tube", step=k, point=z)
            out.append(lab)
            z = evaluate(self.poly, z)
        return tuple(out)

    def _certify(self, piece, y, ref):
        y = complex(y)
        key = piece.key
        if key not in self._raster_cache:
            self._raster_cache[key] = realize_piece(self, piece, self.resolution)
        mask = self._raster_cache[key]
        ij = mask.grid.index_of(y)
        if ij is None or not mask.mask[ij]:
            return False
        # two-cell margin from the raster boundary
        r, c = ij
        win = mask.mask[max(r - 2, 0):r + 3, max(c - 2, 0):c + 3]
        if win.shape != (5, 5) or not win.all():
            raise BoundaryAmbiguity("point within 2 cells of the piece boundary", point=y)
        return True


def probe_postcritical(poly, n_pc, dps=None):
    """Trusted prefix of the postcritical orbits as complex doubles; orbits are
    run in multiprecision for real polynomials, in double otherwise, and cut
    where the forward error bound reaches 1e-10."""
    pts = []
    real = poly.is_real
    ctx = mpmath.MPContext()
    ctx.dps = dps or (60 if poly.exact is None else max(60, max(len(a) for a in poly.exact) + 20))
    coeffs = ([ctx.mpf(a) for a in poly.exact] if poly.exact is not None
              else [ctx.mpc(a) if not real else ctx.mpf(a.real) for a in poly.coefficients])
    unit = 10.0 ** (-ctx.dps + 2) if real else 2.3e-16
    for c, _ in poly.critical_points:
        z = ctx.mpf(c.real) if real else complex(c)
        err = 0.0
        for _ in range(n_pc):
            dfz = abs(poly.derivative(complex(z)))
            if real:
                acc = ctx.mpf(1)
                for a in coeffs[1:]:
                    acc = acc * z + a
                z = acc
            else:
                z = evaluate(poly, z)
            err = dfz * err + unit * max(1.0, abs(complex(z)))
            if err > 1e-10 or abs(complex(z)) > 10 * poly.escape_radius:
                break
            pts.append(complex(z))
    return np.array(pts)


def _to_mpfr(x):
    sign, man, exp, _ = x._mpf_
    r = gmpy2.mul_2exp(gmpy2.mpfr(man), exp)
    return -r if sign else r


def supports_real_engine(poly):
    return poly.is_real and all(abs(z.imag) < 1e-12 for z, _ in poly.critical_points)


# --- realisation -------------------------------------------------------------

def _iterate_predicate(engine, grid, piece):
    if isinstance(engine, RealEngine) and piece.ref is not None:
        return _perturbed_predicate(engine, grid, piece)
    return _direct_predicate(engine, grid, piece)


def _perturbed_predicate(engine, grid, piece):
    """Cells are tracked as offsets from the exact orbit of the anchor, so
    pieces far below double resolution of the plane still rasterize."""
    ci, t = piece.ref
    e = grid.centers().ravel() - complex(float(engine.orbits[ci][t]))
    ok, n_amb = _perturbed_member(engine, piece, e)
    return ok.reshape(grid.resolution, grid.resolution), n_amb


def _orbit_data(engine, ci):
    """Float orbit, boundary clearance and Taylor coefficients along the
    orbit of critical point ci, computed once per engine."""
    cache = engine.__dict__.setdefault("_orbit_cache", {})
    if ci not in cache:
        base, poly = engine.base, engine.poly
        ref = np.array([complex(float(x)) for x in engine.orbits[ci]])
        clearance = base.distance_to_boundary(ref) - base.eps_tube
        c = np.array(poly.coefficients, dtype=complex)
        coef = []
        for k in range(1, len(c)):
            c = np.polyder(c)
            coef.append(np.polyval(c, ref) / math.factorial(k))
        cache[ci] = (ref, clearance, np.array(coef).T)
    return cache[ci]


def _perturbed_member(engine, piece, e):
    # a point whose offset is smaller than the distance from the reference
    # point to the depth-0 boundary (less the tube) inherits its label
    base = engine.base
    ci, t = piece.ref
    ref, clearance, coef = _orbit_data(engine, ci)
    e = np.asarray(e, dtype=complex).ravel()
    ok = np.ones(e.shape, dtype=bool)
    idx = np.arange(e.size)
    n_amb = 0
    for i, lab in enumerate(piece.itinerary):
        far = np.abs(e) >= clearance[t + i]
        if far.any():
            labs = np.full(e.shape, lab, dtype=np.int64)
            labs[far] = base.label_array(ref[t + i] + e[far])
            n_amb += int(np.count_nonzero(labs == AMBIGUOUS))
            keep = labs == lab
            ok[idx[~keep]] = False
            idx, e = idx[keep], e[keep]
        if i < piece.depth and idx.size:
            acc = np.zeros_like(e)
            for c in coef[t + i][::-1]:
                acc = (acc + c) * e
            e = acc
    return ok, n_amb


def _direct_member(engine, piece, z):
    base, poly = engine.base, engine.poly
    z = np.asarray(z, dtype=complex).ravel()
    ok = np.ones(z.shape, dtype=bool)
    idx = np.arange(z.size)
    w = z.copy()
    n_amb = 0
    for i, lab in enumerate(piece.itinerary):
        labs = base.label_array(w)
        n_amb += int(np.count_nonzero(labs == AMBIGUOUS))
        keep = labs == lab
        ok[idx[~keep]] = False
        idx, w = idx[keep], w[keep]
        if i < piece.depth and idx.size:
            w = evaluate(poly, w)
    return ok, n_amb


def _direct_predicate(engine, grid, piece):
    ok, n_amb = _direct_member(engine, piece, grid.centers())
    return ok.reshape(grid.resolution, grid.resolution), n_amb


def piece_member(engine, piece, w, centre=None):
    """Itinerary test for the points centre + w.

    ``w`` is an array of offsets and ``centre`` an orbit reference (ci, j),
    a number, or None for the reference point of the piece.  Offsets are
    combined with the centre exactly, so w may be far below double
    resolution of the plane.  Returns (mask shaped like w, ambiguous count)."""
    w = np.asarray(w, dtype=complex)
    if isinstance(engine, RealEngine) and piece.ref is not None:
        ci, t = piece.ref
        if centre is None:
            delta = 0.0
        else:
            x = engine.value(*centre) if isinstance(centre, tuple) else engine.exact_point(centre)
            delta = float(x - engine.orbits[ci][t])
        ok, n_amb = _perturbed_member(engine, piece, w.ravel() + delta)
    else:
        if centre is None:
            z0 = complex(piece.anchor)
        elif isinstance(centre, tuple):
            z0 = complex(engine.value(*centre))
        else:
            z0 = complex(centre)
        ok, n_amb = _direct_member(engine, piece, w.ravel() + z0)
    return ok.reshape(w.shape), n_amb


def _initial_box(engine, piece):
    if isinstance(engine, RealEngine):
        a, b = engine.interval(piece)
        a, b = float(a), float(b)
        return complex((a + b) / 2), 0.75 * (b - a)
    # univalent-pullback estimate of the diameter
    z = complex(piece.anchor)
    dz = 1.0
    for _ in range(piece.depth):
        dz *= abs(engine.poly.derivative(z))
        z = evaluate(engine.poly, z)
    size = (engine.base.grid.hi.real - engine.base.grid.lo.real) / 2
    return complex(piece.anchor), min(size, 2 * size / max(dz, 1e-300))


def realize_piece(engine, piece, resolution, grid=None, max_adjust=8):
    """Raster of the piece: the 4-connected component of the anchor cell in
    {cells whose orbit follows the itinerary}.  Without a grid, the box is
    adapted until the component sits strictly inside it."""
    if resolution < MIN_RESOLUTION:
        raise InvalidArgument(f"resolution must be at least {MIN_RESOLUTION}")
    fixed = grid is not None
    if not fixed:
        centre, half = _initial_box(engine, piece)
    for _ in range(max_adjust):
        if not fixed:
            grid = Grid.square(centre, half, resolution)
        pred, n_amb = _iterate_predicate(engine, grid, piece)
        cell = grid.index_of(complex(piece.anchor))
        comp = component_at(pred, cell)
        if comp is None:
            if fixed or cell is None:
                raise InconsistentAnchor("anchor cell fails the piece predicate")
            half *= 0.5
            continue
        mask = GridMask(grid, comp, {"depth": piece.depth, "ambiguous_cells": n_amb})
        if fixed:
            return mask
        if mask.touches_edge():
            half *= 2.0
            continue
        if mask.area_cells < (resolution // 8) ** 2:
            # too small to be useful: zoom in around the component
            rows, cols = np.nonzero(comp)
            z = grid.centers()[rows, cols]
            centre = complex((z.real.min() + z.real.max()) / 2, (z.imag.min() + z.imag.max()) / 2)
            half = 0.6 * max(z.real.max() - z.real.min(), z.imag.max() - z.imag.min()) + 2 * grid.cell
            continue
        return mask
    raise InconsistentAnchor("could not frame the piece raster")


# --- the estimator -------------------------------------------------------

class YoccozPuzzle(BaseEstimator):
    """Puzzle of a polynomial with a separating repelling fixed point.

    ``fit(poly)`` builds the depth-0 partition, the truncated postcritical
    orbits and a membership engine.  ``predict`` gives depth-0 labels and
    ``transform`` itineraries of points.
    """

    def __init__(self, h0=None, resolution=512, n_pc=N_PC, horizon=HORIZON,
                 engine="auto", dps=None):
        self.h0 = h0
        self.resolution = resolution
        self.n_pc = n_pc
        self.horizon = horizon
        self.engine = engine
        self.dps = dps

    def fit(self, poly, y=None):
        if not isinstance(poly, Polynomial):
            raise InvalidArgument("fit expects a Polynomial")
        check_positive_int(self.resolution, "resolution", minimum=MIN_RESOLUTION)
        check_positive_int(self.n_pc, "n_pc")
        check_positive_int(self.horizon, "horizon")
        # a first pass of the critical orbits steers the choice of h0
        pcs = probe_postcritical(poly, self.n_pc, self.dps)
        self.poly_ = poly
        self.base_ = build_base_partition(poly, self.h0, self.resolution, pcs)
        kind = self.engine
        if kind == "auto":
            kind = "real" if supports_real_engine(poly) else "complex"
        if kind == "real":
            self.engine_ = RealEngine(poly, self.base_, self.n_pc, self.horizon, self.dps)
        elif kind == "complex":
            self.engine_ = ComplexEngine(poly, self.base_, self.n_pc, self.horizon)
        else:
            raise InvalidArgument(f"unknown engine {kind!r}")
        return self

    def predict(self, z):
        check_fitted(self, "engine_")
        return self.base_.label_array(z)

    def transform(self, z, depth=3):
        check_fitted(self, "engine_")
        return [self.engine_.itinerary(w, depth) for w in np.atleast_1d(z)]

    # convenience ---------------------------------------------------------

    @property
    def n_critical(self):
        return len(self.engine_.crit)

    def horizon_of(self, ci=0):
        return self.engine_.horizon(ci)

    def critical_piece(self, ci, depth):
        return self.engine_.critical_piece(ci, depth)

    def piece_of(self, z, depth):
        return piece_of(self, z, depth)

    def realize(self, piece, resolution=None, grid=None):
        return realize(self, piece, resolution or self.resolution, grid)


def _engine(puzzle):
    check_fitted(puzzle, "engine_")
    return puzzle.engine_


def itinerary(puzzle, z, n):
    return _engine(puzzle).itinerary(z, n)


def piece_of(puzzle, z, depth):
    eng = _engine(puzzle)
    word = eng.itinerary(z, depth)
    return PuzzlePiece(depth, complex(z), word, None, eng.exact_point(z))


def realize(puzzle, piece, resolution, grid=None):
    mask = realize_piece(_engine(puzzle), piece, resolution, grid)
    return piece.with_raster(mask, 0)


def same_piece(puzzle, p, q):
    if p.depth != q.depth:
        raise InvalidArgument("same_piece compares pieces of equal depth")
    if tuple(p.itinerary) != tuple(q.itinerary):
        return False
    eng = _engine(puzzle)
    if q.ref is not None:
        return eng.contains_orbit_point(p, *q.ref)
    return eng._certify(p, q.exact if q.exact is not None else eng.exact_point(q.anchor), q.ref)


def first_entry(puzzle, ci, i, piece, hat=False, horizon=None):
    """First entry of the orbit point f^i(c_ci) into ``piece``.

    Returns (k, L) with k >= 1 minimal such that f^{i+k}(c_ci) lies in the
    piece and L the depth(piece)+k piece containing f^i(c_ci).  With
    ``hat=True`` a point already inside gives (0, piece)."""
    eng = _engine(puzzle)
    if hat and eng.contains_orbit_point(piece, ci, i):
        return 0, piece
    h = eng.horizon(ci) if horizon is None else min(horizon, eng.horizon(ci))
    stop = h - piece.depth + 1
    if stop <= i + 1:
        raise HorizonExhausted("no room to scan for an entry", horizon=h)
    hits = _first_hit(eng, piece, ci, i + 1, stop)
    if hits is None:
        raise HorizonExhausted(f"no entry into the depth-{piece.depth} piece before iterate {h}",
                               horizon=h)
    k = hits - i
    return k, eng.orbit_piece(ci, i, piece.depth + k)


def _first_hit(eng, piece, ci, start, stop, chunk=4096):
    j = start
    while j < stop:
        hits = eng.orbit_hits(piece, ci, j, min(stop, j + chunk))
        if hits:
            return hits[0]
        j += chunk
    return None


def first_entry_point(puzzle, x, piece, horizon=1000):
    """First entry for an arbitrary point x (iterated on the fly)."""
    eng = _engine(puzzle)
    if eng.contains(piece, x):
        return 0, piece
    y = eng.exact_point(x)
    for k in range(1, horizon + 1):
        y = eng.f(y) if isinstance(eng, RealEngine) else evaluate(eng.poly, y)
        try:
            if eng.contains(piece, complex(y) if not isinstance(eng, RealEngine) else float(y)):
                return k, piece_of(puzzle, x, piece.depth + k)
        except (BoundaryAmbiguity, OutsidePartition):
            continue
    raise HorizonExhausted(f"no entry within {horizon} iterates", horizon=horizon)


def is_critical(puzzle, piece):
    """Indices of critical points inside the piece."""
    eng = _engine(puzzle)
    return [ci for ci in range(len(eng.crit)) if eng.contains_orbit_point(piece, ci, 0)]


def children(puzzle, piece, ci, horizon=None):
    """Children of a critical piece P containing c_ci: pieces Q ∋ c_ci of depth
    depth(P)+n with f^n(Q) = P and no critical point in f^j(Q), 0 < j < n.

    Returns (list of (n, Q), horizon used)."""
    eng = _engine(puzzle)
    if not eng.contains_orbit_point(piece, ci, 0):
        raise InvalidArgument("piece does not contain the critical point")
    m = piece.depth
    h = eng.horizon(ci) if horizon is None else min(horizon, eng.horizon(ci))
    stop = h - m + 1
    out = []
    if stop <= 1:
        return out, h
    for n in eng.orbit_hits(piece, ci, 1, stop):
        if _critical_free(eng, ci, n, m):
            out.append((n, eng.critical_piece(ci, m + n)))
    return out, h


def _critical_free(eng, ci, n, m):
    """True when f^j(c_ci) avoids every critical piece of depth m+n-j, 0<j<n."""
    js = np.arange(1, n)
    for cj in range(len(eng.crit)):
        lcp = eng.lcp(ci, cj)[1:n]
        # labels must agree on depth+1 = m+n-j+1 symbols
        for j in js[js + lcp >= m + n + 1]:
            target = eng.critical_piece(cj, m + n - int(j))
            if eng.contains_orbit_point(target, ci, int(j)):
                return False
    return True


def _z_function(s):
    n = len(s)
    z = np.zeros(n, dtype=np.int64)
    s = s.tolist()
    left = right = 0
    for i in range(1, n):
        if i < right:
            z[i] = min(right - i, z[i - left])
        k = z[i]
        while i + k < n and s[k] == s[i + k]:
            k += 1
        z[i] = k
        if i + k > right:
            left, right = i, i + k
    z[0] = n
    return z


def successors(puzzle, piece, ci, horizon=None):
    """Successors L̂_c(Q), Q a child of L̂_c'(P), over critical points c'."""
    eng = _engine(puzzle)
    out = []
    for cj in range(len(eng.crit)):
        try:
            _, p2 = first_entry(puzzle, cj, 0, piece, hat=True, horizon=horizon)
        except HorizonExhausted:
            continue
        kids, _ = children(puzzle, p2, cj, horizon)
        for _, q in kids:
            try:
                _, s = first_entry(puzzle, ci, 0, q, hat=True, horizon=horizon)
            except HorizonExhausted:
                continue
            out.append(s)
    return out


def smallest_successor(puzzle, piece, ci=0, horizon=None):
    """Γ(P): the deepest successor found up to the horizon.  Successors all
    contain c, so they are nested and the deepest is the smallest."""
    succ = successors(puzzle, piece, ci, horizon)
    if not succ:
        h = _engine(puzzle).horizon(ci) if horizon is None else horizon
        raise HorizonExhausted(
            f"no successor of the depth-{piece.depth} piece: not persistently recurrent at horizon {h}",
            horizon=h)
    return max(succ, key=lambda q: q.depth)


def return_time(puzzle, piece, ci=0, horizon=None):
    """Minimal return time to the piece over truncated-PC points inside it."""
    eng = _engine(puzzle)
    h = eng.horizon(ci) if horizon is None else min(horizon, eng.horizon(ci))
    stop = min(eng.n_pc, h - piece.depth) + 1
    inside = eng.orbit_hits(piece, ci, 0, stop)
    best = None
    for a, b in zip(inside[:-1], inside[1:]):
        best = b - a if best is None else min(best, b - a)
    for cj in range(len(eng.crit)):
        if cj == ci:
            continue
        hj = eng.horizon(cj)
        hits = eng.orbit_hits(piece, cj, 0, min(eng.n_pc, hj - piece.depth) + 1)
        for a, b in zip(hits[:-1], hits[1:]):
            best = b - a if best is None else min(best, b - a)
    if best is None:
        raise HorizonExhausted("fewer than two PC visits to the piece", horizon=h)
    return best
