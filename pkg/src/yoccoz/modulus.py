"""Conformal modulus of raster annuli and the measurements built on it.

The modulus of a doubly connected region A = outer \\ inner is the
reciprocal of the Dirichlet energy of the harmonic function that is 0 on
the inner boundary and 1 on the outer one.  Unknowns sit at cell centres
of A; an edge to a cell of ``inner`` carries the value 0, an edge to a cell
outside ``outer`` the value 1, and the energy is the sum of squared
differences over edges (midpoint rule, scale free in two dimensions).

Two refinements sit on top of that scheme.  When a region comes with an
exact membership test, each boundary edge is cut where the test switches,
which removes the first-order staircase error.  Puzzle annuli are drawn in
log-polar cells about a point of the inner piece; the energy is conformally
invariant, so nested pieces many orders of magnitude apart share one grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy import ndimage

from .errors import CheckFailed, ConvergenceError, InconsistentAnchor, InvalidArgument, YoccozError
from .raster import Grid, GridMask, count_components, disk_mask
from .validation import check_symmetric

SOLVER_TOL = 1e-10
SLACK = 1.05
SUPERADDITIVE_SLACK = 0.95
REFINE_TOL = 0.03

_FOUR = ((0, 1), (1, 0), (0, -1), (-1, 0))


@dataclass(frozen=True, eq=False)
class AnnulusRegion:
    outer: GridMask
    inner: GridMask
    provenance: dict = field(default_factory=dict)
    # optional exact membership tests (complex array -> bool) for sub-cell boundaries
    outer_pred: object = None
    inner_pred: object = None

    def __post_init__(self):
        if self.outer.grid != self.inner.grid:
            raise InvalidArgument("inner and outer masks must share a grid")
        if not self.inner.subset_of(self.outer):
            raise InvalidArgument("inner mask is not contained in the outer mask")

    @property
    def resolution(self):
        return self.outer.resolution

    @property
    def grid(self):
        return self.outer.grid

    @property
    def gap(self):
        """Cells of ``outer`` separating ``inner`` from the outside."""
        return self.inner.gap_to_complement(self.outer)

    def audit(self):
        return {"gap_cells": self.gap,
                "outer_components": count_components(self.outer.mask),
                "inner_components": count_components(self.inner.mask),
                "resolution": self.resolution}

    def check(self):
        a = self.audit()
        if a["gap_cells"] < 1:
            raise CheckFailed("inner region touches the outer boundary", clause="annulus-gap")
        if a["outer_components"] != 1 or a["inner_components"] != 1:
            raise CheckFailed("annulus masks must be single components", clause="annulus-components")
        return a


def annulus(outer, inner, **provenance):
    """AnnulusRegion from two boolean arrays (or GridMasks) on one grid."""
    if not isinstance(outer, GridMask):
        raise InvalidArgument("outer must be a GridMask")
    if not isinstance(inner, GridMask):
        inner = outer.with_mask(np.asarray(inner, dtype=bool))
    return AnnulusRegion(outer, inner, provenance)


THETA_MIN = 0.01
_ROUNDS = 6
_SPLIT = 16


class CutPredicate:
    """Membership test with a memo of boundary crossings, for regions
    whose boundary is shared by several annuli."""

    def __init__(self, fn):
        self.fn = fn
        self.memo = {}

    def __call__(self, z):
        return self.fn(z)


def _bisect(pred, z0, z1, want, rounds=_ROUNDS, m=_SPLIT):
    # multisection: each round tests m points per segment at once
    lo = np.zeros(z0.shape)
    hi = np.ones(z0.shape)
    j = np.arange(1, m + 1) / m
    for _ in range(rounds):
        t = lo[:, None] + (hi - lo)[:, None] * j[None, :]
        pts = z0[:, None] + t * (z1 - z0)[:, None]
        hit = np.asarray(pred(pts.ravel()), dtype=bool).reshape(t.shape) == want
        hit[:, -1] = True
        first = hit.argmax(axis=1)
        rows = np.arange(len(lo))
        new_hi = t[rows, first]
        lo = np.where(first > 0, t[rows, np.maximum(first - 1, 0)], lo)
        hi = new_hi
    return hi


def _crossing(pred, z0, z1, want=True):
    """Fraction t in (0, 1] of the first switch of ``pred`` to ``want`` on
    the segment z0 -> z1."""
    if not isinstance(pred, CutPredicate):
        return np.maximum(_bisect(pred, z0, z1, want), THETA_MIN)
    keys = [(a, b, want) for a, b in zip(z0.tolist(), z1.tolist())]
    todo = [k for k, key in enumerate(keys) if key not in pred.memo]
    if todo:
        t = _bisect(pred, z0[todo], z1[todo], want)
        for k, v in zip(todo, t.tolist()):
            pred.memo[keys[k]] = v
    return np.maximum(np.array([pred.memo[k] for k in keys]), THETA_MIN)


def _pad(a, periodic, left, right):
    if not periodic:
        return np.pad(a, 1, constant_values=right)
    a = np.concatenate([a[-1:], a, a[:1]], axis=0)
    L = np.full((a.shape[0], 1), left, dtype=a.dtype)
    R = np.full((a.shape[0], 1), right, dtype=a.dtype)
    return np.concatenate([L, a, R], axis=1)


def dirichlet_system(outer, inner, centers=None, h=None, outer_pred=None, inner_pred=None,
                     periodic=False):
    """Sparse 5-point system (A, b, c) whose minimum of u.Au - 2b.u + c over
    the free cells is the discrete energy.

    Without predicates the boundary values sit at the neighbouring cell
    centres.  With them, each boundary edge is cut where the predicate
    switches and its conductance becomes 1/θ, θ the cut fraction.
    ``periodic`` reads the arrays as log-polar: rows wrap around and the
    column left of the array lies inside ``inner``.  ``centers`` and ``h``
    place the cells for the predicates."""
    outer = np.asarray(outer, dtype=bool)
    inner = np.asarray(inner, dtype=bool) & outer
    free = outer & ~inner
    n = int(free.sum())
    idx = -np.ones(outer.shape, dtype=np.int64)
    idx[free] = np.arange(n)
    P = _pad(outer, periodic, True, False)
    Q = _pad(inner, periodic, True, False)
    I = _pad(idx, periodic, -1, -1)
    me = idx[free]
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    b = np.zeros(n)
    H, W = outer.shape
    cut = centers is not None and (outer_pred is not None or inner_pred is not None)
    if cut:
        z0 = np.asarray(centers)[free]
    for dy, dx in _FOUR:
        sl = (slice(1 + dy, H + 1 + dy), slice(1 + dx, W + 1 + dx))
        nb = I[sl][free]
        out = ~P[sl][free]
        hit_inner = Q[sl][free]
        link = nb >= 0
        rows.append(me[link])
        cols.append(nb[link])
        vals.append(-np.ones(int(link.sum())))
        w = np.ones(n)
        if cut:
            step = complex(dx * h, dy * h)
            if outer_pred is not None and out.any():
                w[out] = 1 / _crossing(outer_pred, z0[out], z0[out] + step, want=False)
            if inner_pred is not None and hit_inner.any():
                w[hit_inner] = 1 / _crossing(inner_pred, z0[hit_inner], z0[hit_inner] + step)
        diag += np.where(link, 1.0, w)
        b += np.where(out, w, 0.0)
    A = sp.csr_matrix((np.concatenate([diag] + vals),
                       (np.concatenate([me] + rows), np.concatenate([me] + cols))),
                      shape=(n, n))
    return A, b, float(b.sum())


def dirichlet_energy(outer, inner, tol=SOLVER_TOL, **cut):
    A, b, c = dirichlet_system(outer, inner, **cut)
    if A.shape[0] == 0:
        return c
    # pyamg draws spectral-radius start vectors from the global RNG; pin it
    # so reports are bit-reproducible, then hand the caller's state back
    state = np.random.get_state()
    try:
        np.random.seed(0)
        ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric")
        u = ml.solve(b, x0=np.zeros_like(b), tol=tol, accel="cg", maxiter=500)
    finally:
        np.random.set_state(state)
    rel = np.linalg.norm(b - A @ u) / max(np.linalg.norm(b), 1e-300)
    if not np.isfinite(rel) or rel > 100 * tol:
        raise ConvergenceError(f"Laplace solve stalled at relative residual {rel:.2e}")
    return float(u @ (A @ u) - 2 * b @ u + c)


def _arrays(region):
    """(outer, inner) boolean arrays of either annulus kind."""
    if isinstance(region, LogPolarAnnulus):
        return region.outer, region.inner
    return region.outer.mask, region.inner.mask


def modulus(region, tol=SOLVER_TOL):
    """Modulus of an AnnulusRegion.  An empty inner region gives +inf; an
    inner region touching the outside gives 0."""
    outer, inner = _arrays(region)
    if not inner.any():
        return math.inf
    if region.gap < 1:
        return 0.0
    cut = {}
    if region.outer_pred is not None or region.inner_pred is not None:
        cut = {"outer_pred": region.outer_pred, "inner_pred": region.inner_pred}
    if isinstance(region, LogPolarAnnulus):
        f = region.frame
        cut.update(periodic=True, centers=f.log_centers(), h=f.ds)
    elif cut:
        cut.update(centers=region.grid.centers(), h=region.grid.cell)
    return 1.0 / dirichlet_energy(outer, inner, tol, **cut)


@dataclass(frozen=True)
class LogPolarFrame:
    """Cells of side 2π/n_theta in w = log(z - centre); rows are angles,
    columns run outward in log-radius."""
    centre: object
    s_min: float
    s_max: float
    n_theta: int

    @property
    def ds(self):
        return 2 * math.pi / self.n_theta

    @property
    def n_s(self):
        return max(1, int(math.ceil((self.s_max - self.s_min) / self.ds)))

    @property
    def resolution(self):
        return self.n_theta

    def log_centers(self):
        """w = s + iθ at the cell centres, shape (n_theta, n_s)."""
        th = (np.arange(self.n_theta) + 0.5) * self.ds
        sv = self.s_min + (np.arange(self.n_s) + 0.5) * self.ds
        return sv[None, :] + 1j * th[:, None]

    def offsets(self):
        return np.exp(self.log_centers())

    def to_json(self):
        c = self.centre
        return {"centre": list(c) if isinstance(c, tuple) else [complex(c).real, complex(c).imag],
                "s_min": self.s_min, "s_max": self.s_max, "n_theta": self.n_theta, "n_s": self.n_s}


def puncture_component(mask):
    """Cells of ``mask`` connected to the left edge, rows wrapping."""
    lab, n = ndimage.label(mask, structure=ndimage.generate_binary_structure(2, 1))
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in zip(lab[0], lab[-1]):
        if a and b:
            parent[find(a)] = find(b)
    roots = {find(a) for a in np.unique(lab[:, 0]) if a}
    keep = np.array([find(a) in roots if a else False for a in range(n + 1)])
    return keep[lab]


@dataclass(frozen=True, eq=False)
class LogPolarAnnulus:
    """Annulus drawn in log-polar cells about a point of the inner region.
    Conformal invariance makes the same 5-point energy valid there, so
    regions many orders of magnitude apart share one grid."""
    outer: np.ndarray
    inner: np.ndarray
    frame: LogPolarFrame
    provenance: dict = field(default_factory=dict)
    # optional membership tests in log coordinates w = s + iθ
    outer_pred: object = None
    inner_pred: object = None

    def __post_init__(self):
        if self.outer.shape != self.inner.shape:
            raise InvalidArgument("inner and outer arrays differ in shape")
        if (self.inner & ~self.outer).any():
            raise InvalidArgument("inner mask is not contained in the outer mask")

    @property
    def resolution(self):
        return self.frame.n_theta

    @property
    def gap(self):
        if not self.inner.any():
            return np.inf
        ext = np.concatenate([self.outer[-1:], self.outer, self.outer[:1]], axis=0)
        ext = np.pad(ext, ((0, 0), (0, 1)))
        ext = np.pad(ext, ((0, 0), (1, 0)), constant_values=True)
        dist = ndimage.distance_transform_cdt(ext, metric="chessboard")[1:-1, 1:-1]
        return int(dist[self.inner].min()) - 1


@dataclass(frozen=True)
class RefinedModulus:
    value: float
    coarse: float
    resolution: int
    change: float
    accepted: bool

    def to_json(self):
        return {"value": self.value, "coarse": self.coarse, "resolution": self.resolution,
                "relative_change": self.change, "accepted": self.accepted}


def refined_modulus(build, resolution, tol=REFINE_TOL):
    """Modulus at ``resolution`` and twice it; ``build(res)`` returns the
    AnnulusRegion.  Accepted when the two differ by less than ``tol``."""
    coarse = modulus(build(resolution))
    fine = modulus(build(2 * resolution))
    change = abs(fine - coarse) / max(abs(fine), 1e-300)
    return RefinedModulus(fine, coarse, 2 * resolution, change, change < tol)


# --- synthetic regions -------------------------------------------------------------

def unit_grid(resolution, half_width=1.05):
    return Grid.square(0, half_width, resolution)


def round_annulus(r, R, resolution, half_width=None):
    g = unit_grid(resolution, 1.05 * R if half_width is None else half_width)
    z = np.abs(g.centers())
    outer = GridMask(g, z < R)
    return AnnulusRegion(outer, outer.with_mask(z <= r), {"kind": "round", "r": r, "R": R},
                         outer_pred=lambda w: np.abs(w) < R, inner_pred=lambda w: np.abs(w) <= r)


def mask_from_predicate(grid, pred):
    return GridMask(grid, np.asarray(pred(grid.centers()), dtype=bool))


# --- geometry ---------------------------------------------------------------------

@dataclass(frozen=True)
class GeometryReport:
    r: float
    R: float
    ratio: float
    point: complex
    resolution: int

    def to_json(self):
        return {"r": self.r, "R": self.R, "ratio": self.ratio,
                "point": [self.point.real, self.point.imag], "resolution": self.resolution}


def bounded_geometry(mask, x):
    """Inradius r and circumradius R of the mask about x:
    B(x, r) ⊂ mask ⊂ B(x, R)."""
    g = mask.grid
    if not mask.contains_point(x):
        raise InvalidArgument("point is not inside the mask")
    z = g.centers()
    d = np.abs(z - x)
    half = g.cell / 2
    outside = ~mask.mask
    r = float(d[outside].min()) - half if outside.any() else math.inf
    R = float(d[mask.mask].max()) + half
    r = max(r, half)
    return GeometryReport(r, R, R / r, complex(x), g.resolution)


# --- puzzle measurements ----------------------------------------------------------

def _piece_scale(eng, piece):
    from .puzzle import RealEngine, _initial_box

    if isinstance(eng, RealEngine):
        a, b = eng.interval(piece)
        return float(b - a)
    return 2 * _initial_box(eng, piece)[1]


def _member_fn(eng, piece, centre):
    from .puzzle import piece_member

    def pred(w):
        return piece_member(eng, piece, np.exp(w), centre)[0]
    return pred


def piece_frame(puzzle, outer_piece, inner_piece, n_theta=256, centre=None, tries=12):
    """Log-polar frame about ``centre`` (default: the reference point of the
    inner piece) whose first column lies inside the inner piece and whose
    last column lies outside the outer piece."""
    eng = puzzle.engine_
    if centre is None:
        centre = inner_piece.ref if inner_piece.ref is not None else complex(inner_piece.anchor)
    s_min = math.log(_piece_scale(eng, inner_piece)) - 3
    s_max = math.log(_piece_scale(eng, outer_piece)) + 1
    f_in = _member_fn(eng, inner_piece, centre)
    f_out = _member_fn(eng, outer_piece, centre)
    ds = 2 * math.pi / n_theta
    th = 1j * (np.arange(n_theta) + 0.5) * ds
    for _ in range(tries):
        if f_in(s_min + ds / 2 + th).all():
            break
        s_min -= 2
    else:
        raise InconsistentAnchor("frame centre is not interior to the inner piece")
    for _ in range(tries):
        if not f_out(s_max - ds / 2 + th).any():
            break
        s_max += 1
    else:
        raise InconsistentAnchor("could not frame the outer piece")
    return LogPolarFrame(centre, s_min, s_max, n_theta)


def chain_annuli(puzzle, pieces, n_theta=256, centre=None, cut=True):
    """Annuli between consecutive nested pieces and the enclosing annulus
    (first minus last), all on one log-polar frame about a point of the
    last piece."""
    if len(pieces) < 2:
        raise InvalidArgument("a chain needs at least two pieces")
    eng = puzzle.engine_
    frame = piece_frame(puzzle, pieces[0], pieces[-1], n_theta, centre)
    lc = frame.log_centers()
    preds, masks, amb = [], [], []
    from .puzzle import piece_member

    for q in pieces:
        m, n_amb = piece_member(eng, q, np.exp(lc), frame.centre)
        masks.append(puncture_component(m))
        preds.append(CutPredicate(_member_fn(eng, q, frame.centre)) if cut else None)
        amb.append(n_amb)
    for k in range(1, len(masks)):
        masks[k] &= masks[k - 1]

    def ring(a, b):
        prov = {"outer_depth": pieces[a].depth, "inner_depth": pieces[b].depth,
                "ambiguous_cells": amb[a] + amb[b], "frame": frame.to_json()}
        return LogPolarAnnulus(masks[a], masks[b], frame, prov, preds[a], preds[b])

    rings = [ring(k, k + 1) for k in range(len(pieces) - 1)]
    return rings, ring(0, len(pieces) - 1)


def piece_modulus(puzzle, outer_piece, inner_piece, n_theta=256, centre=None):
    """mod(outer - inner) for nested puzzle pieces."""
    (a,), _ = chain_annuli(puzzle, [outer_piece, inner_piece], n_theta, centre)
    return modulus(a)


def _pc_hits(puzzle, piece):
    eng = puzzle.engine_
    out = []
    for cj in range(len(eng.crit)):
        h = eng.horizon(cj)
        stop = min(eng.n_pc, h - piece.depth) + 1
        if stop > 1:
            out.extend((cj, t) for t in eng.orbit_hits(piece, cj, 1, stop))
    return out


@dataclass(frozen=True)
class ConstantReport:
    value: float
    per_domain: tuple
    excluded: tuple
    resolution: int
    vacuous: bool = False

    def to_json(self):
        return {"value": self.value, "per_domain": [list(x) for x in self.per_domain],
                "excluded": [list(x) if isinstance(x, tuple) else [x] for x in self.excluded],
                "resolution": self.resolution,
                "vacuous": self.vacuous}


def nice_constant(puzzle, piece, n_theta=256, max_domains=16):
    """μ = min over truncated-PC points x in P of mod(P - L_x(P))."""
    from .puzzle import first_entry

    eng = puzzle.engine_
    domains, excluded = [], []
    for cj, t in _pc_hits(puzzle, piece):
        if any(eng.contains_orbit_point(L, cj, t) for L in domains):
            continue
        if len(domains) >= max_domains:
            excluded.append((cj, t, "domain cap"))
            continue
        try:
            _, L = first_entry(puzzle, cj, t, piece)
        except YoccozError as exc:          # horizon or ambiguity: listed, not guessed
            excluded.append((cj, t, type(exc).__name__))
            continue
        domains.append(L)
    if not domains:
        return ConstantReport(math.inf, (), tuple(excluded), n_theta, vacuous=True)
    vals = []
    for L in domains:
        vals.append((L.depth, piece_modulus(puzzle, piece, L, n_theta)))
    return ConstantReport(min(v for _, v in vals), tuple(vals), tuple(excluded), n_theta)


def _deepest_containing(eng, ci, t, lo, hi):
    """Largest depth D in [lo, hi] with f^t(c_j) in the depth-D critical piece of c_ci."""
    if not eng.contains_orbit_point(eng.critical_piece(ci, lo), t[0], t[1]):
        return lo - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if eng.contains_orbit_point(eng.critical_piece(ci, mid), t[0], t[1]):
            lo = mid
        else:
            hi = mid - 1
    return lo


def fat_constant(puzzle, piece, ci=0, plus=None, minus=None, n_theta=256, span=64):
    """δ = min(mod(P⁺ - P), mod(P - P⁻)) for PC-free collars P⁺ - P and
    P - P⁻.  Defaults: the shallowest critical ancestor and the deepest
    critical descendant with PC-free collars."""
    eng = puzzle.engine_
    m = piece.depth
    hits = _pc_hits(puzzle, piece)
    if plus is None:
        plus = piece
        for k in range(m - 1, -1, -1):
            cand = eng.critical_piece(ci, k)
            if all(eng.contains_orbit_point(piece, *x) for x in _pc_hits(puzzle, cand)):
                plus = cand
            else:
                break
    if minus is None:
        if not hits:
            return ConstantReport(math.nan, (), ("no PC points in P",), n_theta, vacuous=True)
        top = min(m + span, min(eng.horizon(j) for j in range(len(eng.crit))) - 1)
        deepest = top
        for x in hits:
            deepest = min(deepest, _deepest_containing(eng, ci, x, m, deepest))
            if deepest <= m:
                break
        minus = eng.critical_piece(ci, deepest)
    if plus.depth >= m or minus.depth <= m:
        return ConstantReport(math.nan, (), ("no PC-free collar at this depth",), n_theta,
                              vacuous=True)
    (ra, rb), _ = chain_annuli(puzzle, [plus, piece, minus], n_theta)
    a, b = modulus(ra), modulus(rb)
    notes = tuple(f"collar {d} thinner than one cell at n_theta={n_theta}"
                  for d, r in (("P+ - P", ra), ("P - P-", rb)) if r.gap < 1)
    return ConstantReport(min(a, b), ((plus.depth, a), (minus.depth, b)), notes, n_theta)


def piece_geometry(puzzle, piece, resolution=256):
    from .puzzle import realize_piece

    mask = realize_piece(puzzle.engine_, piece, resolution)
    return bounded_geometry(mask.with_mask(ndimage.binary_fill_holes(mask.mask)),
                            complex(piece.anchor))


# --- inequality checks -----------------------------------------------------------

@dataclass(frozen=True)
class CheckReport:
    name: str
    values: dict
    passed: bool
    resolution: int
    slack: float | None = None

    def to_json(self):
        return {"check": self.name, "values": self.values, "pass": self.passed,
                "resolution": self.resolution, "slack": self.slack}


def halffactor_check(V, B, slack=SLACK):
    """½ mod(V - B⁺) <= mod(V - B) <= mod(V - B⁺), B⁺ = B ∩ {Im > 0}."""
    check_symmetric(V.mask, "V")
    check_symmetric(B.mask, "B")
    upper = V.grid.centers().imag > 0
    Bp = B.with_mask(B.mask & upper)
    mid = modulus(AnnulusRegion(V, B))
    rhs = modulus(AnnulusRegion(V, Bp))
    lhs = rhs / 2
    ok = lhs <= slack * mid and mid <= slack * rhs
    return CheckReport("halffactor", {"lhs": lhs, "mid": mid, "rhs": rhs}, bool(ok),
                       V.resolution, slack)


def halffactor_family(resolution):
    """Ten conjugation-symmetric (V, B) pairs."""
    g = unit_grid(resolution, 1.05)
    z = g.centers()
    disk = GridMask(g, np.abs(z) < 1)
    ellipse = GridMask(g, (z.real / 1.0) ** 2 + (z.imag / 0.7) ** 2 < 1)
    square = GridMask(g, (np.abs(z.real) < 0.95) & (np.abs(z.imag) < 0.95))
    cases = [
        (disk, np.abs(z) < 0.5),
        (disk, np.abs(z) < 0.2),
        (disk, np.abs(z - 0.4) < 0.25),
        (disk, (np.abs(z.real + 0.2) < 0.3) & (np.abs(z.imag) < 0.1)),
        (disk, (np.abs(z.real) < 0.6) & (np.abs(z.imag) < 0.02)),
        (ellipse, np.abs(z) < 0.3),
        (ellipse, (z.real / 0.5) ** 2 + (z.imag / 0.2) ** 2 < 1),
        (square, np.abs(z + 0.3) < 0.35),
        (square, (np.abs(z.real) < 0.5) & (np.abs(z.imag) < 0.5)),
        (disk, (np.abs(z - 0.3) < 0.2) | (np.abs(z + 0.3) < 0.2) | ((np.abs(z.real) < 0.3) & (np.abs(z.imag) < 0.05))),
    ]
    return [(V, V.with_mask(b & V.mask)) for V, b in cases]


def sublemma_check(d, B_pred, resolution, half_width=1.05, mod_B=None):
    """C implied by mod(D - A) > mod(D - B) / (1 + C d mod(D - B)), A the
    component of φ^{-1}(B), φ(z) = z^d, in the sector 0 < arg z < π/d.
    ``mod_B`` reuses a value computed at the same resolution."""
    if d < 1:
        raise InvalidArgument("d must be a positive integer")
    g = unit_grid(resolution, half_width)
    z = g.centers()
    D = GridMask(g, np.abs(z) < 1)
    B = D.with_mask(np.asarray(B_pred(z), dtype=bool) & D.mask)
    if (B.mask & (z.imag <= 0)).any():
        raise InvalidArgument("B must lie in the upper half of the unit disk")
    arg = np.angle(z)
    sector = (arg > 0) & (arg < math.pi / d) if d > 1 else np.ones_like(D.mask)
    A = D.with_mask(np.asarray(B_pred(z ** d), dtype=bool) & sector & D.mask)
    if count_components(A.mask) != 1:
        raise CheckFailed("pullback of B has no single component in the sector",
                          clause="sublemma-component")
    disk = lambda w: np.abs(w) < 1
    if mod_B is None:
        mod_B = modulus(AnnulusRegion(D, B, {}, disk, B_pred))
    mB = mod_B
    mA = modulus(AnnulusRegion(D, A, {}, disk, lambda w: np.asarray(B_pred(w ** d), dtype=bool)))
    C = (1 / mA - 1 / mB) / d
    return CheckReport("sublemma", {"d": d, "mod_B": mB, "mod_A": mA, "C_implied": C},
                       bool(np.isfinite(C)), resolution)


def sublemma_family():
    """The shipped B shapes (predicates on complex arrays)."""
    return {
        "disk@0.5i/0.2": lambda w: np.abs(w - 0.5j) < 0.2,
        "disk@0.5i/0.3": lambda w: np.abs(w - 0.5j) < 0.3,
        "disk@(0.25+0.5i)/0.25": lambda w: np.abs(w - (0.25 + 0.5j)) < 0.25,
        "ellipse@(-0.1+0.45i)": lambda w: ((w.real + 0.1) / 0.45) ** 2 + ((w.imag - 0.45) / 0.25) ** 2 < 1,
    }


def _frame_of(region):
    return region.frame if isinstance(region, LogPolarAnnulus) else region.grid


def grotzsch_check(annuli, enclosing, slack=SUPERADDITIVE_SLACK):
    """Σ mod(A_k) <= mod(enclosing) for disjoint nested annuli inside it,
    with ``slack`` for grid error."""
    eo, ei = _arrays(enclosing)
    ring_all = eo & ~ei
    rings = []
    for i, a in enumerate(annuli):
        if _frame_of(a) != _frame_of(enclosing):
            raise InvalidArgument("annuli must share the enclosing frame")
        o, n = _arrays(a)
        r = o & ~n
        if (r & ~ring_all).any():
            raise CheckFailed(f"annulus {i} leaves the enclosing annulus", clause="nesting")
        for j, q in enumerate(rings):
            if (r & q).any():
                raise CheckFailed(f"annuli {j} and {i} overlap", clause="nesting")
        rings.append(r)
    mods = [modulus(a) for a in annuli]
    total = modulus(enclosing)
    s = float(sum(mods))
    degenerate = [i for i, m in enumerate(mods) if m == 0.0 or not math.isfinite(m)]
    return CheckReport("grotzsch", {"moduli": mods, "sum": s, "total": total,
                                    "degenerate": degenerate},
                       bool(total >= slack * s), enclosing.resolution, slack)


def kl_triple(U, A_in, A_out, V, B_in, B_out, D, d, K1=1.0, K2=1.0):
    """Kahn-Lyubich configuration A ⊂ A' ⊂ U, B ⊂ B' ⊂ V (masks on one grid
    each).  Reports the moduli and mod(U∖A) / min(η^{-1} mod(B'∖B),
    d^{-2} mod(V∖B)) with η = K1/(2K2) and C = 1."""
    mUA = modulus(AnnulusRegion(U, A_in))
    mBB = modulus(AnnulusRegion(B_out, B_in))
    mVB = modulus(AnnulusRegion(V, B_in))
    eta = K1 / (2 * K2)
    denom = min(mBB / eta, mVB / d ** 2)
    return {"mod_U_minus_A": mUA, "mod_Bp_minus_B": mBB, "mod_V_minus_B": mVB,
            "D": D, "d": d, "eta": eta, "ratio": mUA / denom if denom > 0 else math.inf,
            "pullback_ratio": 2 * d * mUA / mVB if mVB > 0 else math.inf}


def covering_pair(outer_pred, inner_pred, k, resolution, half_width=1.05):
    """An annulus given by predicates on w and its preimage under w = z^k,
    each on its own grid.  The inner predicate must contain 0 so the
    covering is unbranched on the annulus."""
    if k < 1:
        raise InvalidArgument("k must be a positive integer")
    g = unit_grid(resolution, half_width)
    w = g.centers()
    outer = GridMask(g, outer_pred(w))
    base = AnnulusRegion(outer, outer.with_mask(inner_pred(w) & outer.mask), {"kind": "base"},
                         outer_pred, inner_pred)
    hk = half_width ** (1 / k)
    gk = unit_grid(resolution, hk)
    z = gk.centers() ** k
    outer_k = GridMask(gk, outer_pred(z))
    up = AnnulusRegion(outer_k, outer_k.with_mask(inner_pred(z) & outer_k.mask),
                       {"kind": "pullback", "k": k},
                       lambda u: outer_pred(u ** k), lambda u: inner_pred(u ** k))
    return base, up


# --- nest measurements -----------------------------------------------------------

def geometry_recursion_report(nest, puzzle=None, resolution=256, point=0j):
    """ρ_n about the critical point per level and the ratios ρ_{n+1}² / ρ_n.
    ``nest`` is a built nest, or a list of GridMasks measured about ``point``."""
    if puzzle is None:
        rows = [{"n": n, "rho": bounded_geometry(m, point).ratio} for n, m in enumerate(nest)]
        for a, b in zip(rows[:-1], rows[1:]):
            a["ratio_next"] = b["rho"] ** 2 / a["rho"]
        return rows
    rows = []
    for lv, piece in zip(nest.levels, nest.pieces):
        try:
            rho = piece_geometry(puzzle, piece, resolution).ratio
        except YoccozError as exc:          # piece beyond raster reach: reported
            rho = None
            nest.notes.append(f"rho at level {lv.n}: {exc}")
        lv.rho = rho
        rows.append({"n": lv.n, "depth": lv.depth, "rho": rho})
    for a, b in zip(rows[:-1], rows[1:]):
        if a["rho"] and b["rho"]:
            a["ratio_next"] = b["rho"] ** 2 / a["rho"]
    return rows


def measure_nest(nest, puzzle, n_theta=256, resolution=256):
    """Fill μ_n, fat_n and ρ_n into the levels of a built nest."""
    ci = nest.critical
    for lv, piece in zip(nest.levels, nest.pieces):
        mu = nice_constant(puzzle, piece, n_theta)
        lv.mu = None if mu.vacuous else mu.value
        fat = fat_constant(puzzle, piece, ci, n_theta=n_theta)
        lv.fat = None if fat.vacuous else fat.value
        for rep, name in ((mu, "mu"), (fat, "fat")):
            for x in rep.excluded:
                if isinstance(x, tuple):
                    x = f"orbit point {x[1]} of critical point {x[0]} skipped ({x[2]})"
                nest.notes.append(f"{name} at level {lv.n}: {x}")
    return geometry_recursion_report(nest, puzzle, resolution)


def nest_grotzsch(nest, puzzle, n_theta=256):
    """Grötzsch check on the annuli between consecutive pieces of each
    level's chain I_n ⊃ A ⊃ BA ⊃ Γ(BA) ⊃ ... ⊃ I_{n+1}."""
    out = []
    for n, chain in enumerate(nest.chains):
        rings, enc = chain_annuli(puzzle, chain, n_theta)
        rep = grotzsch_check(rings, enc)
        rep.values["level"] = n
        rep.values["depths"] = [q.depth for q in chain]
        out.append(rep)
    return out


def disk_nest(radii, resolution):
    """Concentric disk masks: a synthetic nest with exact round geometry."""
    g = unit_grid(resolution, 1.05 * max(radii))
    return [GridMask(g, disk_mask(g, 0, r)) for r in radii]
