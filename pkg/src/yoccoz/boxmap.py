"""Induced complex box mappings.

The descent of ``find_w_piece`` replaces a critical piece by its central
return domain until the return domain is compactly contained in it.  The
first return map to the union of these pieces (plus entry domains of
critical points that fall into them) is the box mapping F: U -> V.

U has infinitely many components; only those meeting the postcritical
truncation, or visited by the first ``orbit_depth`` F-iterates of a
critical point, are materialized.
"""
from __future__ import annotations

import bisect
import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (CheckFailed, HorizonExhausted, InconsistentAnchor, InvalidArgument,
                     RenormalizationDetected)
from .puzzle import YoccozPuzzle, first_entry, realize_piece
from .validation import check_fitted

GAP_CELLS = 2
CENTRAL_BOUND = 6
DEPTH_CAP = 12

RENORMALIZABLE = "RENORMALIZABLE-AT-HORIZON"
NON_RENORMALIZABLE = "NON-RENORMALIZABLE-WITNESSED"
PERSISTENT = "PERSISTENT-AT-HORIZON"
NOT_PERSISTENT = "NOT-PERSISTENT-WITNESSED"


# --- rasters -------------------------------------------------------------------

def _raster(puzzle, piece, resolution, grid=None):
    eng = puzzle.engine_
    key = ("box", piece.key, resolution, None if grid is None else (grid.lo, grid.hi))
    cache = eng._raster_cache
    if key not in cache:
        cache[key] = realize_piece(eng, piece, resolution, grid)
    return cache[key]


def containment_gap(puzzle, inner, outer, resolution=None, inner_resolution=128):
    """Cell gap (at the resolution of ``outer``'s frame) between ``inner``
    and the complement of ``outer``.  The inner piece is rasterized on its
    own frame and its cells are looked up in the outer distance map."""
    resolution = resolution or puzzle.resolution
    out = _raster(puzzle, outer, resolution)
    key = ("dist", outer.key, resolution)
    cache = puzzle.engine_._raster_cache
    if key not in cache:
        cache[key] = ndimage.distance_transform_cdt(np.pad(out.mask, 1),
                                                    metric="chessboard")[1:-1, 1:-1]
    dist = cache[key]
    try:
        inn = _raster(puzzle, inner, min(resolution, inner_resolution))
        rows, cols = np.nonzero(inn.mask)
        pts = inn.grid.centers()[rows, cols]
    except InconsistentAnchor:
        pts = np.array([complex(inner.anchor)])
    g = out.grid
    n = g.resolution
    c = np.floor((pts.real - g.lo.real) / (g.hi.real - g.lo.real) * n).astype(int)
    r = np.floor((pts.imag - g.lo.imag) / (g.hi.imag - g.lo.imag) * n).astype(int)
    if (c < 0).any() or (c >= n).any() or (r < 0).any() or (r >= n).any():
        return -1
    return int(dist[r, c].min()) - 1


# --- W pieces --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WPiece:
    piece: object
    critical: int
    return_time: int
    gap_cells: int
    resolution: int
    descent: tuple          # (depth, return time) per step


def _hits_of(puzzle, piece, ci, horizon=None):
    eng = puzzle.engine_
    h = eng.horizon(ci) if horizon is None else min(horizon, eng.horizon(ci))
    stop = h - piece.depth + 1
    if stop <= 1:
        return [], h
    return eng.orbit_hits(piece, ci, 1, stop), h


def renormalization_scan(puzzle, piece, ci=0, horizon=None):
    """(s, witness, horizon): s is the first return time of c to the piece;
    witness is the first k with f^{ks}(c) outside it, or None when every
    multiple of s up to the horizon returns."""
    hits, h = _hits_of(puzzle, piece, ci, horizon)
    if not hits:
        return None, None, h
    s = hits[0]
    got = set(hits)
    last = h - piece.depth
    for k in range(1, last // s + 1):
        if k * s not in got:
            return s, k, h
    return s, None, h


def fixed_point_gap(puzzle, piece, resolution=None):
    """Cells between the piece and the nearest separating fixed point; the
    piece closure must avoid them for the descent to terminate.  Rasters
    stay a tube width away from the rays, so the tube is subtracted; the
    real engine answers exactly from the piece interval."""
    eng = puzzle.engine_
    resolution = resolution or puzzle.resolution
    mask = _raster(puzzle, piece, resolution)
    if eng.kind == "real":
        a, b = eng.interval(piece)
        for p, _ in puzzle.base_.separating:
            if abs(p.imag) < 1e-9 and a <= eng.exact_point(p.real) <= b:
                return -1
    outside = ndimage.distance_transform_edt(~mask.mask)
    best = np.inf
    tube = puzzle.base_.eps_tube / mask.grid.cell
    for p, _ in puzzle.base_.separating:
        ij = mask.grid.index_of(complex(p))
        if ij is not None:
            best = min(best, float(outside[ij]) - 1 - tube)
    return best


def _clear_piece(puzzle, ci, resolution, max_depth):
    """Shallowest critical piece whose closure misses the separating fixed
    points."""
    eng = puzzle.engine_
    for m in range(max_depth + 1):
        piece = eng.critical_piece(ci, m)
        if fixed_point_gap(puzzle, piece, resolution) >= GAP_CELLS:
            return piece
    raise CheckFailed(f"every critical piece to depth {max_depth} touches a separating fixed point",
                      clause="fixed-point-free-closure")


def find_w_piece(puzzle, ci=0, max_steps=32, resolution=None, central_bound=CENTRAL_BOUND):
    """Critical piece W whose central return domain is compactly contained
    in W (raster gap of at least two cells) and whose first return map is
    not renormalizable at the horizon."""
    check_fitted(puzzle, "engine_")
    resolution = resolution or puzzle.resolution
    piece = _clear_piece(puzzle, ci, resolution, max_steps)
    descent = []
    run, prev = 0, None
    for _ in range(max_steps):
        try:
            s, central = first_entry(puzzle, ci, 0, piece)
        except HorizonExhausted as exc:
            raise InvalidArgument(
                f"critical point {ci} does not return to its depth-{piece.depth} piece "
                f"within horizon {exc.horizon}: not puzzle-recurrent") from exc
        descent.append((piece.depth, s))
        gap = containment_gap(puzzle, central, piece, resolution)
        if gap >= GAP_CELLS:
            period, witness, h = renormalization_scan(puzzle, piece, ci)
            if period is not None and period > 1 and witness is None:
                raise RenormalizationDetected(
                    f"critical point {ci} returns to the depth-{piece.depth} piece every "
                    f"{period} iterates up to horizon {h}", period=period, depth=piece.depth)
            return WPiece(piece, ci, s, int(gap), resolution, tuple(descent))
        run = run + 1 if s == prev else 1
        prev = s
        if run >= central_bound and s > 1:
            raise RenormalizationDetected(
                f"{run} consecutive central returns of period {s} from depth {piece.depth}",
                period=s, depth=piece.depth)
        piece = central
    raise CheckFailed(f"no compactly contained central return within {max_steps} steps",
                      clause="compact-containment")


# --- the box mapping -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UComponent:
    piece: object
    target: int             # index into V
    iterates: int
    home: int               # the V component containing it
    branch: int = 0


@dataclass(eq=False)
class BoxMapping:
    V: list
    U: list
    critical_assignment: dict
    b: int
    resolution: int
    horizon: int
    n_pc: int
    audit: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    puzzle: object = field(default=None, repr=False)
    truncated: int = 0

    @property
    def transfer(self):
        return {i: (u.target, u.iterates) for i, u in enumerate(self.U)}

    def to_json(self):
        return {
            "b": self.b,
            "resolution": self.resolution,
            "horizon": self.horizon,
            "n_pc": self.n_pc,
            "V": [p.to_json(self.resolution) for p in self.V],
            "U": [{**u.piece.to_json(self.resolution), "home": u.home, "target": u.target,
                   "iterates": u.iterates, "branch": u.branch} for u in self.U],
            "critical_assignment": {str(k): v for k, v in self.critical_assignment.items()},
            "audit": self.audit,
            "notes": list(self.notes),
            "truncated_components": self.truncated,
        }


def _contains(eng, piece, ref):
    return eng.contains_orbit_point(piece, *ref)


def _overlap(eng, p, q):
    """Puzzle pieces are nested or disjoint: they meet iff the deeper one's
    anchor lies in the shallower one."""
    if p.depth > q.depth:
        p, q = q, p
    return _contains(eng, p, q.ref)


def _branch_key(piece, home):
    # angular order about the anchor of V, measured from the positive real
    # direction; the central component comes first
    w = complex(piece.anchor) - complex(home.anchor)
    if abs(w) == 0:
        return (-1.0, 0.0)
    return (cmath.phase(w) % (2 * math.pi), abs(w))


class _Returns:
    """Sorted visit times of each critical orbit to each V component."""

    def __init__(self, puzzle, V):
        eng = puzzle.engine_
        self.eng = eng
        self.V = V
        self.visits = {}
        for ci in range(len(eng.crit)):
            for vi, v in enumerate(V):
                h = eng.horizon(ci)
                stop = h - v.depth + 1
                hits = eng.orbit_hits(v, ci, 0, stop) if stop > 0 else []
                self.visits[ci, vi] = hits
        self.limit = {ci: eng.horizon(ci) for ci in range(len(eng.crit))}

    def home_of(self, ci, t):
        for vi in range(len(self.V)):
            hits = self.visits[ci, vi]
            k = bisect.bisect_left(hits, t)
            if k < len(hits) and hits[k] == t:
                return vi
        return None

    def next_visit(self, ci, t):
        best = None
        for vi in range(len(self.V)):
            hits = self.visits[ci, vi]
            k = bisect.bisect_right(hits, t)
            if k < len(hits) and (best is None or hits[k] < best[0]):
                best = (hits[k], vi)
        return best


def extract_box_mapping(puzzle, resolution=None, max_components=64, orbit_depth=16):
    """First return map to V, V the union of the W pieces of recurrent
    critical points and the entry domains of the others."""
    if not isinstance(puzzle, YoccozPuzzle):
        raise InvalidArgument("extract_box_mapping expects a fitted YoccozPuzzle")
    check_fitted(puzzle, "engine_")
    eng = puzzle.engine_
    resolution = resolution or puzzle.resolution
    ncrit = len(eng.crit)
    notes = []
    V, assign = [], {}
    pending = []
    for ci in range(ncrit):
        if any(_contains(eng, v, (ci, 0)) for v in V):
            continue
        try:
            w = find_w_piece(puzzle, ci, resolution=resolution)
        except InvalidArgument:
            pending.append(ci)
            continue
        V.append(w.piece)
    for ci in pending:
        if any(_contains(eng, v, (ci, 0)) for v in V):
            continue
        entered = False
        for v in list(V):
            try:
                _, dom = first_entry(puzzle, ci, 0, v, hat=True)
            except HorizonExhausted:
                continue
            V.append(dom)
            entered = True
            break
        if not entered:
            notes.append(f"critical point {ci} never enters V at horizon {eng.horizon(ci)}")
    if not V:
        raise InvalidArgument("no recurrent critical point: nothing to induce on")

    returns = _Returns(puzzle, V)
    U, seen = [], {}

    def add(ci, t):
        vi = returns.home_of(ci, t)
        nxt = returns.next_visit(ci, t)
        if vi is None or nxt is None:
            return None
        t2, target = nxt
        k = t2 - t
        depth = V[target].depth + k
        if t + depth > eng.horizon(ci):
            return None
        for ui, u in enumerate(U):
            if u.home == vi and u.iterates == k and u.piece.depth == depth \
                    and _contains(eng, u.piece, (ci, t)):
                return ui
        piece = eng.orbit_piece(ci, t, depth)
        U.append(UComponent(piece, target, k, vi))
        return len(U) - 1

    truncated = 0
    for ci in range(ncrit):
        t = 0
        for _ in range(orbit_depth + 1):
            if returns.home_of(ci, t) is None:
                break
            ui = add(ci, t)
            if ui is None:
                break
            t += U[ui].iterates
    for ci in range(ncrit):
        for t in range(1, min(eng.n_pc, eng.horizon(ci)) + 1):
            if returns.home_of(ci, t) is None:
                continue
            if len(U) >= max_components:
                truncated += 1
                continue
            add(ci, t)
    for ci in range(ncrit):
        vi = returns.home_of(ci, 0)
        ui = next((i for i, u in enumerate(U) if u.home == vi and _contains(eng, u.piece, (ci, 0))),
                  None)
        assign[ci] = {"V": vi, "U": ui}
    if truncated:
        notes.append(f"{truncated} postcritical visits beyond the {max_components}-component cap")

    # branch indices per V component
    ordered = []
    for vi, v in enumerate(V):
        mine = sorted((i for i, u in enumerate(U) if u.home == vi),
                      key=lambda i: _branch_key(U[i].piece, v))
        for rank, i in enumerate(mine):
            ordered.append((i, rank))
    for i, rank in ordered:
        u = U[i]
        U[i] = UComponent(u.piece, u.target, u.iterates, u.home, rank)

    bm = BoxMapping(V, U, assign, ncrit, resolution, min(eng.horizon(ci) for ci in range(ncrit)),
                    eng.n_pc, notes=notes, puzzle=puzzle, truncated=truncated)
    bm.audit = audit_box_mapping(bm)
    return bm


def audit_box_mapping(bm):
    """The four clauses of the box-mapping definition; raises CheckFailed
    naming the first violated clause."""
    puzzle = bm.puzzle
    eng = puzzle.engine_
    res = bm.resolution
    audit = {"resolution": res}

    audit["finitely_many_critical_points"] = len(eng.crit)

    for a in range(len(bm.V)):
        for b in range(a + 1, len(bm.V)):
            if _overlap(eng, bm.V[a], bm.V[b]):
                raise CheckFailed(f"V components {a} and {b} intersect", clause="V-disjoint")
    audit["V_disjoint"] = True

    gaps = []
    for vi, v in enumerate(bm.V):
        mine = [u for u in bm.U if u.home == vi]
        for i, u in enumerate(mine):
            if u.piece.depth == v.depth and _contains(eng, u.piece, v.ref):
                continue            # U component equal to V
            gap = containment_gap(puzzle, u.piece, v, res)
            gaps.append(int(gap))
            if gap < GAP_CELLS:
                raise CheckFailed(f"U component at depth {u.piece.depth} is not compactly "
                                  f"contained in V component {vi} (gap {gap} cells)",
                                  clause="U-compactly-contained")
            for w in mine[i + 1:]:
                if _overlap(eng, u.piece, w.piece):
                    raise CheckFailed("two U components meet", clause="U-closures-disjoint")
    audit["min_gap_cells"] = min(gaps) if gaps else None
    audit["U_compactly_contained"] = True
    audit["U_closures_disjoint"] = True

    for ui, u in enumerate(bm.U):
        ci, t = u.piece.ref
        if not eng.contains_orbit_point(bm.V[u.target], ci, t + u.iterates):
            raise CheckFailed(f"U component {ui} does not map into its target",
                              clause="F-maps-onto-V")
    audit["F_maps_onto_V"] = True
    audit["critical_per_component"] = [
        sum(1 for ci in range(len(eng.crit)) if _contains(eng, v, (ci, 0))) for v in bm.V]
    return audit


# --- verdicts --------------------------------------------------------------------

@dataclass(frozen=True)
class RenormalizationVerdict:
    critical: int
    verdict: str
    period: int | None
    depth: int | None
    witness: int | None
    horizon: int
    degenerate: bool = False
    scans: tuple = ()

    def to_json(self):
        return {"critical": self.critical, "verdict": self.verdict, "period": self.period,
                "depth": self.depth, "witness": self.witness, "horizon": self.horizon,
                "degenerate": self.degenerate,
                "scans": [list(s) for s in self.scans]}


def _puzzle_of(obj):
    if isinstance(obj, BoxMapping):
        return obj.puzzle
    if isinstance(obj, YoccozPuzzle):
        check_fitted(obj, "engine_")
        return obj
    raise InvalidArgument("expected a BoxMapping or a fitted YoccozPuzzle")


def is_renormalizable(boxmap, horizon=None, depth_cap=DEPTH_CAP):
    """Per critical point: renormalizable at the horizon when some critical
    piece W of depth <= depth_cap has first return time s > 1 and every
    f^{ks}(c), ks <= horizon, lies in W."""
    puzzle = _puzzle_of(boxmap)
    eng = puzzle.engine_
    out = []
    for ci in range(len(eng.crit)):
        h = eng.horizon(ci) if horizon is None else min(horizon, eng.horizon(ci))
        if h <= 0:
            out.append(RenormalizationVerdict(ci, RENORMALIZABLE, None, None, None, h, True))
            continue
        scans = []
        found = None
        witness = None
        for m in range(0, depth_cap + 1):
            if m >= h:
                break
            W = eng.critical_piece(ci, m)
            s, k, _ = renormalization_scan(puzzle, W, ci, h)
            scans.append((m, s, k))
            if s is None:
                continue
            if k is None and s > 1:
                found = (s, m)
            elif k is not None and witness is None:
                witness = (s, m, k)
        if found:
            out.append(RenormalizationVerdict(ci, RENORMALIZABLE, found[0], found[1], None, h,
                                              scans=tuple(scans)))
        else:
            s, m, k = witness if witness else (None, None, None)
            out.append(RenormalizationVerdict(ci, NON_RENORMALIZABLE, s, m, k, h,
                                              scans=tuple(scans)))
    return out


@dataclass(frozen=True)
class PersistenceVerdict:
    critical: int
    verdict: str
    depths: tuple
    horizon: int
    degenerate: bool = False
    witness_depth: int | None = None

    def to_json(self):
        return {"critical": self.critical, "verdict": self.verdict, "depths": list(self.depths),
                "horizon": self.horizon, "degenerate": self.degenerate,
                "witness_depth": self.witness_depth}


def persistently_recurrent(boxmap, ci=0, horizon=None, levels=3):
    """Follow P -> Γ(P) from the critical piece of V (or of depth 0).  A piece
    with no return of c inside the horizon witnesses non-persistence."""
    from .puzzle import smallest_successor

    puzzle = _puzzle_of(boxmap)
    eng = puzzle.engine_
    h = eng.horizon(ci) if horizon is None else min(horizon, eng.horizon(ci))
    if h <= 0:
        return PersistenceVerdict(ci, PERSISTENT, (), h, True)
    if isinstance(boxmap, BoxMapping) and boxmap.critical_assignment.get(ci, {}).get("V") is not None:
        piece = boxmap.V[boxmap.critical_assignment[ci]["V"]]
        if piece.ref != (ci, 0):
            piece = eng.critical_piece(ci, piece.depth)
    else:
        piece = eng.critical_piece(ci, 0)
    depths = [piece.depth]
    for _ in range(levels):
        if piece.depth >= h:
            break
        try:
            piece = smallest_successor(puzzle, piece, ci, h)
        except HorizonExhausted:
            return PersistenceVerdict(ci, NOT_PERSISTENT, tuple(depths), h,
                                      witness_depth=piece.depth)
        depths.append(piece.depth)
    return PersistenceVerdict(ci, PERSISTENT, tuple(depths), h)


# --- combinatorics ----------------------------------------------------------------

@dataclass(frozen=True)
class ItineraryTree:
    """Trie of F-itineraries: each word lists (V index, branch index) of the
    U components visited by successive F-iterates."""
    depth: int
    words: tuple

    def nodes(self):
        out = set()
        for w in self.words:
            for n in range(1, len(w) + 1):
                out.add(w[:n])
        return out

    def __eq__(self, other):
        return isinstance(other, ItineraryTree) and self.nodes() == other.nodes()

    def __hash__(self):
        return hash(frozenset(self.nodes()))


def f_itinerary(bm, ci, length):
    """(V, branch) labels of F^k(c), k < length; stops early when the orbit
    leaves U within the horizon."""
    eng = bm.puzzle.engine_
    returns = _Returns(bm.puzzle, bm.V)
    out = []
    t = 0
    for _ in range(length):
        vi = returns.home_of(ci, t)
        if vi is None:
            break
        hit = None
        for u in bm.U:
            if u.home == vi and _contains(eng, u.piece, (ci, t)):
                hit = u
                break
        if hit is None:
            out.append((vi, None))
            break
        out.append((vi, hit.branch))
        t += hit.iterates
    return tuple(out)


def itinerary_tree(bm, ci, k, depth):
    word = f_itinerary(bm, ci, k + depth + 1)
    return ItineraryTree(depth, (word[k:k + depth + 1],))


@dataclass(frozen=True)
class EquivalenceResult:
    equivalent: bool
    divergence: tuple | None = None
    reason: str = ""

    def __bool__(self):
        return self.equivalent


def combinatorially_equivalent(bm1, bm2, matching=None, depth=10):
    """Compare the itinerary trees of F^k(c) and F̃^k(c̃) for all k, n <= depth."""
    if len(bm1.V) != len(bm2.V) or bm1.b != bm2.b:
        return EquivalenceResult(False, None, "component counts differ")
    matching = matching or {ci: ci for ci in range(bm1.b)}
    for c1, c2 in matching.items():
        w1 = f_itinerary(bm1, c1, 2 * depth + 1)
        w2 = f_itinerary(bm2, c2, 2 * depth + 1)
        for k in range(depth + 1):
            for n in range(depth + 1):
                a, b = w1[k:k + n + 1], w2[k:k + n + 1]
                if a != b:
                    return EquivalenceResult(False, (k, n), f"critical pair {c1}/{c2}")
    return EquivalenceResult(True)
