"""The depth-0 puzzle partition: rays landing at separating fixed points cut
the region {G < h0} into sectors.

Labelling is done against a fine lookup raster of the sector polygons plus a
distance map to the boundary, so each query is an array lookup.  Points
within ``eps_tube`` of a boundary ray or of the equipotential are reported
as ambiguous, never guessed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage
from scipy.spatial import cKDTree

from .angles import RationalAngle
from .errors import (BoundaryAmbiguity, ConvergenceError, OutsidePartition,
                     UnsupportedConfiguration)
from .poly import (_newton_ray_point, bottcher_radius, descend, equipotential_curve,
                   green_array, potential_schedule)
from .raster import Grid
from .rays import LANDING_FLOOR, landing_point, separating_fixed_cycles

OUTSIDE = -1
AMBIGUOUS = -2
TUBE_CELLS = 2
H0_LADDER = tuple(2.0 ** -k for k in range(11))


@dataclass(frozen=True, eq=False)
class Sector:
    label: int
    code: tuple
    arcs: tuple          # angular arcs (lo, hi) at infinity, as RationalAngle pairs

    def to_json(self):
        return {"label": self.label, "arcs": [[str(a), str(b)] for a, b in self.arcs]}


@dataclass(eq=False)
class BasePartition:
    poly: object
    h0: float
    separating: tuple                   # ((point, (angles...)), ...)
    rays: dict                          # angle -> polyline from potential h0 to landing
    equipotential: np.ndarray
    sectors: tuple
    grid: Grid                          # comparison grid
    eps_tube: float
    _lookup: np.ndarray = field(repr=False, default=None)
    _dist: np.ndarray = field(repr=False, default=None)
    _lookup_grid: Grid = field(repr=False, default=None)
    _tree: cKDTree = field(repr=False, default=None)

    @property
    def ray_angles(self):
        return sorted(self.rays)

    @property
    def n_labels(self):
        return len(self.sectors)

    # labelling ------------------------------------------------------------

    def label_array(self, z):
        """Depth-0 labels; OUTSIDE for G >= h0, AMBIGUOUS inside the tube."""
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        z = z.ravel()
        g = self._lookup_grid
        n = g.resolution
        col = np.floor((z.real - g.lo.real) / g.cell).astype(np.int64)
        row = np.floor((z.imag - g.lo.imag) / g.cell).astype(np.int64)
        inside = (col >= 0) & (col < n) & (row >= 0) & (row < n) & np.isfinite(z)
        out = np.full(z.shape, OUTSIDE, dtype=np.int64)
        r, c = row[inside], col[inside]
        lab = self._lookup[r, c].astype(np.int64)
        dist = self._dist[r, c]
        # lookup distances are exact to about a cell; refine the borderline band
        near = dist < self.eps_tube + 2.0 * g.cell
        if np.any(near):
            idx = np.flatnonzero(near)
            d_exact, _ = self._tree.query(z[inside][idx])
            amb = d_exact < self.eps_tube
            lab[idx[amb]] = AMBIGUOUS
        out[inside] = lab
        return out.reshape(shape)

    def label(self, z):
        lab = int(self.label_array(np.array([z]))[0])
        if lab == OUTSIDE:
            raise OutsidePartition(f"{z} lies outside the depth-0 partition")
        if lab == AMBIGUOUS:
            raise BoundaryAmbiguity(f"{z} lies inside the boundary tube", step=0, point=z)
        return lab

    def distance_to_boundary(self, z):
        return self._tree.query(np.atleast_1d(np.asarray(z, dtype=complex)))[0]

    def distance_below(self, z, level):
        """Distance to the part of the boundary rays with potential < level."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        pts = []
        for a in self.ray_angles:
            line = self.rays[a]
            g = green_array(self.poly, line)[0]
            pts.append(line[g < level])
        pts = np.concatenate(pts)
        if z.size == 0 or pts.size == 0:
            return np.full(z.shape, np.inf)
        return np.abs(z[:, None] - pts[None, :]).min(axis=1)

    def boundary_polylines(self):
        return [self.rays[a] for a in self.ray_angles] + [np.append(self.equipotential,
                                                                    self.equipotential[:1])]

    def to_json(self):
        return {"h0": self.h0,
                "separating": [{"point": [p.real, p.imag], "angles": [str(a) for a in angs]}
                               for p, angs in self.separating],
                "sectors": [s.to_json() for s in self.sectors],
                "eps_tube": self.eps_tube,
                "grid": self.grid.to_json()}


def _ray_polyline(poly, theta, h0, steps=32):
    """Ray of angle theta from potential h0 down to its landing point."""
    t0 = math.log(bottcher_radius(poly))
    upper = descend(poly, theta.fraction, potential_schedule(t0, h0, 8))
    try:
        lower = descend(poly, theta.fraction, potential_schedule(h0, LANDING_FLOOR, steps),
                        z_start=upper[-1])
    except ConvergenceError as exc:
        if not exc.partial:
            raise
        lower = exc.partial
    land, ok = landing_point(poly, theta)
    pts = list(lower)
    if ok:
        pts.append(land)
    return np.array(pts)


def _arc_points(curve, a, b):
    """Equipotential samples with external angle strictly inside the ccw arc (a, b)."""
    m = len(curve)
    phis = np.arange(m) / m
    lo, hi = float(a), float(b)
    if lo < hi:
        sel = np.flatnonzero((phis > lo) & (phis < hi))
    else:
        sel = np.concatenate([np.flatnonzero(phis > lo), np.flatnonzero(phis < hi)])
    return curve[sel]


def _densify(line, step):
    line = np.asarray(line)
    out = [line[:1]]
    for a, b in zip(line[:-1], line[1:]):
        k = max(1, int(math.ceil(abs(b - a) / step)))
        out.append(a + (b - a) * (np.arange(1, k + 1) / k))
    return np.concatenate(out)


def _wedge_index(theta, angles):
    """j with theta in the ccw arc (angles[j], angles[j+1])."""
    k = len(angles)
    for j in range(k):
        a, b = angles[j].fraction, angles[(j + 1) % k].fraction
        t = theta
        if a < b:
            if a < t < b:
                return j
        elif t > a or t < b:
            return j
    raise ValueError("angle on a boundary ray")


def build_base_partition(poly, h0=None, resolution=512, pc_points=None,
                         equipotential_samples=4096, lookup_factor=4):
    """Depth-0 partition by the rays at separating fixed points and the
    equipotential G = h0.  When ``h0`` is None the largest level of the
    ladder 1, 1/2, 1/4, ... whose tubes avoid ``pc_points`` is used."""
    seps = separating_fixed_cycles(poly)
    if not seps:
        raise UnsupportedConfiguration("no separating fixed point found")
    ladder = H0_LADDER if h0 is None else (float(h0),)
    last_err = None
    for level in ladder:
        base = _build(poly, level, seps, resolution, equipotential_samples, lookup_factor)
        if pc_points is None or len(pc_points) == 0:
            return base
        d = base.distance_to_boundary(np.asarray(pc_points))
        if np.all(d >= base.eps_tube):
            return base
        k = int(np.argmin(d))
        last_err = BoundaryAmbiguity(
            f"postcritical point {pc_points[k]:.6g} within {d[k]:.3g} of the boundary at h0={level}",
            point=complex(pc_points[k]))
        # lowering h0 only removes the outer part of the rays; stop when the
        # conflict is with the part that stays
        bad = np.asarray(pc_points)[d < base.eps_tube]
        if np.any(base.distance_below(bad, level / 2) < base.eps_tube):
            break
    raise last_err


def _build(poly, h0, seps, resolution, samples, lookup_factor):
    rays = {}
    for _, angles in seps:
        for a in angles:
            rays[a] = _ray_polyline(poly, a, h0)
    curve = equipotential_curve(poly, h0, samples)

    # comparison grid: square box around the equipotential, 2% padding
    lo = complex(curve.real.min(), curve.imag.min())
    hi = complex(curve.real.max(), curve.imag.max())
    centre = (lo + hi) / 2
    half = 1.02 * max(hi.real - lo.real, hi.imag - lo.imag) / 2
    grid = Grid.square(centre, half, resolution)
    eps = TUBE_CELLS * grid.cell
    lres = min(4096, lookup_factor * resolution)
    lgrid = Grid.square(centre, half, lres)

    # sectors: distinct tuples of wedge indices over the gaps between all angles
    all_angles = sorted(rays)
    per_point = [sorted(angles) for _, angles in seps]
    codes, arcs = [], {}
    for i, a in enumerate(all_angles):
        b = all_angles[(i + 1) % len(all_angles)]
        mid = (a.fraction + ((b.fraction - a.fraction) % 1 or 1) / 2) % 1
        code = tuple(_wedge_index(mid, angs) for angs in per_point)
        if code not in arcs:
            codes.append(code)
            arcs[code] = []
        arcs[code].append((a, b))
    sectors = tuple(Sector(k, code, tuple(arcs[code])) for k, code in enumerate(codes))
    code_to_label = {s.code: s.label for s in sectors}

    # rasterise each wedge of each separating point
    def to_px(pts):
        return [((p.real - lgrid.lo.real) / lgrid.cell, (p.imag - lgrid.lo.imag) / lgrid.cell)
                for p in pts]

    wedge_maps = []
    for angs in per_point:
        img = Image.new("I", (lres, lres), 0)
        draw = ImageDraw.Draw(img)
        k = len(angs)
        for j in range(k):
            a, b = angs[j], angs[(j + 1) % k]
            poly_pts = np.concatenate([rays[a][::-1], _arc_points(curve, a, b), rays[b]])
            draw.polygon(to_px(poly_pts), fill=j + 1)
        wedge_maps.append(np.asarray(img, dtype=np.int64) - 1)
    lookup = np.full((lres, lres), OUTSIDE, dtype=np.int64)
    valid = np.all([w >= 0 for w in wedge_maps], axis=0)
    radices = [len(a) for a in per_point]
    table = {}
    for code, lab in code_to_label.items():
        key = 0
        for r, c in zip(radices, code):
            key = key * r + c
        table[key] = lab
    key = np.zeros((lres, lres), dtype=np.int64)
    for r, w in zip(radices, wedge_maps):
        key = key * r + np.maximum(w, 0)
    lut = np.full(int(np.prod(radices)), AMBIGUOUS, dtype=np.int64)
    for k_, lab in table.items():
        lut[k_] = lab
    lookup[valid] = lut[key[valid]]

    # boundary distance map and an exact KD-tree of the densified boundary
    polylines = [rays[a] for a in all_angles] + [np.append(curve, curve[:1])]
    bimg = Image.new("L", (lres, lres), 0)
    bdraw = ImageDraw.Draw(bimg)
    for line in polylines:
        bdraw.line(to_px(line), fill=1, width=1)
    boundary = np.asarray(bimg, dtype=bool)
    dist = ndimage.distance_transform_edt(~boundary) * lgrid.cell
    dense = np.concatenate([_densify(line, eps / 8) for line in polylines])
    tree = cKDTree(np.column_stack([dense.real, dense.imag]))

    base = BasePartition(poly, h0, tuple((p, tuple(a)) for p, a in seps), rays, curve,
                         sectors, grid, eps)
    base._lookup = lookup
    base._dist = dist
    base._lookup_grid = lgrid
    base._tree = _ComplexTree(tree)
    return base


class _ComplexTree:
    def __init__(self, tree):
        self.tree = tree

    def query(self, z):
        z = np.atleast_1d(z)
        return self.tree.query(np.column_stack([z.real, z.imag]))


def depth0_label(poly, base, z):
    return base.label(z)


def sector_of_angle(base, theta):
    """Label of the sector containing the external angle theta at infinity."""
    t = RationalAngle(theta).fraction
    for s in base.sectors:
        for a, b in s.arcs:
            if a.fraction < b.fraction:
                if a.fraction < t < b.fraction:
                    return s.label
            elif t > a.fraction or t < b.fraction:
                return s.label
    raise BoundaryAmbiguity(f"angle {theta} is a boundary ray")
