"""External rays: Newton continuation from near infinity, landing detection and
the search for separating fixed points."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .angles import RationalAngle, angle_orbit, periodic_angles
from .errors import ConvergenceError, InvalidArgument, UnsupportedConfiguration
from .poly import bottcher_radius, descend, evaluate, potential_schedule

STEPS_PER_HALVING = 8
LANDING_FLOOR = 1e-13
LANDING_TOL = 1e-6
TAIL_HALVINGS = 10


@dataclass(frozen=True, eq=False)
class ExternalRay:
    angle: RationalAngle
    trace: np.ndarray
    potentials: np.ndarray
    landing_point: complex | None
    landing_converged: bool
    final_potential: float

    def to_json(self):
        return {"angle": str(self.angle),
                "points": [[z.real, z.imag] for z in self.trace],
                "landing": None if self.landing_point is None
                else [self.landing_point.real, self.landing_point.imag]}


def start_potential(poly):
    return math.log(bottcher_radius(poly))


def _tail_landing(trace, tol):
    tail = trace[-(TAIL_HALVINGS * STEPS_PER_HALVING + 1):]
    if len(tail) < TAIL_HALVINGS * STEPS_PER_HALVING + 1:
        return complex(trace[-1]), False
    diam = max(abs(tail - tail[-1]).max(), abs(tail - tail[0]).max())
    # deepest point, not the average: the average is biased toward the start
    return complex(tail[-1]), bool(diam < tol)


@lru_cache(maxsize=4096)
def _trace_cached(poly, theta, target, steps):
    sched = potential_schedule(start_potential(poly), target, steps)
    pts = descend(poly, theta, sched)
    return np.array(pts), sched[:len(pts)]


def trace_ray(poly, theta, target_potential, steps_per_halving=STEPS_PER_HALVING,
              tol=LANDING_TOL):
    """Trace the ray of angle ``theta`` from the Boettcher circle down to
    ``target_potential``.  Raises ConvergenceError (with the partial trace)
    if Newton loses the ray."""
    if target_potential <= 0:
        raise InvalidArgument("target potential must be positive")
    theta = RationalAngle(theta)
    t0 = start_potential(poly)
    if target_potential >= t0:
        raise InvalidArgument("target potential above the starting circle")
    pts, pots = _trace_cached(poly, theta, float(target_potential), steps_per_halving)
    land, ok = _tail_landing(pts, tol)
    return ExternalRay(theta, pts, pots, land if ok else None, ok, float(pots[-1]))


def _polish_periodic(poly, theta, trace, tol):
    """Landing point of a periodic ray by Newton on f^q(z) = z from the
    deepest trace point.  Needed near weakly repelling points, where the ray
    closes in only a few percent per halving.  Accepted when the point is
    repelling and the tail contracts toward it at every halving."""
    pre, q, _ = angle_orbit(theta, poly.degree)
    if pre or len(trace) < TAIL_HALVINGS * STEPS_PER_HALVING + 1:
        return None
    z = complex(trace[-1])
    for _ in range(60):
        w, dw = z, 1 + 0j
        for _ in range(q):
            dw *= poly.derivative(w)
            w = evaluate(poly, w)
        if dw == 1:
            return None
        step = (w - z) / (dw - 1)
        z -= step
        if abs(step) < 1e-15 * max(1.0, abs(z)):
            break
    else:
        return None
    if abs(dw) <= 1:
        return None
    tail = trace[-(TAIL_HALVINGS * STEPS_PER_HALVING + 1)::STEPS_PER_HALVING]
    dist = np.abs(tail - z)
    if not (np.all(np.diff(dist) < 0) and dist[-1] < 0.5 * dist[0]):
        return None
    return z


@lru_cache(maxsize=4096)
def landing_point(poly, theta, tol=LANDING_TOL):
    """Return (point, converged).  The point is the deepest trace point; it
    is only flagged converged when the last ten halvings of potential move it
    by less than ``tol``, or, for a periodic angle, when the tail contracts
    toward a repelling periodic point found by Newton."""
    theta = RationalAngle(theta)
    try:
        ray = trace_ray(poly, theta, LANDING_FLOOR, tol=tol)
        if ray.landing_converged:
            return ray.landing_point, True
        z = _polish_periodic(poly, theta, ray.trace, tol)
        return (complex(ray.trace[-1]), False) if z is None else (z, True)
    except ConvergenceError as exc:
        if not exc.partial:
            return complex("nan"), False
        pts = np.array(exc.partial)
        land, ok = _tail_landing(pts, tol)
        return land, ok


def rays_land_together(poly, t1, t2, tol=LANDING_TOL):
    z1, ok1 = landing_point(poly, RationalAngle(t1), tol)
    z2, ok2 = landing_point(poly, RationalAngle(t2), tol)
    return ok1 and ok2 and abs(z1 - z2) < 10 * tol


def repelling_fixed_points(poly, tol=1e-9):
    out = []
    for z in poly.fixed_points():
        lam = poly.derivative(z)
        if abs(lam) <= 1 + tol:
            raise UnsupportedConfiguration(
                f"fixed point {z:.6g} has multiplier {lam:.6g}; only repelling fixed points are supported")
        out.append((z, lam))
    return out


def separating_fixed_cycles(poly, max_rays=1024, tol=LANDING_TOL):
    """Fixed points with at least two periodic rays landing, with the landing
    angles sorted.  Periods are tried in increasing order; all rays landing at
    a fixed point share one period, so each point is settled by the first
    period that reaches it."""
    fixed = repelling_fixed_points(poly)
    d = poly.degree
    found = {}
    period = 1
    while len(found) < len(fixed) and d ** period - 1 <= max_rays:
        hits = {}
        for cycle in periodic_angles(d, period):
            z, ok = landing_point(poly, cycle[0], tol)
            if not ok:
                continue
            dist = [abs(z - fz) for fz, _ in fixed]
            k = int(np.argmin(dist))
            if dist[k] < 100 * tol and k not in found:
                hits.setdefault(k, []).extend(cycle)
        for k, angles in hits.items():
            found[k] = sorted(angles)
        period += 1
    out = [(fixed[k][0], angles) for k, angles in sorted(found.items()) if len(angles) >= 2]
    out.sort(key=lambda t: (t[0].real, t[0].imag))
    return out


def write_rays_jsonl(rays, fh):
    for ray in rays:
        fh.write(json.dumps(ray.to_json()) + "\n")


def read_rays_jsonl(fh):
    out = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        pts = np.array([complex(a, b) for a, b in rec["points"]])
        land = rec.get("landing")
        out.append(ExternalRay(RationalAngle(rec["angle"]), pts, np.full(len(pts), np.nan),
                               None if land is None else complex(*land), land is not None,
                               float("nan")))
    return out
