"""Monic centred polynomials: evaluation, critical points, Green's function
and equipotentials.

Polynomials are kept in the normal form ``z**d + a2 z**(d-2) + ... + ad``.
Coefficients are stored in descending order, leading ``1`` first.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConvergenceError, InvalidArgument

TOL_ROOT = 1e-9
ITERATION_CAP = 4096
# |z| past which log|z| / d**n is exact to well below 1e-30
_LOG_STOP = 1e20


@dataclass(frozen=True)
class Potential:
    value: float
    escape_iterations: int
    escaping: bool


@dataclass(frozen=True, eq=False)
class Polynomial:
    coefficients: tuple
    critical_points: tuple = field(init=False, repr=False)
    # optional decimal strings for the real coefficients, used by the
    # high-precision real-line engine; the double coefficients are derived
    exact: tuple | None = None

    def __post_init__(self):
        if self.exact is not None:
            exact = tuple(str(a) for a in self.exact)
            if len(exact) != len(self.coefficients):
                raise InvalidArgument("exact coefficient list has the wrong length")
            object.__setattr__(self, "exact", exact)
            object.__setattr__(self, "coefficients", tuple(float(a) for a in exact))
        coeffs = tuple(complex(a) for a in self.coefficients)
        if len(coeffs) < 3:
            raise InvalidArgument("degree must be at least 2")
        if abs(coeffs[0] - 1) > 1e-14:
            raise InvalidArgument("polynomial must be monic")
        if abs(coeffs[1]) > 1e-14:
            raise InvalidArgument("z**(d-1) coefficient must vanish (centred form)")
        coeffs = (1 + 0j, 0j) + coeffs[2:]
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "critical_points", tuple(_critical_points(coeffs)))

    # construction -----------------------------------------------------------

    @classmethod
    def quadratic(cls, c):
        """z**2 + c.  A string c is kept as an exact decimal."""
        if isinstance(c, str):
            return cls((1.0, 0.0, float(c)), exact=("1", "0", c))
        return cls((1, 0, c))

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        coeffs = [complex(re, im) for re, im in data["coeffs"]]
        poly = cls(coeffs, exact=data.get("exact"))
        if data.get("degree", poly.degree) != poly.degree:
            raise InvalidArgument("degree field does not match coefficient list")
        return poly

    def to_json(self):
        out = {"degree": self.degree,
               "coeffs": [[a.real, a.imag] for a in self.coefficients]}
        if self.exact is not None:
            out["exact"] = list(self.exact)
        return out

    def __eq__(self, other):
        return (isinstance(other, Polynomial) and self.coefficients == other.coefficients
                and self.exact == other.exact)

    def __hash__(self):
        return hash((self.coefficients, self.exact))

    # basic data -------------------------------------------------------------

    @property
    def degree(self):
        return len(self.coefficients) - 1

    @property
    def b(self):
        """Number of distinct critical points."""
        return len(self.critical_points)

    @property
    def is_real(self):
        return all(abs(a.imag) == 0.0 for a in self.coefficients)

    @property
    def escape_radius(self):
        return max(4.0, 2.0 * sum(abs(a) for a in self.coefficients[1:]))

    def __call__(self, z):
        return evaluate(self, z)

    def derivative(self, z):
        d = self.degree
        acc = 0 * np.asarray(z, dtype=complex) + d
        for k, a in enumerate(self.coefficients[1:-1], start=1):
            acc = acc * z + (d - k) * a
        return acc if np.ndim(acc) else complex(acc)

    def orbit(self, z, n):
        out = np.empty(n + 1, dtype=complex)
        out[0] = z
        for k in range(n):
            out[k + 1] = evaluate(self, out[k])
        return out

    def fixed_points(self):
        coeffs = np.array(self.coefficients)
        coeffs[-2] -= 1
        roots = np.roots(coeffs)
        return [_newton_polish(lambda w: evaluate(self, w) - w,
                               lambda w: self.derivative(w) - 1, r) for r in roots]

    def __repr__(self):
        terms = " + ".join(f"({a:.6g})z^{self.degree - k}"
                           for k, a in enumerate(self.coefficients) if a != 0)
        return f"Polynomial({terms})"


def evaluate(poly, z):
    """Horner evaluation; accepts scalars or numpy arrays."""
    acc = np.ones_like(z, dtype=complex) if np.ndim(z) else 1 + 0j
    for a in poly.coefficients[1:]:
        acc = acc * z + a
    return acc


def critical_points(poly):
    return list(poly.critical_points)


def _derivative_coeffs(coeffs, order=1):
    c = np.array(coeffs, dtype=complex)
    for _ in range(order):
        n = len(c) - 1
        c = c[:-1] * np.arange(n, 0, -1)
    return c


def _newton_polish(f, df, z, iters=50):
    for _ in range(iters):
        dz = df(z)
        if dz == 0:
            break
        step = f(z) / dz
        z = z - step
        if abs(step) <= 1e-16 * max(1.0, abs(z)):
            break
    return complex(z)


def _critical_points(coeffs):
    dcoef = _derivative_coeffs(coeffs)
    roots = np.roots(dcoef)
    # cluster the companion eigenvalues; multiple roots come back split by
    # roughly eps**(1/m), so the clustering radius is far looser than TOL_ROOT
    clusters = []
    for r in sorted(roots, key=lambda w: (round(w.real, 6), round(w.imag, 6))):
        for cl in clusters:
            if abs(cl[0] - r) < 1e-5 * max(1.0, abs(r)):
                cl.append(r)
                break
        else:
            clusters.append([r])
    out = []
    for cl in clusters:
        m = len(cl)
        centre = complex(np.mean(cl))
        # a root of f' of multiplicity m is a simple root of f^(m)
        hc = _derivative_coeffs(coeffs, m)
        dhc = _derivative_coeffs(hc)
        if len(dhc) == 0:
            z = centre
        else:
            z = _newton_polish(lambda w: np.polyval(hc, w), lambda w: np.polyval(dhc, w), centre)
        if abs(np.polyval(dcoef, z)) > TOL_ROOT * max(1.0, abs(z)) ** (len(dcoef) - 1):
            raise ConvergenceError(f"critical point refinement failed near {centre}")
        out.append((z, m + 1))
    out.sort(key=lambda t: (t[0].real, t[0].imag))
    return out


# --- Green's function ------------------------------------------------------

def green_array(poly, z, cap=ITERATION_CAP):
    """Vectorised potential.  Returns (values, escape_iterations); points that
    stay inside the escape radius for ``cap`` iterations get value 0."""
    z = np.array(z, dtype=complex, copy=True)
    shape = z.shape
    z = z.ravel()
    d = poly.degree
    radius = poly.escape_radius
    values = np.zeros(z.shape)
    escape = np.full(z.shape, -1, dtype=int)
    active = np.arange(z.size)
    w = z.copy()
    for n in range(cap + 64):
        if active.size == 0:
            break
        aw = np.abs(w)
        crossed = (aw > radius) & (escape[active] < 0)
        escape[active[crossed]] = n
        done = aw > _LOG_STOP
        if np.any(done):
            values[active[done]] = np.log(aw[done]) / float(d) ** n
            keep = ~done
            active, w = active[keep], w[keep]
        if n >= cap:
            # anything not yet past the escape radius is declared in K
            inside = escape[active] < 0
            active, w = active[~inside], w[~inside]
        w = evaluate(poly, w)
    return values.reshape(shape), escape.reshape(shape)


def green_function(poly, z, tol=1e-12):
    """Potential G(z) = lim log|f^n z| / d^n, accumulated in log scale."""
    if tol <= 0:
        raise InvalidArgument("tol must be positive")
    v, esc = green_array(poly, np.array([z]))
    escaping = bool(esc[0] >= 0)
    return Potential(float(v[0]) if escaping else 0.0, int(esc[0]) if escaping else ITERATION_CAP,
                     escaping)


# --- Boettcher inverse by Newton continuation -----------------------------

def bottcher_radius(poly):
    return max(1e4, 100.0 * poly.escape_radius)


def _level(d, t, log_rb):
    n = 0
    while d ** n * t < log_rb:
        n += 1
    return n


def _newton_ray_point(poly, theta, t, z, log_rb, max_iter=60):
    """Solve f^n(z) = exp(d^n t + 2 pi i d^n theta) for the smallest n with
    d^n t >= log_rb, starting from ``z``."""
    d = poly.degree
    n = _level(d, t, log_rb)
    ang = float((theta * d ** n) % 1)
    target = math.exp(d ** n * t) * complex(math.cos(2 * math.pi * ang), math.sin(2 * math.pi * ang))
    coeffs = poly.coefficients
    prev = math.inf
    for _ in range(max_iter):
        w, dw = z, 1 + 0j
        for _k in range(n):
            # derivative first: it needs the current w
            dacc = d + 0j
            acc = 1 + 0j
            for j, a in enumerate(coeffs[1:], start=1):
                if j < d:
                    dacc = dacc * w + (d - j) * a
                acc = acc * w + a
            dw = dw * dacc
            w = acc
        if dw == 0 or not np.isfinite(w):
            return None
        resid = abs(w - target)
        step = (w - target) / dw
        z = z - step
        if resid <= 1e-13 * abs(target):
            return z
        size = abs(step)
        scale = max(1.0, abs(z))
        if size <= 4e-16 * scale:
            return z
        # rounding floor: steps no longer shrink but are already tiny
        if size < 1e-11 * scale and size > 0.5 * prev:
            return z
        prev = size
    return None


def descend(poly, theta, potentials, z_start=None):
    """Continue the external ray of angle ``theta`` through the (decreasing)
    potentials given.  Returns the list of points, which is shorter than the
    schedule when the ray has already settled to machine precision.  Raises
    ConvergenceError carrying the last good potential and the partial trace
    when Newton loses the ray."""
    theta = Fraction(getattr(theta, "fraction", theta)) % 1
    log_rb = math.log(bottcher_radius(poly))
    t_prev = float(potentials[0])
    if z_start is None:
        z_start = cmath_exp(t_prev, theta)
    z = _newton_ray_point(poly, theta, t_prev, z_start, log_rb)
    if z is None:
        raise ConvergenceError("ray start failed", last_good=None)
    pts = [z]
    last_step = None
    for t in potentials[1:]:
        z_new = _continue(poly, theta, t_prev, float(t), z, log_rb, last_step)
        if z_new is None:
            if last_step is not None and last_step < 1e-12 * max(1.0, abs(z)):
                break
            raise ConvergenceError(f"ray {theta} lost at potential {t_prev:.3g}",
                                   last_good=t_prev, partial=pts)
        last_step = abs(z_new - z)
        z = z_new
        pts.append(z)
        t_prev = float(t)
    return pts


def _continue(poly, theta, t0, t1, z, log_rb, last_step, depth=0):
    z1 = _newton_ray_point(poly, theta, t1, z, log_rb)
    jump_ok = z1 is not None and (last_step is None or abs(z1 - z) <= 4.0 * last_step + 1e-12)
    if jump_ok:
        return z1
    if depth > 24:
        return None
    tm = math.sqrt(t0 * t1)
    zm = _continue(poly, theta, t0, tm, z, log_rb, None if last_step is None else last_step / 2, depth + 1)
    if zm is None:
        return None
    return _continue(poly, theta, tm, t1, zm, log_rb, abs(zm - z), depth + 1)


def cmath_exp(t, theta):
    ang = 2 * math.pi * float(theta)
    return math.exp(t) * complex(math.cos(ang), math.sin(ang))


def potential_schedule(t_start, t_end, steps_per_halving=8):
    k = max(1, math.ceil(steps_per_halving * math.log2(t_start / t_end)))
    return t_start * (t_end / t_start) ** (np.arange(k + 1) / k)


def equipotential_curve(poly, level, samples=1024):
    """Dense closed polyline of {G = level} at external angles k/samples,
    by continuation in the angle from the point on ray 0."""
    if level <= 0:
        raise InvalidArgument("equipotential level must be positive")
    t_start = math.log(bottcher_radius(poly))
    if level >= t_start:
        return np.array([cmath_exp(level, Fraction(k, samples)) for k in range(samples)])
    log_rb = t_start
    d = poly.degree
    n = _level(d, level, log_rb)
    # keep each continuation step below 1/64 turn in the Boettcher plane
    sub = max(1, math.ceil(64 * d ** n / samples))
    z = descend(poly, Fraction(0), potential_schedule(t_start, level))[-1]
    out = [z]
    for k in range(samples * sub):
        phi = Fraction(k + 1, samples * sub)
        z_new = _newton_ray_point(poly, phi, level, z, log_rb)
        if z_new is None:
            raise ConvergenceError(f"equipotential continuation failed at angle {float(phi):.6f}")
        z = z_new
        if (k + 1) % sub == 0:
            out.append(z)
    out = np.array(out[:-1])
    return out


def equipotential(poly, level, samples=64):
    """Points of the level curve {G = level} at external angles k/samples."""
    if samples < 8:
        raise InvalidArgument("need at least 8 samples")
    dense = max(samples, 1024)
    dense = samples * math.ceil(dense / samples)
    curve = equipotential_curve(poly, level, dense)
    return curve[:: dense // samples]
