"""Independent reference computations used by the tests.

None of these call into the package's solvers.  The resistor network puts
unknowns on cell *corners* (the package uses cell centres), so agreement
between the two is a check on the discretization, not a tautology.
"""
import cmath
import math

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve


def green_chebyshev(z):
    """Green's function of z**2 - 2: log|w| with z = w + 1/w, |w| > 1."""
    r = cmath.sqrt(z * z - 4)
    w = (z + r) / 2
    if abs(w) < 1:
        w = (z - r) / 2
    return math.log(abs(w))


def joukowski_landing(theta):
    """Landing point of the ray of angle theta for z**2 - 2."""
    return 2 * math.cos(2 * math.pi * theta)


def round_modulus(r, R):
    return math.log(R / r) / (2 * math.pi)


def disk_in_disk_modulus(a, r):
    """Modulus of D - closed disk(a, r) by a disk automorphism that centres
    the small disk."""
    rho = abs(a)
    if rho == 0:
        return round_modulus(r, 1)
    lo, hi = rho - r, rho + r

    def phi(b, x):
        return (x - b) / (1 - b * x)

    b = brentq(lambda b: phi(b, lo) + phi(b, hi), -0.999999, 0.999999)
    return round_modulus(phi(b, hi), 1)


def resistor_modulus(inside_inner, inside_outer, half_width, n):
    """Modulus from a unit-conductance network on the (n+1)^2 grid corners
    of [-h, h]^2.  Corners with inside_inner are held at 1, corners outside
    inside_outer at 0."""
    x = np.linspace(-half_width, half_width, n + 1)
    z = x[None, :] + 1j * x[:, None]
    fixed_one = inside_inner(z)
    fixed_zero = ~inside_outer(z)
    free = ~(fixed_one | fixed_zero)
    idx = -np.ones(z.shape, dtype=np.int64)
    idx[free] = np.arange(free.sum())
    rows, cols, vals = [], [], []
    b = np.zeros(free.sum())
    diag = np.zeros(free.sum())
    edges = []
    for di, dj in ((0, 1), (1, 0)):
        a = (slice(0, z.shape[0] - di), slice(0, z.shape[1] - dj))
        c = (slice(di, None), slice(dj, None))
        edges.append((a, c))
        for p, q in ((a, c), (c, a)):
            fp = free[p]
            ip = idx[p][fp]
            diag_add = np.bincount(ip, minlength=len(diag))
            diag += diag_add
            fq = free[q][fp]
            rows.extend(ip[fq])
            cols.extend(idx[q][fp][fq])
            vals.extend([-1.0] * int(fq.sum()))
            ones = fixed_one[q][fp]
            np.add.at(b, ip[ones], 1.0)
    A = sp.csr_matrix((vals + list(diag), (rows + list(range(len(diag))), cols + list(range(len(diag))))),
                      shape=(len(diag), len(diag)))
    u_free = spsolve(A.tocsc(), b)
    u = fixed_one.astype(float)
    u[free] = u_free
    energy = 0.0
    for a, c in edges:
        energy += float(((u[a] - u[c]) ** 2).sum())
    return 1 / energy
