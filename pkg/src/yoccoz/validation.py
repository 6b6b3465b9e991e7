"""Input validation helpers shared by the estimators and the CLI."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.exceptions import NotFittedError

from .errors import InvalidArgument


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidArgument(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidArgument(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise InvalidArgument(f"{name} must be a finite real number, got {value!r}")
    if value <= 0:
        raise InvalidArgument(f"{name} must be positive, got {value}")
    return float(value)


def check_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


def check_mask(mask, name="mask"):
    m = np.asarray(mask)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgument(f"{name} must be a square 2-d array")
    return m.astype(bool)


def check_symmetric(mask, name="mask"):
    """Cellwise symmetry under complex conjugation (rows flip)."""
    m = check_mask(mask, name)
    if not np.array_equal(m, m[::-1]):
        raise InvalidArgument(f"{name} is not symmetric under conjugation")
    return m
