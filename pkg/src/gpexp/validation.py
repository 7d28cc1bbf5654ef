"""Input validation helpers shared by every estimator and operation."""

from __future__ import annotations

import numbers

import numpy as np

PMF_ATOL = 1e-12


class PmfError(ValueError):
    """Raised when an array is not a valid (conditional) probability mass function."""


class AxisMismatchError(PmfError):
    """Raised when two pmfs that must share axes do not."""


def check_pmf(values, *, atol=PMF_ATOL, name="pmf"):
    """Return ``values`` as a float array after checking it is a joint pmf.

    Entries must be nonnegative and sum to one within ``atol``. Nothing is
    renormalised here; use :meth:`gpexp.pmf.JointPmf.normalize` for that.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise PmfError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise PmfError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise PmfError(f"{name} has negative entries (min {arr.min():.3g})")
    total = arr.sum()
    if abs(total - 1.0) > atol:
        raise PmfError(f"{name} sums to {total!r}, not 1")
    return arr


def check_cond_pmf(values, n_given, *, atol=PMF_ATOL, name="conditional pmf"):
    """Check a conditional pmf whose first ``n_given`` axes are the conditioning axes.

    Every slice over the remaining axes must sum to one.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim <= n_given:
        raise PmfError(f"{name} needs more than {n_given} axes, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise PmfError(f"{name} has negative or non-finite entries")
    sums = arr.reshape(arr.shape[:n_given] + (-1,)).sum(axis=-1)
    bad = np.abs(sums - 1.0) > atol
    if np.any(bad):
        where = tuple(int(i) for i in np.argwhere(bad)[0])
        raise PmfError(f"{name} slice {where} sums to {sums[where]!r}, not 1")
    return arr


def check_probability(t, name="t"):
    if not isinstance(t, numbers.Real) or not np.isfinite(t):
        raise ValueError(f"{name} must be a finite real, got {t!r}")
    if t < 0 or t > 1:
        raise ValueError(f"{name} must lie in [0, 1], got {t!r}")
    return float(t)


def check_nonnegative(t, name):
    if not isinstance(t, numbers.Real) or not np.isfinite(t) or t < 0:
        raise ValueError(f"{name} must be a nonnegative real, got {t!r}")
    return float(t)


def check_positive_int(n, name):
    if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n < 1:
        raise ValueError(f"{name} must be a positive integer, got {n!r}")
    return int(n)


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``.

    Generators pass through unchanged so callers can hand over a stream
    they own; anything else is fed to ``default_rng``.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
