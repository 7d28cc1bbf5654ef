"""Finite-alphabet probability tensors and the information measures built on them.

All public values are in bits. Zero-probability cells follow the usual
``0 log 0 = 0`` convention, and a divergence against a distribution that
misses part of the support is ``math.inf`` rather than an error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr, xlogy

from .validation import (
    PMF_ATOL,
    AxisMismatchError,
    PmfError,
    check_cond_pmf,
    check_pmf,
    check_probability,
)

LN2 = np.log(2.0)

#: Role tags used for the six variables of a side-information problem.
ROLES = ("Se", "Sa", "Sd", "U", "X", "Y")


@dataclass(frozen=True)
class JointPmf:
    """A dense joint pmf whose axes carry role names.

    ``values[i0, i1, ...]`` is the probability of the symbol tuple, one axis
    per entry of ``roles``. A size-1 axis stands for a degenerate (absent)
    variable.
    """

    values: np.ndarray
    roles: tuple

    def __post_init__(self):
        values = check_pmf(self.values, name="JointPmf")
        roles = tuple(self.roles)
        if len(roles) != values.ndim:
            raise PmfError(f"{values.ndim} axes but {len(roles)} roles {roles}")
        if len(set(roles)) != len(roles):
            raise PmfError(f"duplicate roles {roles}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "roles", roles)

    @classmethod
    def normalize(cls, values, roles):
        """Build a pmf from nonnegative weights by dividing by their sum."""
        arr = np.asarray(values, dtype=float)
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise PmfError("weights must be finite and nonnegative")
        total = arr.sum()
        if total <= 0:
            raise PmfError("weights sum to zero")
        return cls(arr / total, roles)

    @property
    def shape(self):
        return self.values.shape

    def axis(self, role):
        try:
            return self.roles.index(role)
        except ValueError:
            raise PmfError(f"role {role!r} not among {self.roles}") from None

    def marginal(self, roles):
        """Marginal over ``roles``, returned with axes in the order requested."""
        roles = tuple(roles)
        keep = [self.axis(r) for r in roles]
        drop = tuple(i for i in range(len(self.roles)) if i not in keep)
        arr = self.values.sum(axis=drop)
        remaining = [i for i in range(len(self.roles)) if i in keep]
        order = [remaining.index(i) for i in keep]
        return JointPmf(np.transpose(arr, order), roles)


@dataclass(frozen=True)
class CondPmf:
    """A conditional pmf: the first ``n_given`` axes index the conditioning symbols."""

    values: np.ndarray
    n_given: int

    def __post_init__(self):
        values = check_cond_pmf(self.values, self.n_given)
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def given_shape(self):
        return self.values.shape[: self.n_given]

    @property
    def out_shape(self):
        return self.values.shape[self.n_given :]


def _values(p):
    return p.values if isinstance(p, (JointPmf, CondPmf)) else np.asarray(p, dtype=float)


def entropy(p):
    """Shannon entropy of a joint pmf (all axes together), in bits."""
    arr = check_pmf(_values(p))
    return float(-xlogy(arr, arr).sum() / LN2)


def kl_divergence(p, q):
    """``D(p || q)`` in bits; ``inf`` when ``p`` puts mass where ``q`` has none."""
    if isinstance(p, JointPmf) and isinstance(q, JointPmf) and p.roles != q.roles:
        raise AxisMismatchError(f"roles differ: {p.roles} vs {q.roles}")
    a, b = check_pmf(_values(p), name="p"), check_pmf(_values(q), name="q")
    if a.shape != b.shape:
        raise AxisMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    return float(rel_entr(a, b).sum() / LN2)


def conditional_kl(p, q, w):
    """``D(p || q | w) = sum_x w(x) D(p(.|x) || q(.|x))`` in bits.

    ``p`` and ``q`` are conditional pmfs whose leading axes match the shape of
    the pmf ``w`` over the conditioning symbols.
    """
    w = check_pmf(_values(w), name="w")
    pv, qv = _values(p), _values(q)
    if pv.shape != qv.shape:
        raise AxisMismatchError(f"shapes differ: {pv.shape} vs {qv.shape}")
    if pv.shape[: w.ndim] != w.shape:
        raise AxisMismatchError(f"conditioning shape {pv.shape[:w.ndim]} vs w {w.shape}")
    check_cond_pmf(pv, w.ndim, name="p")
    check_cond_pmf(qv, w.ndim, name="q")
    ww = w.reshape(w.shape + (1,) * (pv.ndim - w.ndim))
    terms = rel_entr(pv, qv)
    # slices with w(x) = 0 contribute nothing even if p(.|x) escapes q(.|x)
    terms = np.where(ww > 0, terms, 0.0)
    return float((ww * terms).sum() / LN2)


def _axes(p, group):
    if isinstance(p, JointPmf):
        return tuple(p.axis(r) if isinstance(r, str) else int(r) for r in group)
    return tuple(int(r) for r in group)


def _group_entropy(arr, axes):
    drop = tuple(i for i in range(arr.ndim) if i not in axes)
    marg = arr.sum(axis=drop) if drop else arr
    return float(-xlogy(marg, marg).sum() / LN2)


def mutual_information(p, split):
    """``I(A; B)`` for ``split = (A_axes, B_axes)``; unlisted axes are summed out.

    Axes may be integers or, for a :class:`JointPmf`, role names.
    """
    arr = check_pmf(_values(p))
    a, b = (_axes(p, g) for g in split)
    if set(a) & set(b):
        raise PmfError(f"groups overlap: {a} and {b}")
    value = _group_entropy(arr, a) + _group_entropy(arr, b) - _group_entropy(arr, a + b)
    return max(value, 0.0)


def conditional_mutual_information(p, a, b, given):
    """``I(A; B | C)`` in bits."""
    arr = check_pmf(_values(p))
    a, b, c = _axes(p, a), _axes(p, b), _axes(p, given)
    value = (
        _group_entropy(arr, a + c)
        + _group_entropy(arr, b + c)
        - _group_entropy(arr, a + b + c)
        - _group_entropy(arr, c)
    )
    return max(value, 0.0)


def j_functional(p, method="mi"):
    """``I(U; Y Sd) - I(U; Se)`` for a role-tagged joint pmf.

    ``method="entropy"`` evaluates the same quantity through
    ``H(Y Sd) - H(Y Sd | U) - H(Se) + H(Se | U)``; both routes agree to
    rounding and the second exists as a cross-check.
    """
    if not isinstance(p, JointPmf):
        raise PmfError("j_functional needs a role-tagged JointPmf")
    for role in ("U", "Se", "Sd", "Y"):
        p.axis(role)
    if method == "mi":
        return mutual_information(p, (("U",), ("Y", "Sd"))) - mutual_information(
            p, (("U",), ("Se",))
        )
    if method == "entropy":
        arr = p.values
        u, se, sd, y = (p.axis(r) for r in ("U", "Se", "Sd", "Y"))
        h_ysd = _group_entropy(arr, (y, sd))
        h_ysd_given_u = _group_entropy(arr, (u, y, sd)) - _group_entropy(arr, (u,))
        h_se = _group_entropy(arr, (se,))
        h_se_given_u = _group_entropy(arr, (u, se)) - _group_entropy(arr, (u,))
        return h_ysd - h_ysd_given_u - h_se + h_se_given_u
    raise ValueError(f"unknown method {method!r}")


def binary_entropy(t):
    """``-t log t - (1-t) log(1-t)`` in bits."""
    t = check_probability(t)
    return float(-(xlogy(t, t) + xlogy(1 - t, 1 - t)) / LN2)


def star(p, q):
    """Binary convolution ``p(1-q) + (1-p)q``."""
    p, q = check_probability(p, "p"), check_probability(q, "q")
    return p * (1 - q) + (1 - p) * q


def pos_part(t):
    return max(0.0, float(t))


__all__ = [
    "LN2",
    "PMF_ATOL",
    "ROLES",
    "CondPmf",
    "JointPmf",
    "binary_entropy",
    "conditional_kl",
    "conditional_mutual_information",
    "entropy",
    "j_functional",
    "kl_divergence",
    "mutual_information",
    "pos_part",
    "star",
]
