"""Alphabet-size bounds, attack-channel discretisation and log-uniform pmf quantisation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pmf import kl_divergence
from .validation import check_cond_pmf, check_pmf, check_positive_int


def cara_L_capacity(l, n_x, n_se, n_y, n_sa):
    """``|X||Se| + (l+1)^(|Y||X||Sa|) - 1`` as an exact Python integer."""
    l = check_positive_int(l, "l")
    return n_x * n_se + (l + 1) ** (n_y * n_x * n_sa) - 1


def cara_L_exponent(l, n_x, n_se, n_y, n_sa, n_sd):
    """``|X||Se| + l^(|Y||X|(|S| + |Sa|)) - 1`` with ``|S| = |Se||Sa||Sd|``."""
    l = check_positive_int(l, "l")
    n_s = n_se * n_sa * n_sd
    return n_x * n_se + l ** (n_y * n_x * (n_s + n_sa)) - 1


def state_floor(state_pmf):
    """Smallest positive value of ``p(sa, sd | se)``."""
    p = np.asarray(state_pmf, float)
    cond = p / p.sum(axis=(1, 2), keepdims=True)
    return float(cond[cond > 0].min())


def l_min(n_y, n_sa, n_sd, c):
    """Smallest ``l`` for which the exponent sandwich is stated."""
    inner = max(-0.5 * math.log2(8 * n_sa**5 * n_sd * c), 0.0)
    return max(n_y * n_sa * n_sd, 2.0 ** (1.0 + math.sqrt(inner)))


def d_bar(distortion):
    """``max_x |Y|^-1 sum_y d(x, y)``."""
    d = np.asarray(distortion, float)
    return float(d.mean(axis=1).max())


def exponent_gap_terms(spec, l):
    """Shifted D2 and additive slack of the upper exponent bound at resolution ``l``."""
    _, n_sa, n_sd, _, _, n_y = spec.sizes
    k = n_y * n_sa * n_sd
    shift = (k * d_bar(spec.distortion) + spec.D2 * math.log(l)) / l
    return {
        "D2_shifted": spec.D2 - shift,
        "slack": 7 * k * math.log2(l) ** 2 / l,
        "l_min": l_min(n_y, n_sa, n_sd, state_floor(spec.state_pmf)),
        "d_bar": d_bar(spec.distortion),
    }


# ------------------------------------------------------------ grid discretisation


def discretize_attack(p, distortion, l):
    """Move an attack channel onto the ``1/l`` grid without raising its distortion.

    Each row is rounded up to the grid and then ``k = l * sum(p+) - l``
    entries are lowered by ``1/l``, choosing the outputs with the largest
    distortion among those that are still positive (ties: lowest index).

    Returns ``(p_hat, k)`` where ``k`` has one entry per conditioning tuple.
    """
    p = np.asarray(p, float)
    d = np.asarray(distortion, float)
    n_y = p.shape[-1]
    l = check_positive_int(l, "l")
    if l < n_y:
        raise ValueError(f"l={l} must be at least |Y|={n_y}")
    check_cond_pmf(p, p.ndim - 1, atol=1e-9, name="attack channel")
    rows = p.reshape(-1, n_y)
    # one distortion row per x; other conditioning axes (Sa) repeat it
    reps = rows.shape[0] // d.shape[0]
    d_rows = np.repeat(d, reps, axis=0) if p.ndim == 3 else d
    units = np.ceil(rows * l - 1e-9).astype(np.int64)
    units = np.maximum(units, 0)
    ks = units.sum(axis=1) - l
    for i in range(rows.shape[0]):
        k = int(ks[i])
        if k < 0 or k >= n_y:
            raise AssertionError(f"bookkeeping k={k} outside [0, {n_y - 1}]")
        cand = [y for y in range(n_y) if units[i, y] > 0]
        cand.sort(key=lambda y: (-d_rows[i, y], y))
        for y in cand[:k]:
            units[i, y] -= 1
    return (units / l).reshape(p.shape), ks.reshape(p.shape[:-1])


# ------------------------------------------------------------ log-uniform quantiser


@dataclass(frozen=True)
class QuantizerSpec:
    """Reproduction levels ``eps^(i eps)``, ``i = l..1``, with ``eps = 1/l``."""

    l: int
    epsilon: float = field(init=False)
    levels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        l = check_positive_int(self.l, "l")
        if l < 2:
            raise ValueError("l must be at least 2")
        eps = 1.0 / l
        levels = eps ** (np.arange(l, 0, -1) * eps)
        levels.setflags(write=False)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "levels", levels)

    def quantize(self, z):
        """``Q_l``: the level strictly below ``z`` (``eps`` maps to itself)."""
        z = np.asarray(z, float)
        eps, l = self.epsilon, self.l
        if np.any(z < eps * (1 - 1e-12)) or np.any(z > 1 + 1e-12):
            raise ValueError("Q_l is defined on [1/l, 1]")
        s = np.log(np.clip(z, eps, 1.0)) / (eps * np.log(eps))
        i = np.floor(s + 1e-9).astype(int) + 1
        i = np.clip(i, 1, l)
        out = eps ** (i * eps)
        return np.where(np.isclose(z, eps, rtol=1e-12, atol=0), eps, out)


def log_uniform_quantize(p, l):
    """``Phi_l p = Q_l(p) / sum Q_l(p)`` for a pmf with every entry at least ``1/l``."""
    p = check_pmf(p, atol=1e-9)
    if l < p.size:
        raise ValueError(f"l={l} must be at least |Y|={p.size}")
    spec = QuantizerSpec(l)
    if np.any(p < spec.epsilon * (1 - 1e-12)):
        raise ValueError(f"every entry must be at least 1/l = {spec.epsilon}")
    q = spec.quantize(p)
    return q / q.sum()


def log_ratio_bound(l):
    """``log2(l) / l``: bound on ``|log(Phi_l p / p)|`` per entry."""
    return math.log2(l) / l


def kl_gap_bound(n_y, l):
    return 2 * (n_y + 1) * math.log2(l) ** 2 / l


def kl_quantization_gap(p, q, l):
    """``(|D(p||q) - D(Phi p || Phi q)|, bound)`` in bits; asserts gap <= bound."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    gap = abs(kl_divergence(p, q) - kl_divergence(log_uniform_quantize(p, l), log_uniform_quantize(q, l)))
    bound = kl_gap_bound(p.size, l)
    if gap > bound + 1e-12:
        raise AssertionError(f"quantisation gap {gap} exceeds bound {bound}")
    return gap, bound


# ------------------------------------------------------------ capacity gap


def capacity_gap_check(spec, l, solver=None, L_max=6, reference_solver=None):
    """Compare ``C_L`` at resolutions ``l`` and ``l + 1`` with a reference.

    The Caratheodory size grows very fast, so every ``L`` is capped at
    ``L_max``; the report records both the formula value and the size used.
    """
    from .exponents import SolverConfig, capacity_CL

    solver = solver or SolverConfig()
    ref_solver = reference_solver or solver
    ne, na, _, _, nx, ny = spec.sizes
    report = {"l": l, "rows": []}
    seeds = []
    for ll in (l, l + 1):
        L_formula = cara_L_capacity(ll, nx, ne, ny, na)
        L_used = int(min(L_formula, L_max))
        res = capacity_CL(spec.with_L(L_used), solver)
        report["rows"].append({"l": ll, "L_formula": L_formula, "L_used": L_used, "C_L": res.value})
        seeds.append(res.transmit)
    ref = capacity_CL(spec.with_L(L_max), ref_solver)
    c_star = ref.value
    report["C_ref"] = c_star
    report["bound"] = 2 * ny * math.log2(l) / l
    tol = 5e-3
    c1 = report["rows"][0]["C_L"]
    c2 = report["rows"][1]["C_L"]
    report["monotone"] = c2 >= c1 - 2e-3
    report["within_bound"] = c_star - report["bound"] - tol <= c1 <= c_star + tol
    report["passed"] = report["monotone"] and report["within_bound"]
    return report
