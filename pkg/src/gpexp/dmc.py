"""Error exponents for channels without side information.

Single and compound DMCs, the private-watermarking game and the jamming
channel. Each inner minimisation is a small convex program.
"""

from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .ga import GaConfig, LinearConstraint, SimplexProductSpace
from .programs import LN2, SolverError, _solve
from .validation import check_cond_pmf, check_nonnegative, check_pmf


@dataclass(frozen=True)
class DistortionClass:
    """All channels ``p(y|x)`` with ``sum p(x) p(y|x) d(x,y) <= D2``."""

    distortion: np.ndarray
    D2: float


def _bits(v):
    return float(max(v, 0.0))


def _dmc_value(p_x, V, W, R):
    """Numpy evaluation of ``D(V || W | p_x) + |I(p_x, V) - R|^+``."""
    from .pmf import conditional_kl, mutual_information

    joint = p_x[:, None] * V
    return conditional_kl(V, W, p_x) + max(mutual_information(joint, ((0,), (1,))) - R, 0.0)


def _clean(V):
    V = np.maximum(V, 0.0)
    return V / V.sum(axis=1, keepdims=True)


def _inner_program(p_x, R, W=None, cls=None):
    nx = len(p_x)
    ny = W.shape[1] if W is not None else cls.distortion.shape[1]
    m = cp.Variable((nx, ny), nonneg=True)
    t = cp.Variable(nonneg=True)
    cons = [cp.sum(m, axis=1) == p_x]
    if W is not None:
        ref = p_x[:, None] * W
        mask = ref > 0
        if np.any(~mask):
            cons.append(m[~mask] == 0)
        div = cp.sum(cp.rel_entr(m[mask], ref[mask]))
        A = None
    else:
        A = cp.Variable((nx, ny), nonneg=True)
        cons += [cp.sum(A, axis=1) == 1, cp.sum(cp.multiply(p_x[:, None] * cls.distortion, A)) <= cls.D2]
        div = cp.sum(cp.rel_entr(m, cp.multiply(np.repeat(p_x[:, None], ny, 1), A)))
    p_y = cp.sum(m, axis=0)
    prod = cp.vstack([p_x[i] * p_y for i in range(nx)])
    info = cp.sum(cp.rel_entr(m, prod))
    cons.append(t >= info / LN2 - R)
    prob = cp.Problem(cp.Minimize(div / LN2 + t), cons)
    _solve(prob)
    rows = np.maximum(m.value, 0.0)
    V = np.where(p_x[:, None] > 0, rows / np.maximum(rows.sum(axis=1, keepdims=True), 1e-300), 1.0 / ny)
    return _clean(V), (None if A is None else _clean(A.value))


def dmc_exponent(R, p_x, W):
    """``min_V D(V || W | p_x) + |I(p_x, V) - R|^+`` for a single DMC ``W``."""
    R = check_nonnegative(R, "R")
    p_x = check_pmf(p_x, name="p_x")
    W = check_cond_pmf(W, 1, name="W")
    V, _ = _inner_program(p_x, R, W=W)
    return _bits(_dmc_value(p_x, V, W, R))


def compound_dmc_exponent(R, p_x, A):
    """Exponent against the worst channel in ``A``.

    ``A`` is either a sequence of channel matrices or a :class:`DistortionClass`.
    """
    R = check_nonnegative(R, "R")
    p_x = check_pmf(p_x, name="p_x")
    if isinstance(A, DistortionClass):
        V, W = _inner_program(p_x, R, cls=A)
        val = float(np.sum(p_x[:, None] * W * A.distortion))
        if val > A.D2 + 1e-9:
            raise SolverError(f"worst channel violates D2 by {val - A.D2:.3g}")
        return _bits(_dmc_value(p_x, V, W, R))
    channels = list(A)
    if not channels:
        raise ValueError("A must not be empty")
    return min(dmc_exponent(R, p_x, W) for W in channels)


def _hamming(n):
    return (np.arange(n)[:, None] != np.arange(n)[None, :]).astype(float)


def _private_inner(p_s, p_xs, R, dist, D2):
    """``min_{channel in A~} I(S;Y|X) + |I(X;Y|S) - R|^+`` for fixed ``p(x|s)``."""
    ns, nx = p_xs.shape
    ny = dist.shape[1]
    p_sx = p_s[:, None] * p_xs
    p_x = p_sx.sum(axis=0)
    p_s_given_x = np.where(p_x > 0, p_sx / np.where(p_x > 0, p_x, 1.0), 0.0)
    C = cp.Variable((ns * nx, ny), nonneg=True)
    t = cp.Variable(nonneg=True)
    w = p_sx.reshape(-1)
    m = cp.multiply(np.repeat(w[:, None], ny, 1), C)
    cons = [cp.sum(C, axis=1) == 1]
    cons.append(cp.sum(cp.multiply(np.repeat(w[:, None], ny, 1) * np.tile(dist, (ns, 1)), C)) <= D2)
    # m(x, y) and m(s, y) marginals expanded back to (s, x) rows
    m_xy = sum(m[s * nx:(s + 1) * nx, :] for s in range(ns))
    m_sy = cp.vstack([cp.sum(m[s * nx:(s + 1) * nx, :], axis=0) for s in range(ns)])
    ref1 = cp.vstack([p_s_given_x[s, x] * m_xy[x, :] for s in range(ns) for x in range(nx)])
    ref2 = cp.vstack([p_xs[s, x] * m_sy[s, :] for s in range(ns) for x in range(nx)])
    i_sy_x = cp.sum(cp.rel_entr(m, ref1)) / LN2
    i_xy_s = cp.sum(cp.rel_entr(m, ref2)) / LN2
    cons.append(t >= i_xy_s - R)
    prob = cp.Problem(cp.Minimize(i_sy_x + t), cons)
    _solve(prob)
    ch = _clean(C.value).reshape(ns, nx, ny)
    joint = p_sx[:, :, None] * ch
    val = float(np.sum(joint * dist[None]))
    if val > D2 + 1e-9:
        # pull toward the noiseless channel
        ident = np.broadcast_to(np.eye(nx, ny)[None], ch.shape)
        lam = D2 / val
        ch = lam * ch + (1 - lam) * ident
        joint = p_sx[:, :, None] * ch
    return _private_value(joint, R)


def _private_value(joint, R):
    from .pmf import conditional_mutual_information as cmi

    return cmi(joint, (0,), (2,), (1,)) + max(cmi(joint, (1,), (2,), (0,)) - R, 0.0)


def private_wm_exponent(R, D1, D2, p_s=(0.5, 0.5), cfg=None, polish_evals=300):
    """Private-watermarking CAM exponent with Hamming cost and distortion.

    ``max_{p(x|s)} min_{p(y|x,s) in A~} I(S;Y|X) + |I(X;Y|S) - R|^+`` where the
    max respects ``E d(S, X) <= D1``.
    """
    from .exponents import _search_max

    R = check_nonnegative(R, "R")
    p_s = check_pmf(p_s, name="p_s")
    ns = len(p_s)
    dist = _hamming(ns)
    constraints = [LinearConstraint((p_s[:, None] * dist).ravel(), D1)]
    space = SimplexProductSpace([(ns, 0.0)] * ns, constraints, anchor=np.eye(ns).ravel())

    def fn(flat):
        return _private_inner(p_s, flat.reshape(ns, ns), R, dist, D2)

    seeds = [((1 - b) * np.eye(ns) + b * (1 - np.eye(ns)) / max(ns - 1, 1)).ravel() for b in (D1, 0.5 * D1)]
    cfg = cfg or GaConfig(population=12, generations=8, stall_patience=4)
    _, v, _ = _search_max(fn, space, seeds, None, cfg, 1, polish_evals)
    return float(v)


def _jamming_inner(p_x, R, W, state_cost=None, Lambda=None):
    """``min_{p_S, V: V_X = p_x, V_S = p_S} D(V || W p_x p_S) + |I_V(X;Y) - R|^+``."""
    nx, ns, ny = W.shape
    V = cp.Variable((nx * ns, ny), nonneg=True)
    q = cp.Variable(ns, nonneg=True)
    t = cp.Variable(nonneg=True)
    cons = [cp.sum(q) == 1]
    rows = [[V[x * ns + s, :] for s in range(ns)] for x in range(nx)]
    for x in range(nx):
        cons.append(sum(cp.sum(r) for r in rows[x]) == p_x[x])
    for s in range(ns):
        cons.append(sum(cp.sum(rows[x][s]) for x in range(nx)) == q[s])
    if state_cost is not None:
        cons.append(state_cost @ q <= Lambda)
    ref = cp.vstack([p_x[x] * q[s] * W[x, s, :] for x in range(nx) for s in range(ns)])
    div = cp.sum(cp.rel_entr(V, ref))
    m_xy = cp.vstack([sum(rows[x]) for x in range(nx)])
    p_y = cp.sum(m_xy, axis=0)
    prod = cp.vstack([p_x[x] * p_y for x in range(nx)])
    info = cp.sum(cp.rel_entr(m_xy, prod))
    cons.append(t >= info / LN2 - R)
    prob = cp.Problem(cp.Minimize(div / LN2 + t), cons)
    _solve(prob)
    Vv = np.maximum(V.value, 0.0).reshape(nx, ns, ny)
    return _jamming_value(p_x, Vv, W, R)


def _jamming_value(p_x, V, W, R):
    from .pmf import mutual_information

    V = V / V.sum()
    p_s = V.sum(axis=(0, 2))
    ref = p_x[:, None, None] * p_s[None, :, None] * W
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(V > 0, V * np.log2(np.where(V > 0, V, 1) / np.where(ref > 0, ref, 1e-300)), 0.0)
    m_xy = V.sum(axis=1)
    return float(d.sum()) + max(mutual_information(m_xy, ((0,), (1,))) - R, 0.0)


def jamming_exponent(R, W, p_x=None, state_cost=None, Lambda=None, cfg=None, polish_evals=200):
    """Random-coding exponent of a jammed channel ``W[x, s, y]``.

    The jammer picks the state law ``p_S`` (optionally with ``state_cost @ p_S
    <= Lambda``) independently of the input. With ``p_x`` given the outer max
    is skipped.
    """
    from .exponents import _search_max

    R = check_nonnegative(R, "R")
    W = np.asarray(W, float)
    if W.ndim != 3:
        raise ValueError("W must be indexed [x, s, y]")
    check_cond_pmf(W, 2, name="W")
    if state_cost is not None:
        state_cost = np.asarray(state_cost, float)
    if p_x is not None:
        return _bits(_jamming_inner(check_pmf(p_x, name="p_x"), R, W, state_cost, Lambda))
    nx = W.shape[0]
    space = SimplexProductSpace([(nx, 0.0)])
    cfg = cfg or GaConfig(population=10, generations=6, stall_patience=3)

    def fn(p):
        return _jamming_inner(p, R, W, state_cost, Lambda)

    _, v, _ = _search_max(fn, space, [np.full(nx, 1.0 / nx)], None, cfg, 1, polish_evals)
    return _bits(v)
