"""Objective evaluators and the convex inner programs behind the exponents.

For a fixed transmit channel ``T = p(x,u|se)`` and hypothesis state marginal
``pt = p~(se)``, every inner minimisation in the capacity and exponent
formulas is convex:

* capacity: ``min_{a in A} I(U; Y Sd) - I(U; Se)``, convex in ``a``;
* CDMC: ``min_{q, a in A} D(pt T q || pS T a) + |J(pt T q) - R|^+``, jointly
  convex in the hypothesis joint and ``a``;
* CAM: ``min_{q in P[A]} D(pt_S || pS) + I(Y; U Se Sd | X Sa) + |J - R|^+``.
  With the hypothesis state conditional ``k(sa, sd | se)`` kept independent
  of ``(x, u)`` this equals ``min_{q, a'} D(pt T q || pS T a') + |J - R|^+``,
  which is jointly convex.

Each program is compiled once per scenario with cvxpy parameters (DPP), then
re-solved for every ``(pt, T)``. Reported values always come from the numpy
evaluators applied to a cleaned, feasible witness, never from the solver's
own objective.

Array conventions: ``pS[e,a,d]``, ``T[e,x,u]``, ``atk[x,a,y]`` and the
hypothesis channel ``q[e,x,u,a,d,y]`` (a pmf over ``(a,d,y)`` for each
``(e,x,u)``). Joint arrays use axis order ``(e,a,d,u,x,y)``.
"""

from __future__ import annotations

import warnings

import cvxpy as cp
import numpy as np
import scipy.sparse as sp
from scipy.special import rel_entr, xlogy

from .scenarios import FEAS_SLACK

LN2 = np.log(2.0)
JOINT_ROLES = ("Se", "Sa", "Sd", "U", "X", "Y")


class SolverError(RuntimeError):
    pass


# ---------------------------------------------------------------- numpy side


def _h(p):
    return -xlogy(p, p).sum() / LN2


def _kl(p, q):
    return float(rel_entr(p, q).sum() / LN2)


def true_joint(pS, T, atk):
    return np.einsum("ead,exu,xay->eaduxy", pS, T, atk)


def hyp_joint(pt, T, q):
    return np.einsum("e,exu,exuady->eaduxy", pt, T, q)


def j_value(joint):
    """``I(U; Y Sd) - I(U; Se)`` for a joint over (e,a,d,u,x,y)."""
    p_udy = joint.sum(axis=(0, 1, 4)).transpose(1, 0, 2)
    p_u = p_udy.sum(axis=(1, 2))
    p_dy = p_udy.sum(axis=0)
    i_uz = _h(p_u) + _h(p_dy) - _h(p_udy)
    p_eu = joint.sum(axis=(1, 2, 4, 5))
    i_ue = _h(p_eu.sum(axis=1)) + _h(p_u) - _h(p_eu)
    return float(i_uz - i_ue)


def y_channel(joint):
    """Induced ``p(y | x, sa)`` as an (x, a, y) array; uniform where ``p(x,sa) = 0``."""
    p_xay = joint.sum(axis=(0, 2, 3)).transpose(1, 0, 2)
    tot = p_xay.sum(axis=2, keepdims=True)
    ny = p_xay.shape[2]
    return np.where(tot > 0, p_xay / np.where(tot > 0, tot, 1.0), 1.0 / ny)


def cond_mi_y(joint):
    """``I(Y; U Se Sd | X Sa)`` in bits."""
    h_all = _h(joint)
    h_rest = _h(joint.sum(axis=5))
    p_xay = joint.sum(axis=(0, 2, 3))
    return float(h_rest + _h(p_xay) - h_all - _h(p_xay.sum(axis=2)))


def cdmc_objective(pS, pt, T, q, atk, R):
    """``D(pt T q || pS T atk) + |J - R|^+`` in bits."""
    hyp = hyp_joint(pt, T, q)
    return _kl(hyp, true_joint(pS, T, atk)) + max(j_value(hyp) - R, 0.0)


def cam_objective(pS, pt, T, q, R):
    """``D(pt_S || pS) + I(Y; U Se Sd | X Sa) + |J - R|^+`` in bits."""
    hyp = hyp_joint(pt, T, q)
    pt_s = hyp.sum(axis=(3, 4, 5))
    return _kl(pt_s, pS) + cond_mi_y(hyp) + max(j_value(hyp) - R, 0.0)


def cam_objective_chain(pS, pt, T, q, R):
    """The CAM cost written as ``D(pt T q || pS T a') + |J - R|^+``.

    ``a'`` is the hypothesis's own induced ``p(y|x,sa)``. This matches
    :func:`cam_objective` whenever the hypothesis keeps ``p(x,u|s) = T``.
    """
    hyp = hyp_joint(pt, T, q)
    return _kl(hyp, true_joint(pS, T, y_channel(hyp))) + max(j_value(hyp) - R, 0.0)


def capacity_objective(pS, T, atk):
    return j_value(true_joint(pS, T, atk))


def i_u_se(pt, T):
    p_eu = pt[:, None] * T.sum(axis=1)
    return float(_h(p_eu.sum(axis=1)) + _h(p_eu.sum(axis=0)) - _h(p_eu))


def hyp_distortion(joint, dist):
    return float(np.einsum("eaduxy,xy->", joint, dist))


def _repair_attack(atk, p_xa, dist, D2, anchor):
    """Mix ``atk`` toward the zero-distortion ``anchor`` until it meets D2."""
    val = float(np.einsum("xa,xay,xy->", p_xa, atk, dist))
    if val <= D2 + 0.5 * FEAS_SLACK:
        return atk
    base = float(np.einsum("xa,xay,xy->", p_xa, anchor, dist))
    lam = (D2 - base) / (val - base)
    return lam * atk + (1 - lam) * anchor


# ---------------------------------------------------------------- cvxpy side

_SOLVERS = ("CLARABEL", "SCS")


def _solve(prob):
    last = None
    for name in _SOLVERS:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                prob.solve(solver=name)
        except cp.error.SolverError as exc:
            last = exc
            continue
        if prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return prob.status
        last = prob.status
    raise SolverError(f"inner program failed: {last}")


class _Layout:
    """Index bookkeeping for the flattened hypothesis joint.

    Rows ``k`` enumerate ``(e, x, u)``; columns ``c`` enumerate ``(a, d, y)``.
    Only pairs with ``pS(e, a, d) > 0`` carry a variable, since any other
    hypothesis mass gives an infinite divergence.
    """

    def __init__(self, spec):
        ne, na, nd, nu, nx, ny = spec.sizes
        self.sizes = spec.sizes
        pS = np.asarray(spec.state_pmf)
        E, X, U, A, Dd, Y = np.meshgrid(
            np.arange(ne), np.arange(nx), np.arange(nu),
            np.arange(na), np.arange(nd), np.arange(ny), indexing="ij",
        )
        full = np.stack([a.ravel() for a in (E, X, U, A, Dd, Y)], axis=1)
        keep = pS[full[:, 0], full[:, 3], full[:, 4]] > 0
        self.idx = full[keep]
        self.full_index = np.flatnonzero(keep)
        self.ns = len(self.idx)
        e, x, u, a, d, y = self.idx.T
        self.e, self.x, self.u, self.a, self.d, self.y = e, x, u, a, d, y
        self.k = (e * nx + x) * nu + u
        self.nk = ne * nx * nu
        self.v = (x * na + a) * ny + y
        self.nv = nx * na * ny
        self.z = d * ny + y
        self.nz = nd * ny
        self.uz = u * self.nz + self.z
        self.ad = a * nd + d
        self.nad = na * nd
        self.xa = x * na + a
        self.nxa = nx * na
        cols = np.arange(self.ns)
        ones = np.ones(self.ns)

        def mat(rows, n):
            return sp.csr_matrix((ones, (rows, cols)), shape=(n, self.ns))

        self.row_sum = mat(self.k, self.nk)
        self.sel_v = sp.csr_matrix((ones, (cols, self.v)), shape=(self.ns, self.nv))
        self.to_uz = mat(self.uz, nu * self.nz)
        self.to_z = mat(self.z, self.nz)
        self.to_kad = mat(self.k * self.nad + self.ad, self.nk * self.nad)
        self.to_xay = mat(self.v, self.nv)
        self.to_xa = mat(self.xa, self.nxa)
        rep = np.arange(nu * self.nz) % self.nz
        self.rep_z = sp.csr_matrix(
            (np.ones(nu * self.nz), (np.arange(nu * self.nz), rep)), shape=(nu * self.nz, self.nz)
        )
        self.v_rows = sp.csr_matrix(
            (np.ones(self.nv), (np.arange(self.nv) // ny, np.arange(self.nv))),
            shape=(self.nxa, self.nv),
        )

    def weights(self, pt, T):
        return (pt[:, None, None] * T).ravel()

    def coef(self, pS, T):
        return pS[self.e, self.a, self.d] * T[self.e, self.x, self.u]

    def pu_rep(self, pt, T):
        p_u = np.einsum("e,exu->u", pt, T)
        return np.repeat(p_u, self.nz)

    def q_from(self, mv, w):
        """Hypothesis channel q[e,x,u,a,d,y] from flattened joint values."""
        ne, na, nd, nu, nx, ny = self.sizes
        full = np.zeros(ne * nx * nu * na * nd * ny)
        full[self.full_index] = np.maximum(mv, 0.0)
        m = full.reshape(ne * nx * nu, na * nd * ny)
        tot = m.sum(axis=1, keepdims=True)
        q = np.where(tot > 1e-300, m / np.where(tot > 1e-300, tot, 1.0), 0.0)
        # rows without hypothesis mass are irrelevant; keep them on the support
        empty = tot[:, 0] <= 1e-300
        if np.any(empty):
            supp = np.zeros((ne * nx * nu, na * nd * ny))
            supp.reshape(-1)[self.full_index] = 1.0
            q[empty] = supp[empty] / supp[empty].sum(axis=1, keepdims=True)
        return q.reshape(ne, nx, nu, na, nd, ny)


def _clean_cond(arr, n_given):
    arr = np.maximum(np.asarray(arr, float), 0.0)
    shape = arr.shape
    flat = arr.reshape(int(np.prod(shape[:n_given])), -1)
    tot = flat.sum(axis=1, keepdims=True)
    flat = np.where(tot > 0, flat / np.where(tot > 0, tot, 1.0), 1.0 / flat.shape[1])
    return flat.reshape(shape)


class CapacityInner:
    """``min_{a in A} J(pS T a)`` for a fixed transmit channel."""

    def __init__(self, spec):
        self.spec = spec
        ne, na, nd, nu, nx, ny = spec.sizes
        self.pS = np.asarray(spec.state_pmf)
        self.nz = nd * ny
        if spec.attack_set is not None:
            self.prob = None
            return
        nv = nx * na * ny
        self.B = cp.Parameter((nu * self.nz, nv), nonneg=True)
        self.P2 = cp.Parameter((nu * self.nz, nv), nonneg=True)
        self.pxd = cp.Parameter(nv, nonneg=True)
        self.v = cp.Variable(nv, nonneg=True)
        rows = sp.csr_matrix(
            (np.ones(nv), (np.arange(nv) // ny, np.arange(nv))), shape=(nx * na, nv)
        )
        cons = [rows @ self.v == 1]
        if np.isfinite(spec.D2):
            cons.append(self.pxd @ self.v <= spec.D2)
        obj = cp.sum(cp.rel_entr(self.B @ self.v, self.P2 @ self.v))
        self.prob = cp.Problem(cp.Minimize(obj), cons)

    def solve(self, T):
        """Return ``(J_min, worst attack)``."""
        spec, pS = self.spec, self.pS
        if spec.attack_set is not None:
            vals = [capacity_objective(pS, T, b) for b in spec.attack_set]
            i = int(np.argmin(vals))
            return vals[i], spec.attack_set[i]
        ne, na, nd, nu, nx, ny = spec.sizes
        base = np.einsum("ead,exu->udxa", pS, T)
        eye = np.eye(ny)[None, None, :, None, None, :]
        B = (base[:, :, None, :, :, None] * eye).reshape(nu * self.nz, -1)
        p_u = B.sum(axis=1).reshape(nu, self.nz).sum(axis=1)
        bz = B.reshape(nu, self.nz, -1).sum(axis=0)
        P2 = (p_u[:, None, None] * bz[None]).reshape(nu * self.nz, -1)
        p_xa = np.einsum("ead,exu->xa", pS, T)
        self.B.value = B
        self.P2.value = P2
        self.pxd.value = (p_xa[:, :, None] * spec.distortion[:, None, :]).ravel()
        _solve(self.prob)
        atk = _clean_cond(self.v.value.reshape(nx, na, ny), 2)
        if np.isfinite(spec.D2):
            atk = _repair_attack(atk, p_xa, spec.distortion, spec.D2, spec.zero_distortion_attack())
        return capacity_objective(pS, T, atk), atk


class ExponentInner:
    """Inner minimisation of the CDMC or CAM exponent for fixed ``(pt, T, R)``."""

    def __init__(self, spec, model):
        if model not in ("cdmc", "cam"):
            raise ValueError(f"model must be 'cdmc' or 'cam', got {model!r}")
        self.spec, self.model = spec, model
        self.pS = np.asarray(spec.state_pmf)
        self.lay = lay = _Layout(spec)
        ne, na, nd, nu, nx, ny = spec.sizes
        self.w = cp.Parameter(lay.nk, nonneg=True)
        self.coef = cp.Parameter(lay.ns, nonneg=True)
        self.pu = cp.Parameter(nu * lay.nz, nonneg=True)
        self.c0 = cp.Parameter()
        self.m = cp.Variable(lay.ns, nonneg=True)
        self.t = cp.Variable(nonneg=True)
        self.v = cp.Variable(lay.nv, nonneg=True)
        m = self.m
        cons = [lay.row_sum @ m == self.w, lay.v_rows @ self.v == 1]
        if model == "cdmc":
            self.pxd = cp.Parameter(lay.nv, nonneg=True)
            if spec.attack_set is None and np.isfinite(spec.D2):
                cons.append(self.pxd @ self.v <= spec.D2)
            self.fixed_ref = cp.Parameter(lay.ns, nonneg=True)
        else:
            self.kappa = cp.Variable(ne * lay.nad, nonneg=True)
            self.w_kad = cp.Parameter(lay.nk * lay.nad, nonneg=True)
            k_rows = sp.csr_matrix(
                (np.ones(ne * lay.nad), (np.arange(ne * lay.nad) // lay.nad, np.arange(ne * lay.nad))),
                shape=(ne, ne * lay.nad),
            )
            # expand kappa[e, ad] onto the (k, ad) grid
            kk = np.arange(lay.nk * lay.nad)
            e_of = (kk // lay.nad) // (nx * nu)
            expand = sp.csr_matrix(
                (np.ones(len(kk)), (kk, e_of * lay.nad + kk % lay.nad)),
                shape=(lay.nk * lay.nad, ne * lay.nad),
            )
            cons += [
                k_rows @ self.kappa == 1,
                lay.to_kad @ m == cp.multiply(self.w_kad, expand @ self.kappa),
            ]
            if spec.attack_set is None:
                if np.isfinite(spec.D2):
                    dcoef = spec.distortion[lay.x, lay.y]
                    cons.append(dcoef @ m <= spec.D2)
            else:
                self.b_rep = cp.Parameter(lay.nv, nonneg=True)
                rep = sp.csr_matrix(
                    (np.ones(lay.nv), (np.arange(lay.nv), np.arange(lay.nv) // ny)),
                    shape=(lay.nv, lay.nxa),
                )
                cons.append(lay.to_xay @ m == cp.multiply(self.b_rep, rep @ (lay.to_xa @ m)))
        ref = cp.multiply(self.coef, lay.sel_v @ self.v)
        div = cp.sum(cp.rel_entr(m, ref))
        self._fixed_ref = None
        if model == "cdmc" and spec.attack_set is not None:
            div = cp.sum(cp.rel_entr(m, self.fixed_ref))
        p_uz = lay.to_uz @ m
        prod = cp.multiply(self.pu, lay.rep_z @ (lay.to_z @ m))
        info = cp.sum(cp.rel_entr(p_uz, prod))
        cons += [self.t >= info / LN2 + self.c0]
        self.prob = cp.Problem(cp.Minimize(div / LN2 + self.t), cons)

    def _set_common(self, pt, T, R):
        lay = self.lay
        self.w.value = lay.weights(pt, T)
        self.coef.value = lay.coef(self.pS, T)
        self.pu.value = lay.pu_rep(pt, T)
        self.c0.value = -i_u_se(pt, T) - R

    def solve(self, pt, T, R):
        """Return ``(value, q, attack)``; the value is a numpy evaluation."""
        pt = np.asarray(pt, float)
        self._set_common(pt, T, R)
        if self.model == "cdmc":
            return self._solve_cdmc(pt, T, R)
        return self._solve_cam(pt, T, R)

    def _solve_cdmc(self, pt, T, R):
        spec, lay, pS = self.spec, self.lay, self.pS
        ne, na, nd, nu, nx, ny = spec.sizes
        p_xa = np.einsum("ead,exu->xa", pS, T)
        if spec.attack_set is not None:
            best = None
            for b in spec.attack_set:
                self.fixed_ref.value = lay.coef(pS, T) * b.ravel()[lay.v]
                _solve(self.prob)
                q = lay.q_from(self.m.value, self.w.value)
                val = cdmc_objective(pS, pt, T, q, b, R)
                if best is None or val < best[0]:
                    best = (val, q, b)
            return best
        self.pxd.value = (p_xa[:, :, None] * spec.distortion[:, None, :]).ravel()
        self.fixed_ref.value = np.zeros(lay.ns)
        _solve(self.prob)
        q = lay.q_from(self.m.value, self.w.value)
        atk = _clean_cond(self.v.value.reshape(nx, na, ny), 2)
        if np.isfinite(spec.D2):
            atk = _repair_attack(atk, p_xa, spec.distortion, spec.D2, spec.zero_distortion_attack())
        return cdmc_objective(pS, pt, T, q, atk, R), q, atk

    def _solve_cam(self, pt, T, R):
        spec, lay, pS = self.spec, self.lay, self.pS
        ne, na, nd, nu, nx, ny = spec.sizes
        self.w_kad.value = np.repeat(self.w.value, lay.nad)
        candidates = [None] if spec.attack_set is None else list(spec.attack_set)
        best = None
        for b in candidates:
            if b is not None:
                self.b_rep.value = b.ravel()
            _solve(self.prob)
            q = self._clean_cam(pt, T, b)
            val = cam_objective(pS, pt, T, q, R)
            if best is None or val < best[0]:
                best = (val, q, y_channel(hyp_joint(pt, T, q)))
        return best

    def _clean_cam(self, pt, T, b):
        """Feasible hypothesis with state part independent of (x, u) given se."""
        spec, lay = self.spec, self.lay
        ne, na, nd, nu, nx, ny = spec.sizes
        q = lay.q_from(self.m.value, self.w.value)
        kappa = np.maximum(self.kappa.value.reshape(ne, na, nd), 0.0)
        kappa = np.where(self.pS > 0, kappa, 0.0)
        tot = kappa.sum(axis=(1, 2), keepdims=True)
        fallback = self.pS / self.pS.sum(axis=(1, 2), keepdims=True)
        kappa = np.where(tot > 0, kappa / np.where(tot > 0, tot, 1.0), fallback)
        ych = q / np.maximum(q.sum(axis=5, keepdims=True), 1e-300)
        bad = q.sum(axis=5, keepdims=True) <= 1e-300
        ych = np.where(bad, 1.0 / ny, ych)
        q = kappa[:, None, None, :, :, None] * ych
        if b is not None:
            # the hypothesis output channel must equal b exactly
            q = kappa[:, None, None, :, :, None] * np.broadcast_to(
                b.transpose(0, 1, 2)[None, :, None, :, None, :], q.shape
            )
            return q
        if np.isfinite(spec.D2):
            hyp = hyp_joint(pt, T, q)
            val = hyp_distortion(hyp, spec.distortion)
            if val > spec.D2 + 0.5 * FEAS_SLACK:
                anchor = np.zeros_like(q)
                ybest = np.argmin(spec.distortion, axis=1)
                for x in range(nx):
                    anchor[:, x, :, :, :, ybest[x]] = 1.0
                anchor = kappa[:, None, None, :, :, None] * anchor
                base = hyp_distortion(hyp_joint(pt, T, anchor), spec.distortion)
                lam = (spec.D2 - base) / (val - base)
                q = lam * q + (1 - lam) * anchor
        return q
