"""Monte-Carlo simulation of stacked binning with penalised-MMI decoding.

One codeword array per encoder-state type ``lam``. Array ``lam`` has ``M``
columns (one per message) and ``ceil(2^(n rho(lam)))`` rows, where ``rho``
is the planned ``I(U; Se)`` of that type plus ``epsilon``. Every codeword in
array ``lam`` has the same planned U type. The decoder picks the codeword
maximising ``I(u; y sd) - psi(lam)`` over all arrays and reports its column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .method_of_types import (
    CondTypeVector,
    TypeVector,
    enumerate_types,
    sample_uniform_from_cond_type,
)
from .validation import check_positive_int

CODEBOOK_BUDGET = 2**22
PLAN_ENUM_BUDGET = 2_000_000
MINIMAX_BUDGET = 20_000
_LN2 = math.log(2.0)


class BudgetError(RuntimeError):
    """A plan or simulation exceeds its codeword or enumeration budget."""


class ConstraintViolation(AssertionError):
    """Constant-composition, cost or hard-distortion guard fired."""


# ------------------------------------------------------------ planning


@dataclass(frozen=True)
class ArrayPlan:
    lam: tuple
    counts: np.ndarray  # N(se, x, u), integer
    u_counts: tuple
    eu_counts: np.ndarray  # N(se, u)
    i_star: float
    rho: float
    psi: float
    rows: int
    objective: float


@dataclass(frozen=True)
class CodebookPlan:
    spec: object
    n: int
    rate: float
    epsilon: float
    M: int
    arrays: dict

    @property
    def total_codewords(self):
        return sum(a.rows * self.M for a in self.arrays.values())


def _compositions_array(n, k):
    """All length-``k`` compositions of ``n`` as an integer array."""
    if k == 1:
        return np.array([[n]])
    out = []
    for first in range(n + 1):
        rest = _compositions_array(n - first, k - 1)
        out.append(np.column_stack([np.full(len(rest), first), rest]))
    return np.vstack(out)


def _mi_from_joint(p, axis_a, axis_b):
    """Vectorised mutual information between two groups of trailing axes, in bits.

    ``p`` has a leading batch axis; ``axis_a``/``axis_b`` index the rest.
    """
    nd = p.ndim - 1
    all_axes = tuple(range(1, nd + 1))

    def h(keep):
        drop = tuple(a for a in all_axes if a not in keep)
        m = p.sum(axis=drop) if drop else p
        m = m.reshape(len(p), -1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -np.where(m > 0, m * np.log2(np.where(m > 0, m, 1.0)), 0.0).sum(axis=1)

    a = tuple(i + 1 for i in axis_a)
    b = tuple(i + 1 for i in axis_b)
    return h(a) + h(b) - h(a + b)


def _plan_objective(spec, lam_counts, cand, attack_channel):
    """Vectorised ``(J, I(U;Se))`` for candidate counts ``cand[k, se, x, u]``."""
    n = int(sum(lam_counts))
    p_exu = cand / n
    pS = np.asarray(spec.state_pmf)
    cond = pS / np.where(pS.sum(axis=(1, 2), keepdims=True) > 0, pS.sum(axis=(1, 2), keepdims=True), 1.0)
    # joint over (k, e, a, d, u, x, y)
    joint = np.einsum("kexu,ead,xay->keaduxy", p_exu, cond, attack_channel)
    i_uz = _mi_from_joint(joint, (3,), (2, 5))
    i_ue = _mi_from_joint(joint, (3,), (0,))
    return i_uz - i_ue, i_ue


def _minimax_objective(spec, lam_counts, cand):
    """Worst case of ``J`` over the attack class, one convex solve per candidate."""
    from .programs import CapacityInner

    if len(cand) > MINIMAX_BUDGET:
        raise BudgetError(f"{len(cand)} candidates exceed the minimax budget {MINIMAX_BUDGET}")
    n = int(sum(lam_counts))
    pS = np.asarray(spec.state_pmf)
    cond = pS / np.where(pS.sum(axis=(1, 2), keepdims=True) > 0, pS.sum(axis=(1, 2), keepdims=True), 1.0)
    inner = CapacityInner(spec)
    # the empirical state type replaces the state marginal
    inner.pS = cond * (np.array(lam_counts, float) / n)[:, None, None]
    vals, iue = [], []
    for c in cand:
        rows = c.sum(axis=(1, 2), keepdims=True)
        T = np.where(rows > 0, c / np.where(rows > 0, rows, 1), 1.0 / c[0].size)
        vals.append(inner.solve(T)[0])
        iue.append(float(_mi_from_joint((c.sum(axis=1) / n)[None], (0,), (1,))[0]))
    return np.array(vals), np.array(iue)


def plan_codebook(spec, n, R, epsilon=0.05, attack=None, mode="proxy", budget=CODEBOOK_BUDGET,
                  enum_budget=PLAN_ENUM_BUDGET):
    """Choose, for every encoder-state type, the conditional type of (x, u) and the array depth.

    ``mode="proxy"`` maximises ``J`` against the planning channel of
    ``attack``; ``mode="minimax"`` maximises the worst case over the attack
    class (one convex solve per candidate, so only for small ``n``).
    """
    n = check_positive_int(n, "n")
    if R < 0 or epsilon < 0:
        raise ValueError("R and epsilon must be nonnegative")
    attack = attack or AttackModel.default(spec)
    ne, na, nd, L, nx, ny = spec.sizes
    M = int(math.ceil(2.0 ** (n * R) - 1e-9)) if R > 0 else 1
    M = max(M, 1)
    arrays = {}
    for lam in enumerate_types(ne, n):
        per_row = [_compositions_array(c, nx * L) if c > 0 else np.zeros((1, nx * L), int) for c in lam.counts]
        total = int(np.prod([len(r) for r in per_row]))
        if total > enum_budget:
            raise BudgetError(f"type {lam.counts}: {total} conditional types exceed {enum_budget}")
        grids = np.meshgrid(*[np.arange(len(r)) for r in per_row], indexing="ij")
        cand = np.stack([per_row[e][g.ravel()] for e, g in enumerate(grids)], axis=1)
        cand = cand.reshape(-1, ne, nx, L)
        cost = np.einsum("kexu,ex->k", cand, spec.cost)
        ok = cost <= n * spec.D1 + 1e-9
        if not np.any(ok):
            raise BudgetError(f"type {lam.counts}: no conditional type meets the cost bound")
        cand = cand[ok]
        if mode == "proxy":
            obj, iue = _plan_objective(spec, lam.counts, cand, attack.channel)
        elif mode == "minimax":
            obj, iue = _minimax_objective(spec, lam.counts, cand)
        else:
            raise ValueError(f"unknown plan mode {mode!r}")
        # lowest enumeration index among (numerical) ties
        best = int(np.flatnonzero(obj >= obj.max() - 1e-12)[0])
        counts = cand[best]
        i_star = max(float(iue[best]), 0.0)
        rho = i_star + epsilon
        rows = int(math.ceil(2.0 ** (n * rho) - 1e-9))
        arrays[lam.counts] = ArrayPlan(
            lam=lam.counts,
            counts=counts,
            u_counts=tuple(int(v) for v in counts.sum(axis=(0, 1))),
            eu_counts=counts.sum(axis=1),
            i_star=i_star,
            rho=rho,
            psi=rho,
            rows=rows,
            objective=float(obj[best]),
        )
        if sum(a.rows * M for a in arrays.values()) > budget:
            raise BudgetError(f"codebook budget {budget} exceeded at type {lam.counts}")
    return CodebookPlan(spec, n, float(R), float(epsilon), M, arrays)


# ------------------------------------------------------------ codebooks


@dataclass
class CodebookStack:
    plan: CodebookPlan
    codewords: dict  # lam -> int array (rows, M, n)
    _flat: tuple = field(default=None, repr=False)

    def flat(self):
        """All codewords stacked, with their array key, row and column."""
        if self._flat is None:
            keys, cws, rows, cols, psis = [], [], [], [], []
            for lam, arr in self.codewords.items():
                r, m, n = arr.shape
                cws.append(arr.reshape(r * m, n))
                rr, cc = np.meshgrid(np.arange(r), np.arange(m), indexing="ij")
                rows.append(rr.ravel())
                cols.append(cc.ravel())
                keys.extend([lam] * (r * m))
                psis.append(np.full(r * m, self.plan.arrays[lam].psi))
            self._flat = (np.vstack(cws), keys, np.concatenate(rows), np.concatenate(cols), np.concatenate(psis))
        return self._flat


def _draw_type_rows(counts, k, n, rng):
    base = np.repeat(np.arange(len(counts)), counts).astype(np.int8)
    return rng.permuted(np.tile(base, (k, 1)), axis=1)


def draw_codebook(plan, rng):
    """Codewords drawn independently and uniformly from each array's U type class."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    out = {}
    for lam in sorted(plan.arrays):
        a = plan.arrays[lam]
        k = a.rows * plan.M
        out[lam] = _draw_type_rows(a.u_counts, k, plan.n, rng).reshape(a.rows, plan.M, plan.n)
    return CodebookStack(plan, out)


# ------------------------------------------------------------ encoder


@dataclass(frozen=True)
class Encoding:
    u: np.ndarray
    x: np.ndarray
    encoding_error: bool
    row: int | None


def _joint_counts(a, b, na, nb):
    return np.bincount(a.astype(np.int64) * nb + b, minlength=na * nb).reshape(na, nb)


def encode(stack, s_e, m, rng):
    """Encode message ``m`` (1-based) given the encoder state sequence ``s_e``."""
    plan = stack.plan
    spec = plan.spec
    ne, _, _, L, nx, _ = spec.sizes
    s_e = np.asarray(s_e, dtype=np.int64)
    if not 1 <= m <= plan.M:
        raise ValueError(f"message {m} outside 1..{plan.M}")
    lam = tuple(int(c) for c in np.bincount(s_e, minlength=ne))
    a = plan.arrays[lam]
    column = stack.codewords[lam][:, m - 1, :]
    target = a.eu_counts
    match = [r for r in range(column.shape[0]) if np.array_equal(_joint_counts(s_e, column[r], ne, L), target)]
    if match:
        row = int(match[rng.integers(len(match))]) if len(match) > 1 else match[0]
        u = column[row].astype(np.int64)
        err = False
    else:
        ct = CondTypeVector(TypeVector(lam), tuple(tuple(int(v) for v in r) for r in target))
        u = sample_uniform_from_cond_type(ct, s_e, rng)
        row, err = None, True
    # x uniform over the planned conditional type given (se, u)
    g = s_e * L + u
    given = TypeVector(tuple(int(v) for v in np.bincount(g, minlength=ne * L)))
    rows = [tuple(int(v) for v in a.counts[e, :, uu]) for e in range(ne) for uu in range(L)]
    x = sample_uniform_from_cond_type(CondTypeVector(given, tuple(rows)), g, rng)
    _assert_composition(spec, a, s_e, u, x, plan.n)
    return Encoding(u, x, err, row)


def _assert_composition(spec, a, s_e, u, x, n):
    ne, _, _, L, nx, _ = spec.sizes
    got = np.zeros((ne, nx, L), dtype=np.int64)
    np.add.at(got, (s_e, x, u), 1)
    if not np.array_equal(got, a.counts):
        raise ConstraintViolation("emitted (se, x, u) joint type differs from the plan")
    if spec.cost[s_e, x].sum() > n * spec.D1 + 1e-9:
        raise ConstraintViolation("maximum-cost constraint violated")


# ------------------------------------------------------------ attacks


@dataclass
class AttackModel:
    """``kind="cdmc"``: i.i.d. ``channel``; ``kind="cam"``: type-uniform output through ``Lambda``.

    ``Lambda`` maps the joint type counts of ``(x, sa)`` (shape |X| x |Sa|) to
    output counts of shape (|X| |Sa|, |Y|). ``channel`` is also the planning
    channel used by :func:`plan_codebook`.
    """

    kind: str
    channel: np.ndarray
    Lambda: object = None
    spec: object = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in ("cdmc", "cam"):
            raise ValueError(f"attack kind must be 'cdmc' or 'cam', got {self.kind!r}")
        self.channel = np.asarray(self.channel, float)

    @classmethod
    def default(cls, spec, kind="cdmc"):
        """Symmetric channel spending exactly ``D2`` per input symbol where possible."""
        nx, na, ny = spec.n_x, spec.sizes[1], spec.n_y
        d = spec.distortion
        ch = np.zeros((nx, ny))
        for x in range(nx):
            y0 = int(np.argmin(d[x]))
            others = [y for y in range(ny) if y != y0]
            mean_other = d[x, others].mean() if others else 0.0
            w = min(1.0, spec.D2 / mean_other) if mean_other > 0 and np.isfinite(spec.D2) else 0.0
            ch[x, y0] = 1.0 - w
            for y in others:
                ch[x, y] = w / len(others)
        return cls(kind, np.repeat(ch[:, None, :], na, axis=1), spec=spec)

    def output_type(self, xa_counts, n):
        key = tuple(map(int, np.ravel(xa_counts)))
        if key not in self._cache:
            if self.Lambda is not None:
                out = np.asarray(self.Lambda(np.asarray(xa_counts)), dtype=np.int64)
            else:
                out = mi_minimizing_lambda(self.spec, np.asarray(xa_counts), n)
            self._cache[key] = out
        return self._cache[key]


def mi_minimizing_lambda(spec, xa_counts, n):
    """Output conditional type in the hard-distortion class minimising empirical ``I(X Sa; Y)``.

    Exhaustive over all conditional types; ties go to the first in enumeration order.
    """
    nx, na, ny = spec.n_x, spec.sizes[1], spec.n_y
    rows = np.asarray(xa_counts).reshape(nx * na)
    per_row = [_compositions_array(int(c), ny) if c > 0 else np.zeros((1, ny), int) for c in rows]
    total = int(np.prod([len(r) for r in per_row]))
    if total > PLAN_ENUM_BUDGET:
        raise BudgetError(f"{total} output types exceed the enumeration budget")
    grids = np.meshgrid(*[np.arange(len(r)) for r in per_row], indexing="ij")
    cand = np.stack([per_row[i][g.ravel()] for i, g in enumerate(grids)], axis=1)
    d_rows = np.repeat(spec.distortion, na, axis=0)
    dist = np.einsum("kiy,iy->k", cand, d_rows)
    ok = dist <= n * spec.D2 + 1e-9
    cand = cand[ok]
    mi = _mi_from_joint(cand / n, (0,), (1,))
    best = int(np.flatnonzero(mi <= mi.min() + 1e-12)[0])
    return cand[best]


def attack(model, x, s_a, rng):
    """Channel output ``y`` for input ``x`` and adversary state ``s_a``."""
    x = np.asarray(x, dtype=np.int64)
    s_a = np.asarray(s_a, dtype=np.int64)
    ch = model.channel
    nx, na, ny = ch.shape
    if model.kind == "cdmc":
        cdf = np.cumsum(ch[x, s_a], axis=1)
        r = rng.random(len(x))[:, None]
        y = (r >= cdf[:, :-1]).sum(axis=1)
        return y.astype(np.int64)
    n = len(x)
    g = x * na + s_a
    xa = np.bincount(g, minlength=nx * na).reshape(nx, na)
    out = model.output_type(xa, n)
    spec = model.spec
    if spec is not None:
        d_rows = np.repeat(spec.distortion, na, axis=0)
        if float((out * d_rows).sum()) > n * spec.D2 + 1e-9:
            raise ConstraintViolation("CAM output type violates the distortion constraint")
    ct = CondTypeVector(TypeVector(tuple(int(v) for v in xa.ravel())), tuple(tuple(int(v) for v in r) for r in out))
    return sample_uniform_from_cond_type(ct, g, rng)


# ------------------------------------------------------------ decoder


def mpmi_scores(stack, y, s_d):
    """Penalised empirical MI ``I(u; y sd) - psi`` for every codeword, in bits."""
    plan = stack.plan
    _, _, nd, L, _, ny = plan.spec.sizes
    cw, keys, rows, cols, psis = stack.flat()
    z = np.asarray(s_d, dtype=np.int64) * ny + np.asarray(y, dtype=np.int64)
    nz = nd * ny
    n = len(z)
    zone = np.zeros((n, nz))
    zone[np.arange(n), z] = 1.0
    counts = np.stack([(cw == u).astype(float) @ zone for u in range(L)], axis=1)  # (K, L, nz)
    cu = counts.sum(axis=2, keepdims=True)
    cz = zone.sum(axis=0)[None, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(counts > 0, counts * np.log2(counts * n / (cu * cz)), 0.0)
    return t.sum(axis=(1, 2)) / n - psis


def mpmi_decode(stack, y, s_d, tol=1e-12):
    """Decoded message (1-based), or ``None`` when the best scores span several columns."""
    scores = mpmi_scores(stack, y, s_d)
    _, _, _, cols, _ = stack.flat()
    top = np.flatnonzero(scores >= scores.max() - tol)
    columns = set(int(c) for c in cols[top])
    if len(columns) > 1:
        return None
    return int(cols[top[0]]) + 1


def gmap_scores(stack, y, s_d):
    """``(1/n) log2 p^(u | y sd) + H(U type) - rho`` for every codeword.

    With ``psi = rho`` this equals :func:`mpmi_scores` up to rounding.
    """
    plan = stack.plan
    _, _, nd, L, _, ny = plan.spec.sizes
    cw, keys, rows, cols, psis = stack.flat()
    z = np.asarray(s_d, dtype=np.int64) * ny + np.asarray(y, dtype=np.int64)
    n = len(z)
    out = np.empty(len(cw))
    for i in range(len(cw)):
        jc = _joint_counts(cw[i].astype(np.int64), z, L, nd * ny)
        cz = jc.sum(axis=0)
        post = jc[cw[i], z] / cz[z]
        lam = keys[i]
        u_counts = np.array(plan.arrays[lam].u_counts, float) / n
        h_u = -sum(p * math.log2(p) for p in u_counts if p > 0)
        out[i] = np.log2(post).sum() / n + h_u - plan.arrays[lam].rho
    return out


# ------------------------------------------------------------ simulation


@dataclass
class SimConfig:
    spec: object
    n: int
    R: float
    epsilon: float = 0.05
    trials: int = 1000
    seed: int = 0
    codebook_budget: int = CODEBOOK_BUDGET
    attack: AttackModel | None = None
    fixed_codebook: bool = False
    plan_mode: str = "proxy"

    def resolved_attack(self):
        return self.attack or AttackModel.default(self.spec)


@dataclass(frozen=True)
class PeEstimate:
    p_e_hat: float
    stderr: float
    encoding_error_rate: float
    trials: int
    cam_violations: int = 0
    total_codewords: int = 0


def _trial_rng(seed, t):
    return np.random.default_rng(np.random.SeedSequence([int(seed) % 2**63, int(t)]))


def sample_states(spec, n, rng):
    pS = np.asarray(spec.state_pmf)
    flat = rng.choice(pS.size, size=n, p=pS.ravel())
    e, a, d = np.unravel_index(flat, pS.shape)
    return e.astype(np.int64), a.astype(np.int64), d.astype(np.int64)


def estimate_pe(cfg, plan=None):
    """Monte-Carlo error probability with a fresh codebook per trial (unless ``fixed_codebook``)."""
    spec = cfg.spec
    atk = cfg.resolved_attack()
    plan = plan or plan_codebook(spec, cfg.n, cfg.R, cfg.epsilon, atk, cfg.plan_mode, cfg.codebook_budget)
    if plan.total_codewords > cfg.codebook_budget:
        raise BudgetError(f"{plan.total_codewords} codewords exceed the budget {cfg.codebook_budget}")
    fixed = draw_codebook(plan, _trial_rng(cfg.seed, -1 % 2**63)) if cfg.fixed_codebook else None
    errors = enc_errors = cam_violations = 0
    for t in range(cfg.trials):
        rng = _trial_rng(cfg.seed, t)
        stack = fixed or draw_codebook(plan, rng)
        s_e, s_a, s_d = sample_states(spec, cfg.n, rng)
        m = int(rng.integers(1, plan.M + 1))
        enc = encode(stack, s_e, m, rng)
        y = attack(atk, enc.x, s_a, rng)
        if atk.kind == "cam":
            # realised distortion, checked independently of the type-level guard
            cam_violations += spec.distortion[enc.x, y].sum() > cfg.n * spec.D2 + 1e-9
        m_hat = mpmi_decode(stack, y, s_d)
        errors += m_hat != m
        enc_errors += enc.encoding_error
    p = errors / cfg.trials
    return PeEstimate(
        p_e_hat=p,
        stderr=math.sqrt(p * (1 - p) / cfg.trials),
        encoding_error_rate=enc_errors / cfg.trials,
        trials=cfg.trials,
        cam_violations=int(cam_violations),
        total_codewords=plan.total_codewords,
    )


# ------------------------------------------------------------ random modulation


@dataclass
class ModulatedCode:
    """Encoder ``pi^-1 f(pi se, m)`` and decoder ``g(pi y, pi sd)`` around a prototype stack."""

    stack: CodebookStack
    pi: np.ndarray

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=np.int64)
        if sorted(self.pi.tolist()) != list(range(self.stack.plan.n)):
            raise ValueError("pi must be a permutation of range(n)")
        self.inv = np.argsort(self.pi)

    def permute(self, seq):
        return np.asarray(seq)[self.pi]

    def unpermute(self, seq):
        return np.asarray(seq)[self.inv]

    def encode(self, s_e, m, rng):
        enc = encode(self.stack, self.permute(s_e), m, rng)
        return Encoding(self.unpermute(enc.u), self.unpermute(enc.x), enc.encoding_error, enc.row)

    def decode(self, y, s_d):
        return mpmi_decode(self.stack, self.permute(y), self.permute(s_d))


def apply_random_modulation(stack, pi):
    return ModulatedCode(stack, pi)
