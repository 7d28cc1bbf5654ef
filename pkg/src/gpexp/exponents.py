"""Capacity ``C_L`` and random-coding error exponents for the CDMC and CAM models.

The exponent is a three-level program::

    E(R) = min_{pt(se)}  max_{T in P(L, D1)}  inner(pt, T, R)

where ``inner`` is the convex program of :mod:`gpexp.programs`. The max over
transmit channels is nonconvex; it is searched with the elitist GA seeded by
a few structured designs and finished by a Nelder-Mead polish. The outer min
over ``pt`` is bounded below by ``D(pt || p_Se)``, so only a divergence ball
around ``p_Se`` needs to be searched. For a binary ``Se`` that ball is an
interval, scanned on a coarse grid and then refined by golden-section search
to ``theta_tol``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from sklearn.base import BaseEstimator

from .ga import GaConfig, LinearConstraint, SimplexProductSpace, optimize
from .programs import CapacityInner, ExponentInner
from .scenarios import ScenarioSpec

MODELS = ("cdmc", "cam")

#: GA budget used for the transmit-channel search unless overridden.
EXPONENT_GA = GaConfig(population=24, generations=20, elite_count=2, stall_patience=8)


@dataclass(frozen=True)
class SolverConfig:
    """Search budgets for the capacity and exponent programs."""

    ga: GaConfig = EXPONENT_GA
    n_restarts: int = 4
    polish_evals: int = 400
    local_evals: int = 250
    n_coarse: int = 6
    theta_tol: float = 1e-3
    seed: int = 0

    def with_seed(self, seed):
        return replace(self, seed=int(seed), ga=replace(self.ga, seed=int(seed)))


@dataclass(frozen=True)
class ExponentProblem:
    spec: ScenarioSpec
    model: str
    rate: float
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if not np.isfinite(self.rate) or self.rate < 0:
            raise ValueError(f"rate must be a nonnegative real, got {self.rate!r}")


@dataclass
class ExponentResult:
    value: float
    rate: float
    model: str
    p_tilde: np.ndarray
    transmit: np.ndarray
    hyp_channel: np.ndarray
    attack: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": self.value,
            "rate": self.rate,
            "model": self.model,
            "witnesses": {
                "p_tilde_se": self.p_tilde.tolist(),
                "p_xu_given_se": self.transmit.tolist(),
                "p_tilde_ysasd_given_xuse": self.hyp_channel.tolist(),
                "p_y_given_xsa": self.attack.tolist(),
            },
            "diagnostics": _jsonable(self.diagnostics),
        }


@dataclass
class CapacityResult:
    value: float
    transmit: np.ndarray
    attack: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ------------------------------------------------------------ transmit space


def transmit_space(spec):
    """GA space for ``p(x, u | se)``: one block of size |X| L per state symbol."""
    ne, _, _, L, nx, _ = spec.sizes
    constraints = []
    if np.isfinite(spec.D1):
        coef = (spec.p_se[:, None, None] * spec.cost[:, :, None] * np.ones(L)).ravel()
        constraints.append(LinearConstraint(coef, spec.D1))
    return SimplexProductSpace(
        blocks=[(nx * L, 0.0)] * ne,
        constraints=constraints,
        anchor=spec.zero_cost_transmit().ravel(),
    )


def structured_seeds(spec):
    """Hand-built transmit channels: U a function of (X, Se), X a noisy copy of the zero-cost symbol."""
    ne, _, _, L, nx, _ = spec.sizes
    x0 = np.argmin(spec.cost, axis=1)
    betas = [1.0, 0.75, 0.5, 0.25]
    maps = [
        lambda x, e: x % L,
        lambda x, e: (x + e) % L,
        lambda x, e: (x + 1) % L,
    ]
    seeds = []
    for f in maps:
        for beta in betas:
            T = np.zeros((ne, nx, L))
            for e in range(ne):
                px = np.full(nx, beta / nx)
                px[x0[e]] += 1.0 - beta
                for x in range(nx):
                    T[e, x, f(x, e)] += px[x]
            seeds.append(T.ravel())
    seeds.append(np.full(ne * nx * L, 1.0 / (nx * L)))
    return seeds


def _local_max(fn, space, start, maxfev):
    """Nelder-Mead over per-block logits, starting at ``start``."""
    z0 = np.log(np.maximum(start, 1e-6))
    cache = {}

    def point(z):
        genes = np.empty_like(z)
        for a, b in zip(space.offsets[:-1], space.offsets[1:]):
            w = np.exp(z[a:b] - z[a:b].max())
            genes[a:b] = w / w.sum()
        return space.repair(space.decode(genes))[0]

    def neg(z):
        p = point(z)
        key = p.tobytes()
        if key not in cache:
            cache[key] = fn(p)
        return -cache[key]

    res = minimize(
        neg,
        z0,
        method="Nelder-Mead",
        options={"maxfev": maxfev, "xatol": 1e-7, "fatol": 1e-9, "adaptive": True},
    )
    best = point(res.x)
    return best, -neg(res.x)


def _search_max(fn, space, seeds, cfg, ga_cfg, restarts, polish):
    """Global GA search with restarts, then a local polish of the winner."""
    seed_vals = sorted(((fn(s), i) for i, s in enumerate(seeds)), key=lambda t: (-t[0], t[1]))
    top = [seeds[i] for _, i in seed_vals[: max(1, ga_cfg.population // 3)]]
    runs = []
    for r in range(restarts):
        gcfg = replace(ga_cfg, seed=(ga_cfg.seed * 7919 + r) % 2**63)
        res = optimize(fn, space, gcfg, "max", initial=top)
        runs.append(res)
    vals = [r.value for r in runs]
    best = runs[int(np.argmax(vals))]
    x, v = best.best, best.value
    if polish > 0:
        x2, v2 = _local_max(fn, space, x, polish)
        if v2 > v:
            x, v = x2, v2
    return x, v, {"restart_values": vals, "restart_spread": float(max(vals) - min(vals)),
                  "ga_trace": best.trace}


# ------------------------------------------------------------ capacity


def capacity_CL(spec, solver=None, extra_seeds=()):
    """``C_L = max_T min_{a in A} [I(U; Y Sd) - I(U; Se)]`` with witnesses."""
    solver = solver or SolverConfig()
    inner = CapacityInner(spec)
    space = transmit_space(spec)
    ne, _, _, L, nx, _ = spec.sizes

    def fn(flat):
        return inner.solve(flat.reshape(ne, nx, L))[0]

    seeds = structured_seeds(spec) + [np.asarray(s).ravel() for s in extra_seeds]
    x, v, diag = _search_max(fn, space, seeds, solver, solver.ga, solver.n_restarts, solver.polish_evals)
    T = x.reshape(ne, nx, L)
    val, atk = inner.solve(T)
    return CapacityResult(float(val), T, atk, diag)


# ------------------------------------------------------------ exponents


def _kl_bits(p, q):
    p, q = np.asarray(p, float), np.asarray(q, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1) / np.where(q > 0, q, 1e-300)), 0.0)
    return float(terms.sum())


class _ExponentEngine:
    """Holds the compiled inner program and the best transmit channels seen so far."""

    def __init__(self, spec, model, rate, solver, extra_seeds=()):
        self.spec, self.model, self.rate, self.solver = spec, model, float(rate), solver
        self.inner = ExponentInner(spec, model)
        self.space = transmit_space(spec)
        self.shape = (spec.sizes[0], spec.sizes[4], spec.sizes[3])
        self.seeds = structured_seeds(spec) + [np.asarray(s).ravel() for s in extra_seeds]
        self.evals = {}
        self.n_inner = 0

    def inner_value(self, pt, flat):
        self.n_inner += 1
        return self.inner.solve(pt, flat.reshape(self.shape), self.rate)[0]

    def max_over_T(self, pt, global_search, warm):
        fn = lambda flat: self.inner_value(pt, flat)
        if global_search:
            x, v, diag = _search_max(
                fn, self.space, self.seeds + warm, self.solver, self.solver.ga,
                self.solver.n_restarts, self.solver.polish_evals,
            )
        else:
            cands = warm + self.seeds
            vals = [fn(c) for c in cands]
            i = int(np.argmax(vals))
            x, v = _local_max(fn, self.space, cands[i], self.solver.local_evals)
            if vals[i] > v:
                x, v = cands[i], vals[i]
            diag = {}
        return x, float(v), diag

    def evaluate(self, theta, global_search=False):
        key = round(float(theta), 12)
        if key in self.evals:
            return self.evals[key]
        pt = np.array([1.0 - theta, theta]) if self.shape[0] == 2 else np.array([1.0])
        warm = self._warm(theta)
        x, v, diag = self.max_over_T(pt, global_search, warm)
        self.evals[key] = (v, x, diag)
        return self.evals[key]

    def _warm(self, theta):
        if not self.evals:
            return []
        keys = sorted(self.evals, key=lambda k: (abs(k - theta), k))
        return [self.evals[k][1] for k in keys[:2]]


def _exponent(problem, extra_seeds=()):
    spec, solver = problem.spec, problem.solver
    eng = _ExponentEngine(spec, problem.model, problem.rate, solver, extra_seeds)
    ne = spec.sizes[0]
    p_se = spec.p_se
    if ne == 1:
        theta_star = 0.0
        value, x, diag = eng.evaluate(0.0, global_search=True)
    elif ne == 2:
        theta0 = float(p_se[1])
        v0, x0, diag = eng.evaluate(theta0, global_search=True)
        theta_star, value = theta0, v0
        if v0 > 1e-12:
            theta_star, value = _theta_search(eng, theta0, v0, p_se, solver)
        x = eng.evals[round(theta_star, 12)][1]
    else:
        return _exponent_general(problem, eng)
    pt = np.array([1.0 - theta_star, theta_star]) if ne == 2 else np.array([1.0])
    T = x.reshape(eng.shape)
    val, q, atk = eng.inner.solve(pt, T, problem.rate)
    diag = dict(diag)
    diag.update(
        theta_evals=sorted((k, v[0]) for k, v in eng.evals.items()),
        n_inner_solves=eng.n_inner,
    )
    return ExponentResult(max(float(val), 0.0), problem.rate, problem.model, pt, T, q, atk, diag)


def _theta_search(eng, theta0, v0, p_se, solver):
    """Coarse scan plus golden-section refinement of the outer min over pt."""

    def kl(t):
        return _kl_bits([1 - t, t], p_se)

    def edge(direction):
        lo, hi = theta0, (1.0 if direction > 0 else 0.0)
        if kl(hi) <= v0:
            return hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if kl(mid) <= v0:
                lo = mid
            else:
                hi = mid
        return lo

    a, b = edge(-1), edge(+1)
    grid = np.linspace(a, b, solver.n_coarse + 2)[1:-1]
    pts = sorted(set([theta0] + [float(t) for t in grid]))
    for t in pts:
        eng.evaluate(t)
    vals = [eng.evals[round(t, 12)][0] for t in pts]
    i = int(np.argmin(vals))
    lo = pts[i - 1] if i > 0 else a
    hi = pts[i + 1] if i + 1 < len(pts) else b
    if hi - lo > solver.theta_tol:
        res = minimize_scalar(
            lambda t: eng.evaluate(float(t))[0],
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": solver.theta_tol},
        )
        t_ref = float(res.x)
        eng.evaluate(t_ref)
    best_key = min(eng.evals, key=lambda k: (eng.evals[k][0], abs(k - theta0)))
    return float(best_key), eng.evals[best_key][0]


def _exponent_general(problem, eng):
    """Outer min over a larger state alphabet by a small GA on the simplex."""
    spec, solver = problem.spec, problem.solver
    ne = spec.sizes[0]
    space = SimplexProductSpace([(ne, 0.0)])
    cache = {}

    def value(pt):
        key = pt.tobytes()
        if key not in cache:
            x, v, _ = eng.max_over_T(pt, not cache, [c[1] for c in list(cache.values())[-2:]])
            cache[key] = (v, x)
        return cache[key][0]

    cfg = solver.ga.scaled(2.0, level=1)
    res = optimize(value, space, cfg, "min", initial=[spec.p_se])
    pt = res.best
    T = cache[pt.tobytes()][1].reshape(eng.shape)
    val, q, atk = eng.inner.solve(pt, T, problem.rate)
    return ExponentResult(max(float(val), 0.0), problem.rate, problem.model, pt, T, q, atk,
                          {"ga_trace": res.trace, "n_inner_solves": eng.n_inner})


def er_cdmc(problem, extra_seeds=()):
    """Random-coding exponent against a compound DMC adversary."""
    if problem.model != "cdmc":
        raise ValueError("er_cdmc needs model='cdmc'")
    return _exponent(problem, extra_seeds)


def er_cam(problem, extra_seeds=()):
    """Random-coding exponent against an arbitrary-memory adversary."""
    if problem.model != "cam":
        raise ValueError("er_cam needs model='cam'")
    return _exponent(problem, extra_seeds)


def error_exponent(problem, extra_seeds=()):
    return _exponent(problem, extra_seeds)


def sweep_rates(spec, model, rates, solver=None, capacity=True):
    """Exponent values over a rate grid, with rate-to-rate warm starts.

    Returns ``(rows, results, cap)`` where each row is ``(R, E_r, C_L)``.
    """
    solver = solver or SolverConfig()
    results, seeds = [], []
    for R in rates:
        res = _exponent(ExponentProblem(spec, model, float(R), solver), extra_seeds=seeds[-3:])
        results.append(res)
        seeds.append(res.transmit.ravel())
    cap = capacity_CL(spec, solver, extra_seeds=seeds) if capacity else None
    c = cap.value if cap is not None else math.nan
    rows = [(r.rate, r.value, c) for r in results]
    return rows, results, cap


CSV_COLUMNS = ("rate", "value", "model", "preset", "L", "seed")


def results_to_csv(results, spec, seed, header=None):
    """CSV text with columns rate, value, model, preset, L, seed."""
    buf = io.StringIO()
    for line in header or []:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow([repr(float(r.rate)), repr(float(r.value)), r.model, spec.preset, spec.L, seed])
    return buf.getvalue()


def results_to_json(results, spec, seed):
    return json.dumps(
        {"scenario": _jsonable(spec.describe()), "seed": seed, "results": [r.to_dict() for r in results]},
        indent=2,
        sort_keys=True,
    )


# ------------------------------------------------------------ estimator facade


class ExponentEstimator(BaseEstimator):
    """Estimator-style wrapper: ``fit(spec)`` computes the exponent at ``rate``.

    Fitted attributes: ``value_``, ``result_``.
    """

    def __init__(self, model="cdmc", rate=0.0, n_restarts=4, population=24, generations=20, seed=0):
        self.model = model
        self.rate = rate
        self.n_restarts = n_restarts
        self.population = population
        self.generations = generations
        self.seed = seed

    def _solver(self):
        ga = replace(EXPONENT_GA, population=self.population, generations=self.generations, seed=self.seed)
        return SolverConfig(ga=ga, n_restarts=self.n_restarts, seed=self.seed)

    def fit(self, spec, y=None):
        self.spec_ = spec
        self.result_ = _exponent(ExponentProblem(spec, self.model, self.rate, self._solver()))
        self.value_ = self.result_.value
        return self

    def predict(self, rates):
        """Exponents at other rates for the fitted scenario, warm-started from the fit."""
        if not hasattr(self, "result_"):
            raise AttributeError("call fit(spec) first")
        seeds = [self.result_.transmit.ravel()]
        out = []
        for R in np.atleast_1d(rates):
            res = _exponent(ExponentProblem(self.spec_, self.model, float(R), self._solver()), seeds)
            out.append(res.value)
        return np.array(out)


class CapacityEstimator(BaseEstimator):
    """``fit(spec)`` computes ``C_L``; fitted attributes ``value_`` and ``result_``."""

    def __init__(self, n_restarts=4, population=24, generations=20, seed=0):
        self.n_restarts = n_restarts
        self.population = population
        self.generations = generations
        self.seed = seed

    def fit(self, spec, y=None):
        ga = replace(EXPONENT_GA, population=self.population, generations=self.generations, seed=self.seed)
        self.result_ = capacity_CL(spec, SolverConfig(ga=ga, n_restarts=self.n_restarts, seed=self.seed))
        self.value_ = self.result_.value
        return self
