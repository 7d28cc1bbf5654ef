"""Elitist genetic algorithm over products of probability simplices.

The search space is a list of simplex blocks plus optional linear upper-bound
constraints. Infeasible candidates are pulled back onto the feasible set by
mixing with a known feasible anchor; the constraints are linear, so the
largest feasible mixing weight has a closed form. Without an anchor the
violation is penalised instead.

Randomness is drawn from a fresh stream per ``(seed, generation, index)``,
which makes a run independent of evaluation order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .validation import check_positive_int

PENALTY = 1e6


class EmptyFeasibleSetError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearConstraint:
    """``coef @ candidate <= bound`` on the concatenated block vector."""

    coef: np.ndarray
    bound: float

    def value(self, flat):
        return float(np.dot(self.coef, flat))


@dataclass
class SimplexProductSpace:
    """Product of simplices with optional linear constraints.

    Parameters
    ----------
    blocks : list of (size, eps)
        Each block decodes to a pmf of ``size`` entries, all at least ``eps``.
    constraints : list of LinearConstraint
    anchor : array or None
        A feasible point used to repair constraint violations.
    """

    blocks: list
    constraints: list = field(default_factory=list)
    anchor: np.ndarray | None = None
    slack: float = 1e-9

    def __post_init__(self):
        self.blocks = [(check_positive_int(int(s), "block size"), float(eps)) for s, eps in self.blocks]
        for s, eps in self.blocks:
            if eps < 0 or eps * s > 1:
                raise ValueError(f"block floor {eps} infeasible for size {s}")
        self.sizes = [s for s, _ in self.blocks]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)
        self.dim = int(self.offsets[-1])
        if self.anchor is not None:
            anchor = np.asarray(self.anchor, dtype=float).ravel()
            if anchor.size != self.dim:
                raise ValueError(f"anchor has {anchor.size} entries, space has {self.dim}")
            if self.violation(anchor) > self.slack:
                raise ValueError("anchor violates the constraints")
            self.anchor = anchor

    @property
    def is_singleton(self):
        return all(s == 1 for s in self.sizes)

    def split(self, flat):
        return [flat[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def violation(self, flat):
        return sum(max(0.0, c.value(flat) - c.bound) for c in self.constraints)

    def decode(self, genes):
        """Map nonnegative genes to a point on the product of simplices."""
        genes = np.maximum(np.asarray(genes, dtype=float), 0.0)
        out = np.empty(self.dim)
        for (s, eps), a, b in zip(self.blocks, self.offsets[:-1], self.offsets[1:]):
            g = genes[a:b]
            tot = g.sum()
            p = g / tot if tot > 0 else np.full(s, 1.0 / s)
            out[a:b] = eps + (1.0 - s * eps) * p
        return out

    def repair(self, flat):
        """Return ``(candidate, residual violation)`` after anchor mixing."""
        viol = self.violation(flat)
        if viol <= self.slack or self.anchor is None:
            return flat, viol
        lam = 1.0
        for c in self.constraints:
            v, va = c.value(flat), c.value(self.anchor)
            if v > c.bound and v > va:
                lam = min(lam, (c.bound - va) / (v - va))
        lam = max(0.0, min(1.0, lam))
        out = lam * flat + (1.0 - lam) * self.anchor
        # step back slightly if rounding left us just outside
        while self.violation(out) > self.slack and lam > 0:
            lam = max(0.0, lam - 1e-12 - 1e-9 * lam)
            out = lam * flat + (1.0 - lam) * self.anchor
        return out, self.violation(out)

    def random_genes(self, rng):
        return rng.exponential(1.0, size=self.dim)


@dataclass(frozen=True)
class GaConfig:
    population: int = 200
    generations: int = 600
    elite_count: int = 2
    mutation_scale: float = 0.05
    mutation_rate: float = 0.2
    crossover_rate: float = 0.7
    seed: int = 0
    stall_patience: int = 100
    tournament: int = 3
    repair_attempts: int = 1000

    def __post_init__(self):
        check_positive_int(self.population, "population")
        check_positive_int(self.generations, "generations")
        check_positive_int(self.elite_count, "elite_count")
        if self.elite_count >= self.population:
            raise ValueError("elite_count must be smaller than population")
        if not 0 <= self.crossover_rate <= 1 or not 0 <= self.mutation_rate <= 1:
            raise ValueError("rates must lie in [0, 1]")
        if self.mutation_scale < 0:
            raise ValueError("mutation_scale must be nonnegative")

    def scaled(self, factor, level=0):
        """Budget shrunk by ``factor`` with a level-specific seed."""
        pop = max(self.elite_count + 2, int(math.ceil(self.population / factor)))
        return replace(
            self,
            population=pop,
            generations=max(2, int(math.ceil(self.generations / factor))),
            stall_patience=max(2, int(math.ceil(self.stall_patience / factor))),
            seed=(self.seed * 1_000_003 + level) % 2**63,
        )


@dataclass
class GaResult:
    best: np.ndarray
    value: float
    trace: list
    n_evals: int
    generations_run: int
    blocks: list = field(default_factory=list)

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["generation", "best_value"])
            for g, v in enumerate(self.trace):
                w.writerow([g, repr(float(v))])


def _stream(seed, generation, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed) % 2**63, generation, index]))


def _score(value, sense, viol):
    """Larger is better."""
    if value is None or np.isnan(value):
        return -math.inf
    s = value if sense == "max" else -value
    return s - PENALTY * viol


def optimize(objective, space, cfg=None, sense="max", initial=None, trace_path=None):
    """Run the elitist GA and return a :class:`GaResult`.

    ``objective`` receives the decoded flat candidate. ``initial`` is an
    optional list of candidate points placed at the front of generation 0.
    """
    if sense not in ("max", "min"):
        raise ValueError(f"sense must be 'max' or 'min', got {sense!r}")
    cfg = cfg or GaConfig()
    n_evals = 0

    def evaluate(flat):
        nonlocal n_evals
        n_evals += 1
        return float(objective(flat))

    if space.is_singleton:
        flat = np.ones(space.dim)
        val = evaluate(flat)
        res = GaResult(flat, val, [val], n_evals, 0, space.split(flat))
        if trace_path:
            res.write_trace(trace_path)
        return res

    def make(genes):
        flat, viol = space.repair(space.decode(genes))
        return flat, viol

    pop, viols = [], []
    seeds = [np.asarray(s, dtype=float).ravel() for s in (initial or [])]
    for i in range(cfg.population):
        if i < len(seeds):
            flat, viol = make(seeds[i])
        else:
            rng = _stream(cfg.seed, 0, i)
            flat, viol = make(space.random_genes(rng))
            tries = 1
            while viol > space.slack and space.anchor is None and tries < cfg.repair_attempts and i == 0:
                flat, viol = make(space.random_genes(rng))
                tries += 1
        pop.append(flat)
        viols.append(viol)
    if space.anchor is None and min(viols) > space.slack:
        rng = _stream(cfg.seed, 0, cfg.population)
        for _ in range(cfg.repair_attempts):
            flat, viol = make(space.random_genes(rng))
            if viol <= space.slack:
                pop[-1], viols[-1] = flat, viol
                break
        else:
            raise EmptyFeasibleSetError("no feasible candidate found")
    values = [evaluate(p) for p in pop]
    scores = np.array([_score(v, sense, x) for v, x in zip(values, viols)])

    def best_index(sc):
        # argmax returns the lowest index among ties
        feas = np.array([x <= space.slack for x in viols])
        masked = np.where(feas, sc, -math.inf)
        return int(np.argmax(masked)) if np.any(feas) else int(np.argmax(sc))

    b = best_index(scores)
    trace = [values[b]]
    stall = 0
    gens_run = 0
    for gen in range(1, cfg.generations + 1):
        order = np.argsort(-scores, kind="stable")
        elite = [int(i) for i in order[: cfg.elite_count]]
        new_pop = [pop[i] for i in elite]
        new_vals = [values[i] for i in elite]
        new_viols = [viols[i] for i in elite]
        for idx in range(cfg.elite_count, cfg.population):
            rng = _stream(cfg.seed, gen, idx)
            p1 = _tournament(scores, cfg.tournament, rng)
            p2 = _tournament(scores, cfg.tournament, rng)
            child = pop[p1].copy()
            if rng.random() < cfg.crossover_rate:
                mask = rng.random(space.dim) < 0.5
                child[mask] = pop[p2][mask]
            mut = rng.random(space.dim) < cfg.mutation_rate
            child = child + mut * rng.normal(0.0, cfg.mutation_scale, size=space.dim)
            flat, viol = make(child)
            new_pop.append(flat)
            new_viols.append(viol)
            new_vals.append(evaluate(flat))
        pop, values, viols = new_pop, new_vals, new_viols
        scores = np.array([_score(v, sense, x) for v, x in zip(values, viols)])
        b = best_index(scores)
        prev = trace[-1]
        cur = values[b]
        improved = (cur > prev + 1e-12) if sense == "max" else (cur < prev - 1e-12)
        # elitism keeps the previous best in the population
        if sense == "max":
            cur = max(cur, prev)
        else:
            cur = min(cur, prev)
        trace.append(cur)
        gens_run = gen
        stall = 0 if improved else stall + 1
        if stall >= cfg.stall_patience:
            break
    best = pop[b]
    if viols[b] > space.slack:
        raise EmptyFeasibleSetError(f"best candidate still violates constraints by {viols[b]:.3g}")
    res = GaResult(best, values[b], trace, n_evals, gens_run, space.split(best))
    if trace_path:
        res.write_trace(trace_path)
    return res


def _tournament(scores, k, rng):
    picks = rng.integers(0, len(scores), size=k)
    return int(picks[np.argmax(scores[picks])])


@dataclass
class NestedResult:
    value: float
    candidates: list
    trace: list


def nested_optimize(levels, objective, cfgs=None, base_cfg=None, shrink=4.0):
    """Solve ``opt_1 opt_2 ... objective(c_1, c_2, ...)`` level by level.

    ``levels`` is a list of ``(space, sense)`` ordered outer to inner. When
    ``cfgs`` is omitted, level ``i`` uses ``base_cfg`` with its budget divided
    by ``shrink ** i``.
    """
    if not levels:
        raise ValueError("need at least one level")
    base_cfg = base_cfg or GaConfig()
    if cfgs is None:
        cfgs = [base_cfg.scaled(shrink**i, level=i) for i in range(len(levels))]
    if len(cfgs) != len(levels):
        raise ValueError("one GaConfig per level is required")

    def solve(depth, prefix):
        space, sense = levels[depth]
        if depth == len(levels) - 1:
            res = optimize(lambda c: objective(*prefix, c), space, cfgs[depth], sense)
            return res.value, [res.best], res.trace

        witnesses = {}

        def inner(c):
            val, cands, _ = solve(depth + 1, prefix + [c])
            witnesses[c.tobytes()] = cands
            return val

        res = optimize(inner, space, cfgs[depth], sense)
        return res.value, [res.best] + witnesses[res.best.tobytes()], res.trace

    value, cands, trace = solve(0, [])
    return NestedResult(value, cands, trace)
