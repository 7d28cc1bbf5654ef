"""Property suites behind ``gpexp verify``.

Each suite returns a :class:`SuiteReport`; ``passed`` is False as soon as one
check fails, and ``checks`` keeps one line per check for the report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cardinality as card
from . import method_of_types as mot
from .validation import check_random_state

SUITES = ("inequality", "types", "quantization", "lemmas", "ordering")


@dataclass
class SuiteReport:
    name: str
    checks: list = field(default_factory=list)

    def add(self, label, ok, detail=""):
        self.checks.append((label, bool(ok), detail))

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.checks)

    def lines(self):
        out = []
        for label, ok, detail in self.checks:
            out.append(f"[{'PASS' if ok else 'FAIL'}] {self.name}: {label}" + (f" ({detail})" if detail else ""))
        return out


# ------------------------------------------------------------ inequality


def union_bound_lhs(alpha, t):
    """``1 - prod_i (1 - alpha_i)^t_i`` evaluated in log space."""
    alpha = np.asarray(alpha, float)
    t = np.asarray(t, float)
    with np.errstate(divide="ignore"):
        log_keep = np.where(alpha < 1.0, np.log1p(-np.minimum(alpha, 1.0)), -np.inf)
    s = np.where(t > 0, t * log_keep, 0.0).sum(axis=-1)
    return -np.expm1(s)


def union_bound_rhs(alpha, t):
    return np.minimum(1.0, (np.asarray(alpha, float) * np.asarray(t, float)).sum(axis=-1))


def inequality_suite(n_samples=100_000, max_k=6, t_max=1e4, seed=0):
    rng = check_random_state(seed)
    rep = SuiteReport("inequality")
    worst = -np.inf
    for k in range(1, max_k + 1):
        m = n_samples // max_k + (k <= n_samples % max_k)
        alpha = rng.random((m, k))
        t = rng.uniform(1.0, t_max, (m, k))
        slack = union_bound_lhs(alpha, t) - union_bound_rhs(alpha, t)
        worst = max(worst, float(slack.max()))
    rep.add(f"{n_samples} fuzzed instances, K <= {max_k}", worst <= 1e-12, f"max LHS-RHS = {worst:.3g}")
    lhs, rhs = union_bound_lhs([0.5], [1.0]), union_bound_rhs([0.5], [1.0])
    rep.add("equality at K=1, t=1", abs(lhs - rhs) < 1e-15, f"LHS={float(lhs)}, RHS={float(rhs)}")
    return rep


# ------------------------------------------------------------ types


def types_suite(max_n=10, max_size=3, cond_max_n=10):
    rep = SuiteReport("types")
    bad, total, sums_bad = 0, 0, 0
    for size in range(1, max_size + 1):
        for n in range(1, max_n + 1):
            ts = mot.enumerate_types(size, n)
            sums_bad += sum(mot.type_class_size(t) for t in ts) != size**n
            bad += sum(not mot.type_bounds_hold(t) for t in ts)
            total += len(ts)
    rep.add(f"type sandwich, n <= {max_n}, alphabets <= {max_size}", bad == 0, f"{total} types, {bad} violations")
    rep.add("sum of class sizes equals alphabet^n", sums_bad == 0, f"{sums_bad} mismatches")
    bad, total = 0, 0
    for gs in range(1, max_size + 1):
        for os in range(1, max_size + 1):
            for n in range(1, cond_max_n + 1):
                for given in mot.enumerate_types(gs, n):
                    cts = mot.enumerate_conditional_types(given, os)
                    if sum(mot.cond_type_class_size(c) for c in cts) != os**n:
                        bad += 1
                    bad += sum(not mot.cond_type_bounds_hold(c) for c in cts)
                    total += len(cts)
    rep.add(f"conditional sandwich, n <= {cond_max_n}", bad == 0, f"{total} conditional types, {bad} violations")
    return rep


# ------------------------------------------------------------ quantization


def random_attack_channel(rng, n_rows, n_y):
    return rng.dirichlet(np.full(n_y, 0.5), size=n_rows)


def quantization_suite(n_channels=10_000, grid_ls=(4, 8, 16), n_pairs=10_000, quant_ls=(8, 32, 128), seed=0):
    rng = check_random_state(seed)
    rep = SuiteReport("quantization")
    for l in grid_ls:
        row_err = dist_up = norm_bad = 0
        for _ in range(n_channels):
            n_x = int(rng.integers(1, 4))
            n_y = int(rng.integers(2, min(l, 4) + 1))
            p = random_attack_channel(rng, n_x, n_y)
            d = rng.random((n_x, n_y))
            ph, _ = card.discretize_attack(p, d, l)
            units = ph * l
            row_err += int(np.any(units.sum(axis=1).round().astype(int) != l) or not np.allclose(units, units.round()))
            dist_up += int(np.any((ph * d).sum(axis=1) > (p * d).sum(axis=1) + 1e-12))
            norm_bad += int(np.any(np.abs(p - ph).sum(axis=1) > n_y / l + 1e-12))
        rep.add(f"grid l={l}: rows on grid and summing to 1", row_err == 0, f"{row_err} failures")
        rep.add(f"grid l={l}: distortion non-increasing", dist_up == 0, f"{dist_up} failures")
        rep.add(f"grid l={l}: L1 distance <= |Y|/l", norm_bad == 0, f"{norm_bad} failures")
    for l in quant_ls:
        worst = 0.0
        over = 0
        for _ in range(n_pairs):
            n_y = int(rng.integers(2, min(l, 5) + 1))
            lo = 1.0 / l
            p = lo + (1 - n_y * lo) * rng.dirichlet(np.ones(n_y))
            q = lo + (1 - n_y * lo) * rng.dirichlet(np.ones(n_y))
            gap = abs(_kl_bits(p, q) - _kl_bits(card.log_uniform_quantize(p, l), card.log_uniform_quantize(q, l)))
            bound = card.kl_gap_bound(n_y, l)
            over += gap > bound
            worst = max(worst, gap / bound)
        rep.add(f"KL gap l={l} within 2(|Y|+1) log^2 l / l", over == 0, f"max gap/bound = {worst:.3f}")
    return rep


def _kl_bits(p, q):
    return float(np.sum(p * np.log2(p / q)))


# ------------------------------------------------------------ exponent properties


def _degenerate(solver=None):
    from .exponents import SolverConfig
    from .scenarios import build_preset

    return build_preset("degenerate"), solver or SolverConfig()


def lemmas_suite(spec=None, solver=None):
    """Zero set and upper bound of the exponents against ``C_L``."""
    from .exponents import ExponentProblem, capacity_CL, error_exponent

    base, solver = _degenerate(solver)
    spec = spec or base
    rep = SuiteReport("lemmas")
    cap = capacity_CL(spec, solver).value
    for model in ("cdmc", "cam"):
        above = error_exponent(ExponentProblem(spec, model, cap + 0.01, solver)).value
        below_rate = max(cap - 0.03, 0.0)
        below = error_exponent(ExponentProblem(spec, model, below_rate, solver)).value
        zero = error_exponent(ExponentProblem(spec, model, 0.0, solver)).value
        rep.add(f"{model}: E(C_L + 0.01) <= 2e-3", above <= 2e-3, f"{above:.3g}")
        # positive below capacity; the cdmc exponent is only ~1e-3 this close to C_L
        rep.add(f"{model}: E(C_L - 0.03) > 1e-4", below > 1e-4, f"{below:.4g}")
        rep.add(f"{model}: E(0) <= C_L + 2e-3", zero <= cap + 2e-3, f"{zero:.4f} vs {cap:.4f}")
        rep.add(f"{model}: E nonincreasing in R", zero + 2e-3 >= below >= above - 2e-3)
    return rep


def ordering_suite(spec=None, solver=None, rates=(0.0, 0.1, 0.2)):
    """``E_cdmc <= E_cam <= |C_L - R|^+`` at each rate."""
    from .exponents import ExponentProblem, capacity_CL, error_exponent

    base, solver = _degenerate(solver)
    spec = spec or base
    rep = SuiteReport("ordering")
    cap = capacity_CL(spec, solver).value
    for R in rates:
        e1 = error_exponent(ExponentProblem(spec, "cdmc", R, solver)).value
        e2 = error_exponent(ExponentProblem(spec, "cam", R, solver)).value
        rep.add(f"R={R}: cdmc <= cam", e1 <= e2 + 2e-3, f"{e1:.4f} <= {e2:.4f}")
        rep.add(f"R={R}: cam <= |C_L - R|^+", e2 <= max(cap - R, 0.0) + 2e-3, f"{e2:.4f} <= {max(cap - R, 0):.4f}")
    return rep


def run_suite(name, seed=0, solver=None):
    if name == "inequality":
        return inequality_suite(seed=seed)
    if name == "types":
        return types_suite()
    if name == "quantization":
        return quantization_suite(seed=seed)
    if name == "lemmas":
        return lemmas_suite(solver=solver)
    if name == "ordering":
        return ordering_suite(solver=solver)
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")


__all__ = [
    "SUITES",
    "SuiteReport",
    "inequality_suite",
    "lemmas_suite",
    "ordering_suite",
    "quantization_suite",
    "run_suite",
    "types_suite",
    "union_bound_lhs",
    "union_bound_rhs",
]

