"""Problem instances: side-information pattern, state law, cost and distortion.

Every scenario uses the same six axes in the order ``(Se, Sa, Sd, U, X, Y)``.
A variable that is absent from a problem is a size-1 alphabet, so the same
formulas cover every preset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .pmf import JointPmf
from .validation import (
    PmfError,
    check_cond_pmf,
    check_nonnegative,
    check_pmf,
    check_positive_int,
    check_probability,
)

FEAS_SLACK = 1e-9

PRESETS = (
    "gelfand_pinsker",
    "public",
    "semiblind",
    "cover_chiang",
    "private",
    "degenerate",
    "custom",
)


class InfeasibleError(ValueError):
    code = "infeasible"


class CostInfeasibleError(InfeasibleError):
    """Transmit channel exceeds the encoder cost budget D1."""

    code = "cost"


class DistortionInfeasibleError(InfeasibleError):
    """Attack channel exceeds the adversary distortion budget D2."""

    code = "distortion"


def hamming(n_a, n_b):
    """``d(i, j) = [i != j]`` on alphabets of sizes ``n_a`` x ``n_b``."""
    return (np.arange(n_a)[:, None] != np.arange(n_b)[None, :]).astype(float)


@dataclass(frozen=True)
class ScenarioSpec:
    """A side-information coding problem.

    Attributes
    ----------
    state_pmf : ndarray, shape (|Se|, |Sa|, |Sd|)
    cost : ndarray, shape (|Se|, |X|)
        Encoder cost ``Gamma(se, x)``.
    distortion : ndarray, shape (|X|, |Y|)
        Adversary distortion ``d(x, y)``.
    L : int
        Size of the auxiliary alphabet U.
    D1, D2 : float
        Cost and distortion budgets. ``math.inf`` disables the bound.
    attack_set : tuple of ndarray or None
        When given, the adversary picks from this finite list of channels
        (each shaped (|X|, |Sa|, |Y|)) instead of the distortion class.
    """

    state_pmf: np.ndarray
    cost: np.ndarray
    distortion: np.ndarray
    L: int
    D1: float
    D2: float
    preset: str = "custom"
    p_e: float | None = None
    attack_set: tuple | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        state = check_pmf(self.state_pmf, name="state_pmf")
        if state.ndim != 3:
            raise PmfError(f"state_pmf must have 3 axes (Se, Sa, Sd), got {state.shape}")
        cost = np.asarray(self.cost, dtype=float)
        dist = np.asarray(self.distortion, dtype=float)
        if cost.ndim != 2 or cost.shape[0] != state.shape[0]:
            raise ValueError(f"cost must be (|Se|, |X|), got {cost.shape}")
        if dist.ndim != 2 or dist.shape[0] != cost.shape[1]:
            raise ValueError(f"distortion must be (|X|, |Y|), got {dist.shape}")
        if np.any(cost < 0) or np.any(dist < 0):
            raise ValueError("cost and distortion tables must be nonnegative")
        check_positive_int(self.L, "L")
        for name in ("D1", "D2"):
            v = getattr(self, name)
            if not (v == math.inf or check_nonnegative(v, name) >= 0):
                raise ValueError(f"{name} must be nonnegative")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {PRESETS}")
        attacks = None
        if self.attack_set is not None:
            attacks = []
            for a in self.attack_set:
                a = check_cond_pmf(a, 2, name="attack channel")
                if a.shape != (dist.shape[0], state.shape[1], dist.shape[1]):
                    raise ValueError(f"attack channel shape {a.shape} does not match scenario")
                attacks.append(a)
            if not attacks:
                raise ValueError("attack_set must not be empty")
            attacks = tuple(attacks)
        for name, arr in (("state_pmf", state), ("cost", cost), ("distortion", dist)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "D1", float(self.D1))
        object.__setattr__(self, "D2", float(self.D2))
        object.__setattr__(self, "attack_set", attacks)

    @property
    def sizes(self):
        """Alphabet sizes in canonical order (Se, Sa, Sd, U, X, Y)."""
        e, a, d = self.state_pmf.shape
        return e, a, d, self.L, self.cost.shape[1], self.distortion.shape[1]

    @property
    def n_x(self):
        return self.cost.shape[1]

    @property
    def n_y(self):
        return self.distortion.shape[1]

    @property
    def p_se(self):
        return self.state_pmf.sum(axis=(1, 2))

    def with_L(self, L):
        return replace(self, L=L)

    def zero_cost_transmit(self):
        """Anchor channel: X = argmin_x Gamma(se, x), U uniform and independent."""
        e, _, _, L, nx, _ = self.sizes
        t = np.zeros((e, nx, L))
        t[np.arange(e), np.argmin(self.cost, axis=1), :] = 1.0 / L
        return t

    def zero_distortion_attack(self):
        """Anchor channel: Y = argmin_y d(x, y), ignoring Sa."""
        nx, na, ny = self.n_x, self.state_pmf.shape[1], self.n_y
        a = np.zeros((nx, na, ny))
        a[np.arange(nx), :, np.argmin(self.distortion, axis=1)] = 1.0
        return a

    def describe(self):
        out = {
            "preset": self.preset,
            "p_e": self.p_e,
            "D1": self.D1,
            "D2": self.D2,
            "L": self.L,
            "sizes": dict(zip(("Se", "Sa", "Sd", "U", "X", "Y"), self.sizes)),
        }
        out.update(self.meta)
        return out


@dataclass(frozen=True)
class TransmitChannel:
    """``p(x, u | se)`` stored as an array of shape (|Se|, |X|, |U|)."""

    values: np.ndarray

    def __post_init__(self):
        v = check_cond_pmf(self.values, 1, atol=1e-9, name="transmit channel")
        if v.ndim != 3:
            raise PmfError(f"transmit channel must be (Se, X, U), got {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class AttackChannel:
    """``p(y | x, sa)`` stored as an array of shape (|X|, |Sa|, |Y|)."""

    values: np.ndarray

    def __post_init__(self):
        v = check_cond_pmf(self.values, 2, atol=1e-9, name="attack channel")
        if v.ndim != 3:
            raise PmfError(f"attack channel must be (X, Sa, Y), got {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def _arr(ch):
    return ch.values if isinstance(ch, (TransmitChannel, AttackChannel)) else np.asarray(ch, float)


def transmit_cost(spec, t):
    """Expected cost ``sum p(se) p(x,u|se) Gamma(se,x)``."""
    return float(np.einsum("e,exu,ex->", spec.p_se, _arr(t), spec.cost))


def x_sa_marginal(spec, t):
    """``p(x, sa)`` induced by the state law and transmit channel, shape (|X|, |Sa|)."""
    return np.einsum("ead,exu->xa", spec.state_pmf, _arr(t))


def attack_distortion(spec, p_x_sa, a):
    """Expected distortion ``sum p(x,sa) p(y|x,sa) d(x,y)``."""
    p_x_sa = np.asarray(p_x_sa.values if isinstance(p_x_sa, JointPmf) else p_x_sa, float)
    return float(np.einsum("xa,xay,xy->", p_x_sa, _arr(a), spec.distortion))


def cost_feasible(spec, t, slack=FEAS_SLACK):
    return transmit_cost(spec, t) <= spec.D1 + slack


def attack_feasible(spec, p_x_sa, a, slack=FEAS_SLACK):
    if spec.attack_set is not None:
        arr = _arr(a)
        return any(np.allclose(arr, b, atol=1e-12) for b in spec.attack_set)
    return attack_distortion(spec, p_x_sa, a) <= spec.D2 + slack


def assemble_joint(spec, t, a, check=True):
    """Joint pmf ``p(s) p(x,u|se) p(y|x,sa)`` over (Se, Sa, Sd, U, X, Y)."""
    tv, av = _arr(t), _arr(a)
    e, sa, sd, L, nx, ny = spec.sizes
    if tv.shape != (e, nx, L):
        raise ValueError(f"transmit channel shape {tv.shape}, expected {(e, nx, L)}")
    if av.shape != (nx, sa, ny):
        raise ValueError(f"attack channel shape {av.shape}, expected {(nx, sa, ny)}")
    if check:
        c = transmit_cost(spec, tv)
        if c > spec.D1 + FEAS_SLACK:
            raise CostInfeasibleError(f"transmit cost {c:.6g} exceeds D1={spec.D1}")
        p_xa = x_sa_marginal(spec, tv)
        if not attack_feasible(spec, p_xa, av):
            dist = attack_distortion(spec, p_xa, av)
            raise DistortionInfeasibleError(
                f"attack distortion {dist:.6g} exceeds D2={spec.D2} or channel not in attack set"
            )
    joint = np.einsum("ead,exu,xay->eaduxy", spec.state_pmf, tv, av)
    joint = np.clip(joint, 0.0, None)
    return JointPmf(joint / joint.sum(), ("Se", "Sa", "Sd", "U", "X", "Y"))


def _bern(p):
    return np.array([1.0 - p, p])


def build_preset(name, p_e=0.5, D1=0.4, D2=0.2, L=2, *, sd_noise=0.1, attack_set=None):
    """Binary-Hamming scenarios for the standard side-information patterns.

    ``p_e`` is ``Pr[Se = 1]``. For ``semiblind`` and ``cover_chiang`` the
    decoder state is ``Sd = Se xor Bern(sd_noise)``. ``degenerate`` forces all
    states to a single symbol, so the cost reduces to the Hamming weight of X.
    """
    if name == "custom":
        raise ValueError("custom scenarios are built with ScenarioSpec(...) or load_scenario")
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    p_e = check_probability(p_e, "p_e")
    pe = _bern(p_e)
    meta = {}
    if name == "degenerate":
        state = np.ones((1, 1, 1))
        p_e = 0.0
    elif name == "public":
        state = pe.reshape(2, 1, 1)
    elif name == "private":
        state = np.zeros((2, 1, 2))
        state[[0, 1], 0, [0, 1]] = pe
    elif name == "gelfand_pinsker":
        state = np.zeros((2, 2, 1))
        state[[0, 1], [0, 1], 0] = pe
    elif name in ("semiblind", "cover_chiang"):
        noise = check_probability(sd_noise, "sd_noise")
        esd = pe[:, None] * np.array([[1 - noise, noise], [noise, 1 - noise]])
        meta["sd_noise"] = noise
        if name == "semiblind":
            state = esd.reshape(2, 1, 2)
        else:
            # Sa = (Se, Sd) encoded as 2*se + sd
            state = np.zeros((2, 4, 2))
            for se in range(2):
                for sd in range(2):
                    state[se, 2 * se + sd, sd] = esd[se, sd]
    # the degenerate state is the all-zero sequence, so Gamma(0, x) = [x != 0]
    cost = hamming(state.shape[0], 2)
    return ScenarioSpec(
        state_pmf=state,
        cost=cost,
        distortion=hamming(2, 2),
        L=L,
        D1=D1,
        D2=D2,
        preset=name,
        p_e=p_e,
        attack_set=attack_set,
        meta=meta,
    )


def bsc(p, n_sa=1):
    """Binary symmetric attack channel, shape (2, n_sa, 2)."""
    p = check_probability(p, "p")
    row = np.array([[1 - p, p], [p, 1 - p]])
    return np.repeat(row[:, None, :], n_sa, axis=1)


def load_scenario(path):
    """Read a YAML scenario file.

    Keys: ``preset``, ``p_e``, ``D1``, ``D2``, ``L`` and, for ``custom``,
    ``state_pmf`` (nested list over Se, Sa, Sd), ``cost`` and ``distortion``.
    An optional ``attack_set`` lists explicit attack channels.
    """
    import yaml

    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    return scenario_from_dict(cfg)


def _budget(v):
    if v is None:
        return math.inf
    if isinstance(v, str) and v.lower() in ("inf", "infinity", "none"):
        return math.inf
    return float(v)


def scenario_from_dict(cfg):
    cfg = dict(cfg)
    preset = cfg.get("preset", "custom")
    D1 = _budget(cfg.get("D1", 0.4))
    D2 = _budget(cfg.get("D2", 0.2))
    L = int(cfg.get("L", 2))
    attacks = cfg.get("attack_set")
    if attacks is not None:
        attacks = tuple(np.asarray(a, float) for a in attacks)
    if preset == "custom":
        for key in ("state_pmf", "cost", "distortion"):
            if key not in cfg:
                raise ValueError(f"custom scenario needs '{key}'")
        return ScenarioSpec(
            state_pmf=np.asarray(cfg["state_pmf"], float),
            cost=np.asarray(cfg["cost"], float),
            distortion=np.asarray(cfg["distortion"], float),
            L=L,
            D1=D1,
            D2=D2,
            attack_set=attacks,
        )
    kwargs = {}
    if "sd_noise" in cfg:
        kwargs["sd_noise"] = float(cfg["sd_noise"])
    return build_preset(
        preset, float(cfg.get("p_e", 0.5)), D1, D2, L, attack_set=attacks, **kwargs
    )
