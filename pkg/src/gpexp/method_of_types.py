"""Types, conditional types, class sizes and exact-type sampling."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .pmf import JointPmf, entropy, mutual_information
from .validation import check_positive_int, check_random_state

ENUM_BUDGET = 10**7


class TypeBudgetError(RuntimeError):
    """Raised instead of silently truncating an enumeration."""


class TypeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TypeVector:
    """Symbol counts of a length-``n`` sequence over an alphabet of ``len(counts)`` symbols."""

    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts or any(c < 0 for c in counts):
            raise ValueError(f"counts must be nonnegative, got {counts}")
        if sum(counts) < 1:
            raise ValueError("a type needs n >= 1")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self):
        return sum(self.counts)

    @property
    def size(self):
        return len(self.counts)

    @property
    def pmf(self):
        return np.array(self.counts, dtype=float) / self.n

    @classmethod
    def of(cls, seq, size):
        seq = np.asarray(seq, dtype=int)
        return cls(tuple(np.bincount(seq, minlength=size)))


@dataclass(frozen=True)
class CondTypeVector:
    """Joint counts ``counts[g][o]``; row ``g`` sums to ``given.counts[g]``."""

    given: TypeVector
    counts: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(c) for c in row) for row in self.counts)
        if len(rows) != self.given.size:
            raise ValueError("one row per given symbol is required")
        width = {len(r) for r in rows}
        if len(width) != 1:
            raise ValueError("rows must have equal length")
        for g, row in enumerate(rows):
            if any(c < 0 for c in row) or sum(row) != self.given.counts[g]:
                raise ValueError(f"row {g} does not sum to {self.given.counts[g]}")
        object.__setattr__(self, "counts", rows)

    @property
    def out_size(self):
        return len(self.counts[0])

    @property
    def n(self):
        return self.given.n

    def joint_pmf(self):
        return np.array(self.counts, dtype=float) / self.n

    def cond_entropy(self):
        """``H(out | given)`` of the empirical joint, in bits."""
        joint = self.joint_pmf()
        return entropy(joint) - entropy(joint.sum(axis=1))


def n_types(size, n):
    return math.comb(n + size - 1, size - 1)


def _compositions(n, size):
    for bars in itertools.combinations(range(n + size - 1), size - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(n + size - 2 - prev)
        yield tuple(out)


def enumerate_types(size, n, budget=ENUM_BUDGET):
    """All types of length-``n`` sequences over ``size`` symbols, in lexicographic order."""
    size = check_positive_int(size, "alphabet size")
    n = check_positive_int(n, "n")
    count = n_types(size, n)
    if count > budget:
        raise TypeBudgetError(f"{count} types exceed the budget {budget}")
    return [TypeVector(c) for c in _compositions(n, size)]


def multinomial(counts):
    out, left = 1, sum(counts)
    for c in counts:
        out *= math.comb(left, c)
        left -= c
    return out


def type_class_size(t):
    """``n! / prod(counts!)`` as an exact integer."""
    return multinomial(t.counts)


def log2_type_class_size(t):
    """Real-valued ``log2 |T|`` for classes too large to handle as integers."""
    return (math.lgamma(t.n + 1) - sum(math.lgamma(c + 1) for c in t.counts)) / math.log(2)


def cond_type_class_size(ct):
    """Number of sequences with joint type ``ct`` given a fixed given-sequence."""
    out = 1
    for row in ct.counts:
        out *= multinomial(row)
    return out


def enumerate_conditional_types(given, out_size, budget=ENUM_BUDGET):
    """All conditional types with the given row sums."""
    out_size = check_positive_int(out_size, "out alphabet size")
    count = 1
    for c in given.counts:
        count *= n_types(out_size, c) if c > 0 else 1
    if count > budget:
        raise TypeBudgetError(f"{count} conditional types exceed the budget {budget}")
    rows = [list(_compositions(c, out_size)) if c > 0 else [(0,) * out_size] for c in given.counts]
    return [CondTypeVector(given, combo) for combo in itertools.product(*rows)]


def type_bounds(t):
    """``(log2 lower, log2 upper)`` of the polynomial sandwich on ``|T|``."""
    h = entropy(t.pmf)
    return -t.size * math.log2(t.n + 1) + t.n * h, t.n * h


def cond_type_bounds(ct):
    h = ct.cond_entropy()
    n = ct.n
    return -ct.given.size * ct.out_size * math.log2(n + 1) + n * h, n * h


def _within(size, lo, hi, tol=1e-9):
    lg = math.log2(size)
    return lo - tol <= lg <= hi + tol


def type_bounds_hold(t):
    return _within(type_class_size(t), *type_bounds(t))


def cond_type_bounds_hold(ct):
    return _within(cond_type_class_size(ct), *cond_type_bounds(ct))


def empirical_joint(seqs, sizes=None, roles=None):
    """Joint type of equal-length integer sequences as a :class:`JointPmf`."""
    seqs = [np.asarray(s, dtype=int) for s in seqs]
    if not seqs:
        raise ValueError("need at least one sequence")
    n = len(seqs[0])
    if n == 0 or any(len(s) != n for s in seqs):
        raise ValueError("sequences must be nonempty and of equal length")
    if sizes is None:
        sizes = [int(s.max()) + 1 for s in seqs]
    counts = np.zeros(tuple(sizes))
    np.add.at(counts, tuple(seqs), 1.0)
    roles = tuple(roles) if roles is not None else tuple(f"V{i}" for i in range(len(seqs)))
    return JointPmf(counts / n, roles)


def empirical_mi(u, others, sizes=None):
    """``I(u; others)`` of the joint type, where ``others`` is a sequence or a tuple of them."""
    if isinstance(others, np.ndarray) and others.ndim == 1:
        others = [others]
    elif others and np.ndim(others[0]) == 0:
        others = [others]
    seqs = [u, *others]
    p = empirical_joint(seqs, sizes)
    return mutual_information(p, ((0,), tuple(range(1, len(seqs)))))


def sample_uniform_from_type(t, rng):
    """A uniformly random sequence with exactly type ``t``."""
    rng = check_random_state(rng)
    seq = np.repeat(np.arange(t.size), t.counts)
    rng.shuffle(seq)
    return seq


def sample_uniform_from_cond_type(ct, given_seq, rng):
    """A uniform sequence ``o`` such that ``(given_seq, o)`` has joint type ``ct``."""
    rng = check_random_state(rng)
    given_seq = np.asarray(given_seq, dtype=int)
    if TypeVector.of(given_seq, ct.given.size) != ct.given:
        raise TypeMismatchError("given sequence does not have the conditional type's given type")
    out = np.empty(len(given_seq), dtype=int)
    for g, row in enumerate(ct.counts):
        pos = np.flatnonzero(given_seq == g)
        vals = np.repeat(np.arange(len(row)), row)
        rng.shuffle(vals)
        out[pos] = vals
    return out
