"""Closed forms for the binary-Hamming watermarking games."""

from __future__ import annotations

from .pmf import binary_entropy as hb
from .pmf import pos_part, star
from .validation import check_nonnegative, check_probability


def delta2(D2):
    """``1 - 2^{-h(D2)}``: the cost at which time sharing stops paying off."""
    return 1.0 - 2.0 ** (-hb(D2))


def g_star(D1, D2):
    """Public-watermarking capacity for Hamming cost and distortion.

    Three regimes: time sharing ``(D1 / d2)(h(d2) - h(D2))`` for ``D1 < d2``,
    ``h(D1) - h(D2)`` up to ``D1 = 1/2``, and ``1 - h(D2)`` beyond.
    """
    D1 = check_nonnegative(D1, "D1")
    D2 = check_probability(D2, "D2")
    if D2 > 0.5:
        raise ValueError(f"D2 must lie in [0, 1/2], got {D2}")
    d2 = delta2(D2)
    if D1 < d2:
        return (D1 / d2) * (hb(d2) - hb(D2))
    if D1 <= 0.5:
        return hb(D1) - hb(D2)
    return 1.0 - hb(D2)


def c_priv(D1, D2):
    """Private-watermarking capacity ``h(D1 * D2) - h(D2)``."""
    D1, D2 = check_probability(D1, "D1"), check_probability(D2, "D2")
    if D1 > 0.5 or D2 > 0.5:
        raise ValueError("D1 and D2 must lie in [0, 1/2]")
    return hb(star(D1, D2)) - hb(D2)


def c_deg(D1, D2):
    """Capacity with no side information; it coincides with the public value."""
    return g_star(D1, D2)


def er_cam_pub_closed(R, D1, D2):
    return pos_part(g_star(D1, D2) - check_nonnegative(R, "R"))


def er_cam_deg_closed(R, D1, D2):
    return pos_part(c_deg(D1, D2) - check_nonnegative(R, "R"))
