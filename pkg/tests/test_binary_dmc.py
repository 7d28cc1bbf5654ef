import math

import numpy as np
import pytest

from gpexp.binary import c_deg, c_priv, delta2, er_cam_deg_closed, er_cam_pub_closed, g_star
from gpexp.dmc import (
    DistortionClass,
    compound_dmc_exponent,
    dmc_exponent,
    jamming_exponent,
    private_wm_exponent,
)


def h(t):
    return 0.0 if t in (0.0, 1.0) else -t * math.log2(t) - (1 - t) * math.log2(1 - t)


def grid_dmc_exponent(R, W, p_x=(0.5, 0.5), step=1e-3):
    """Brute force over binary hypothesis channels V on a ``step`` grid."""
    p_x = np.asarray(p_x)
    v = np.arange(0, 1 + step / 2, step)
    v0, v1 = np.meshgrid(v, v, indexing="ij")  # V(1|0), V(0|1)

    def term(p, q):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p > 0, p * np.log2(p / q), 0.0)

    div = p_x[0] * (term(1 - v0, W[0, 0]) + term(v0, W[0, 1])) + p_x[1] * (term(v1, W[1, 0]) + term(1 - v1, W[1, 1]))
    py1 = p_x[0] * v0 + p_x[1] * (1 - v1)
    hy = np.vectorize(h)(np.clip(py1, 0, 1))
    hyx = p_x[0] * np.vectorize(h)(v0) + p_x[1] * np.vectorize(h)(v1)
    return float(np.min(div + np.maximum(hy - hyx - R, 0.0)))


BSC01 = np.array([[0.9, 0.1], [0.1, 0.9]])


class TestClosedForms:
    def test_public_middle_regime(self):
        np.testing.assert_allclose(g_star(0.4, 0.2), h(0.4) - h(0.2), atol=1e-12)

    def test_private(self):
        np.testing.assert_allclose(c_priv(0.4, 0.2), h(0.44) - h(0.2), atol=1e-12)
        np.testing.assert_allclose(c_priv(0.0, 0.2), 0.0, atol=1e-12)

    def test_regimes_are_continuous(self):
        d2 = delta2(0.2)
        np.testing.assert_allclose(d2, 1 - 2 ** (-h(0.2)))
        for D1 in (d2, 0.5):
            np.testing.assert_allclose(g_star(D1 - 1e-9, 0.2), g_star(D1 + 1e-9, 0.2), atol=1e-7)

    def test_time_sharing_is_linear(self):
        a, b = g_star(0.1, 0.2), g_star(0.2, 0.2)
        np.testing.assert_allclose(b, 2 * a, rtol=1e-12)

    def test_saturation(self):
        np.testing.assert_allclose(g_star(0.9, 0.2), 1 - h(0.2))

    def test_no_side_info_matches_public(self):
        assert c_deg(0.4, 0.2) == g_star(0.4, 0.2)

    def test_straight_lines(self):
        np.testing.assert_allclose(er_cam_pub_closed(0.1, 0.4, 0.2), g_star(0.4, 0.2) - 0.1)
        assert er_cam_pub_closed(0.3, 0.4, 0.2) == 0.0
        assert er_cam_deg_closed(0.3, 0.4, 0.2) == 0.0

    def test_domain(self):
        with pytest.raises(ValueError):
            g_star(0.4, 0.6)
        with pytest.raises(ValueError):
            c_priv(0.6, 0.2)
        with pytest.raises(ValueError):
            er_cam_pub_closed(-0.1, 0.4, 0.2)


class TestDmcExponent:
    @pytest.mark.parametrize("R", [0.1, 0.2, 0.3])
    def test_against_grid(self, R):
        np.testing.assert_allclose(dmc_exponent(R, [0.5, 0.5], BSC01), grid_dmc_exponent(R, BSC01), atol=2e-3)

    def test_zero_above_mutual_information(self):
        assert dmc_exponent(1 - h(0.1) + 0.01, [0.5, 0.5], BSC01) < 1e-6

    def test_nonincreasing_in_rate(self):
        vals = [dmc_exponent(R, [0.5, 0.5], BSC01) for R in (0.0, 0.1, 0.2, 0.3, 0.4)]
        assert all(a >= b - 1e-7 for a, b in zip(vals, vals[1:]))

    def test_compound_singleton_is_exact(self):
        for R in (0.1, 0.2, 0.3):
            assert compound_dmc_exponent(R, [0.5, 0.5], [BSC01]) == dmc_exponent(R, [0.5, 0.5], BSC01)

    def test_compound_takes_worst(self):
        worse = np.array([[0.8, 0.2], [0.2, 0.8]])
        np.testing.assert_allclose(
            compound_dmc_exponent(0.1, [0.5, 0.5], [BSC01, worse]), dmc_exponent(0.1, [0.5, 0.5], worse)
        )

    def test_distortion_class_is_bsc_at_bound(self):
        ham = 1.0 - np.eye(2)
        bsc02 = np.array([[0.8, 0.2], [0.2, 0.8]])
        np.testing.assert_allclose(
            compound_dmc_exponent(0.05, [0.5, 0.5], DistortionClass(ham, 0.2)),
            dmc_exponent(0.05, [0.5, 0.5], bsc02),
            atol=2e-4,
        )

    def test_validation(self):
        with pytest.raises(ValueError):
            dmc_exponent(-0.1, [0.5, 0.5], BSC01)
        with pytest.raises(ValueError):
            dmc_exponent(0.1, [0.5, 0.6], BSC01)
        with pytest.raises(ValueError):
            compound_dmc_exponent(0.1, [0.5, 0.5], [])


class TestJamming:
    def test_single_state_reduces_to_dmc(self):
        W = BSC01[:, None, :]
        np.testing.assert_allclose(
            jamming_exponent(0.1, W, p_x=[0.5, 0.5]), dmc_exponent(0.1, [0.5, 0.5], BSC01), atol=1e-6
        )

    def test_jammer_picks_worst_state(self):
        W = np.stack([BSC01, np.array([[0.7, 0.3], [0.3, 0.7]])], axis=1)
        val = jamming_exponent(0.0, W, p_x=[0.5, 0.5])
        assert val <= dmc_exponent(0.0, [0.5, 0.5], BSC01) + 1e-6

    def test_state_cost_limits_jammer(self):
        W = np.stack([BSC01, np.full((2, 2), 0.5)], axis=1)
        free = jamming_exponent(0.0, W, p_x=[0.5, 0.5])
        capped = jamming_exponent(0.0, W, p_x=[0.5, 0.5], state_cost=np.array([0.0, 1.0]), Lambda=0.0)
        assert free < 1e-6
        np.testing.assert_allclose(capped, dmc_exponent(0.0, [0.5, 0.5], BSC01), atol=1e-5)

    def test_shape_check(self):
        with pytest.raises(ValueError):
            jamming_exponent(0.1, BSC01)


class TestPrivateWatermarking:
    def test_zero_rate_matches_private_cam_value(self):
        # the CAM private zero-rate exponent reported by the full solver is 0.263
        np.testing.assert_allclose(private_wm_exponent(0.0, 0.4, 0.2), 0.263, atol=5e-3)

    def test_zero_above_capacity(self):
        assert private_wm_exponent(c_priv(0.4, 0.2) + 0.02, 0.4, 0.2, polish_evals=60) < 2e-3
