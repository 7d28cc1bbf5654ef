import numpy as np
import pytest

from gpexp.pmf import JointPmf, j_functional
from gpexp.programs import (
    CapacityInner,
    ExponentInner,
    cam_objective,
    cam_objective_chain,
    capacity_objective,
    cdmc_objective,
    hyp_distortion,
    hyp_joint,
    j_value,
    true_joint,
)
from gpexp.scenarios import bsc, build_preset


def flip_transmit(ne, beta):
    T = np.zeros((ne, 2, 2))
    for e in range(ne):
        T[e, e, e] = 1 - beta
        T[e, 1 - e, 1 - e] = beta
    return T


def random_kappa_q(rng, spec):
    """Hypothesis channel whose (sa, sd) part depends on se only."""
    ne, na, nd, L, nx, ny = spec.sizes
    support = spec.state_pmf > 0
    kappa = rng.dirichlet(np.ones(na * nd), size=ne).reshape(ne, na, nd) * support
    kappa /= kappa.sum(axis=(1, 2), keepdims=True)
    ych = rng.dirichlet(np.ones(ny), size=(ne, nx, L, na, nd))
    return kappa[:, None, None, :, :, None] * ych


class TestEvaluators:
    def test_j_value_matches_pmf_core(self, rng, private):
        T = rng.dirichlet(np.ones(4), size=2).reshape(2, 2, 2)
        joint = true_joint(private.state_pmf, T, bsc(0.15))
        p = JointPmf(joint, ("Se", "Sa", "Sd", "U", "X", "Y"))
        np.testing.assert_allclose(j_value(joint), j_functional(p), atol=1e-12)

    def test_cdmc_objective_zero_divergence_at_truth(self, public):
        T = flip_transmit(2, 0.4)
        atk = bsc(0.2)
        q = np.broadcast_to(
            np.einsum("ead,xay->exady", public.state_pmf / public.p_se[:, None, None], atk)[:, :, None],
            (2, 2, 2, 1, 1, 2),
        )
        val = cdmc_objective(public.state_pmf, public.p_se, T, q, atk, 0.0)
        np.testing.assert_allclose(val, capacity_objective(public.state_pmf, T, atk), atol=1e-12)

    @pytest.mark.parametrize("preset", ["public", "private", "semiblind"])
    def test_cam_literal_equals_chain_rule(self, preset, rng):
        spec = build_preset(preset)
        ne = spec.sizes[0]
        for _ in range(10):
            pt = rng.dirichlet(np.ones(ne))
            T = rng.dirichlet(np.ones(4), size=ne).reshape(ne, 2, 2)
            q = random_kappa_q(rng, spec)
            R = rng.uniform(0, 0.3)
            np.testing.assert_allclose(
                cam_objective(spec.state_pmf, pt, T, q, R),
                cam_objective_chain(spec.state_pmf, pt, T, q, R),
                atol=1e-10,
            )


def brute_force_capacity_inner(pS, T, D2, step=0.0025):
    """min over binary attacks (a0 = P(1|0), a1 = P(0|1)) meeting the distortion bound."""
    p_x = np.einsum("ead,exu->x", pS, T)
    best = np.inf
    for a0 in np.arange(0, 1 + 1e-12, step):
        a1_max = (D2 - p_x[0] * a0) / p_x[1] if p_x[1] > 0 else 1.0
        if a1_max < 0:
            break
        for a1 in np.arange(0, min(a1_max, 1.0) + 1e-12, step):
            atk = np.array([[[1 - a0, a0]], [[a1, 1 - a1]]])
            best = min(best, capacity_objective(pS, T, atk))
    return best


class TestCapacityInner:
    def test_public_flip_design_against_grid(self, public):
        T = flip_transmit(2, 0.4)
        val, atk = CapacityInner(public).solve(T)
        oracle = brute_force_capacity_inner(public.state_pmf, T, 0.2)
        np.testing.assert_allclose(val, oracle, atol=1e-3)
        assert val <= oracle + 1e-6

    def test_random_designs_against_grid(self, rng, public):
        inner = CapacityInner(public)
        for _ in range(3):
            T = rng.dirichlet(np.ones(4), size=2).reshape(2, 2, 2)
            val, atk = inner.solve(T)
            p_x = np.einsum("ead,exu->x", public.state_pmf, T)
            assert float(np.einsum("x,xy,xy->", p_x, atk[:, 0], public.distortion)) <= 0.2 + 1e-9
            np.testing.assert_allclose(val, brute_force_capacity_inner(public.state_pmf, T, 0.2, 0.01), atol=3e-3)

    def test_attack_set_enumeration(self):
        spec = build_preset("public", attack_set=(bsc(0.1), bsc(0.3)))
        val, atk = CapacityInner(spec).solve(flip_transmit(2, 0.4))
        np.testing.assert_array_equal(atk, bsc(0.3))


class TestExponentInner:
    @pytest.mark.parametrize("preset", ["public", "private"])
    def test_cdmc_not_beaten_by_random_points(self, preset, rng):
        spec = build_preset(preset)
        ne = spec.sizes[0]
        T = flip_transmit(ne, 0.35)
        pt = np.array([0.4, 0.6])
        R = 0.05
        val, q, atk = ExponentInner(spec, "cdmc").solve(pt, T, R)
        np.testing.assert_allclose(val, cdmc_objective(spec.state_pmf, pt, T, q, atk, R), atol=1e-9)
        p_x = np.einsum("ead,exu->x", spec.state_pmf, T)
        for _ in range(200):
            qr = rng.dirichlet(np.ones(int(np.prod(q.shape[3:]))), size=q.shape[:3]).reshape(q.shape)
            qr = qr * (spec.state_pmf[:, None, None, :, :, None] > 0)
            qr /= qr.sum(axis=(3, 4, 5), keepdims=True)
            a0 = rng.uniform(0, 0.4)
            a1 = max(0.0, min(1.0, (0.2 - p_x[0] * a0) / p_x[1]) * rng.uniform())
            ar = np.array([[[1 - a0, a0]], [[a1, 1 - a1]]])
            assert cdmc_objective(spec.state_pmf, pt, T, qr, ar, R) >= val - 1e-6

    @pytest.mark.parametrize("preset", ["public", "private"])
    def test_cam_not_beaten_by_random_points(self, preset, rng):
        spec = build_preset(preset)
        ne = spec.sizes[0]
        T = flip_transmit(ne, 0.35)
        pt = np.array([0.45, 0.55])
        R = 0.0
        val, q, atk = ExponentInner(spec, "cam").solve(pt, T, R)
        hyp = hyp_joint(pt, T, q)
        assert hyp_distortion(hyp, spec.distortion) <= 0.2 + 1e-8
        np.testing.assert_allclose(val, cam_objective(spec.state_pmf, pt, T, q, R), atol=1e-9)
        tried = 0
        while tried < 150:
            qr = random_kappa_q(rng, spec)
            if hyp_distortion(hyp_joint(pt, T, qr), spec.distortion) > 0.2:
                continue
            tried += 1
            assert cam_objective(spec.state_pmf, pt, T, qr, R) >= val - 1e-6

    def test_bad_model(self, public):
        with pytest.raises(ValueError):
            ExponentInner(public, "avc")
