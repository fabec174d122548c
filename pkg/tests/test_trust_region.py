import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimtrust import trust_region as tr
from dimtrust.policy_math import RejectedInput
from dimtrust.trust_region import FisherModel


def random_spd(n, rng, cond=50.0):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = np.exp(rng.uniform(0, math.log(cond), size=n))
    return FisherModel((Q * lam) @ Q.T), Q, lam


def test_fisher_model_validation():
    with pytest.raises(RejectedInput):
        FisherModel(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(RejectedInput):
        FisherModel(np.diag([1.0, -1.0]))
    Q = np.eye(2)
    with pytest.raises(RejectedInput):
        FisherModel(np.eye(2), Q=Q, Lambda=np.array([1.0, 3.0]))
    F = FisherModel(Q=Q, Lambda=np.array([1.0, 3.0]))
    np.testing.assert_allclose(F.matrix, np.diag([1.0, 3.0]))


def test_trpo_identity_fisher():
    res = tr.trpo_update([1.0, 0.0], FisherModel(np.eye(2)), 0.5)
    np.testing.assert_allclose(res.delta_theta, [1.0, 0.0], atol=1e-15)
    assert res.norm == pytest.approx(1.0)


def test_trpo_diagonal_fisher():
    F = FisherModel(np.diag([1.0, 4.0]))
    res = tr.trpo_update([1.0, 1.0], F, 0.5)
    # g^T F^-1 g = 1.25; step = sqrt(1/1.25) (1, 0.25)
    scale = math.sqrt(1 / 1.25)
    np.testing.assert_allclose(res.delta_theta, [scale, 0.25 * scale], rtol=1e-14)
    assert res.delta_theta[0] == pytest.approx(0.8944, abs=1e-4)
    assert res.delta_theta[1] == pytest.approx(0.2236, abs=1e-4)
    assert res.lagrange_scale == pytest.approx(scale)


def test_trpo_gradient_scale_invariance():
    rng = np.random.default_rng(1)
    F, _, _ = random_spd(5, rng)
    g = rng.normal(size=5)
    a = tr.trpo_update(g, F, 0.01).delta_theta
    b = tr.trpo_update(37.0 * g, F, 0.01).delta_theta
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_trpo_errors():
    with pytest.raises(tr.ZeroGradient):
        tr.trpo_update([0.0, 0.0], FisherModel(np.eye(2)), 0.1)
    with pytest.raises(RejectedInput):
        tr.trpo_update([1.0], FisherModel(np.eye(2)), 0.1)
    with pytest.raises(RejectedInput):
        tr.trpo_update([1.0, 0.0], FisherModel(np.eye(2)), 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31 - 1), st.floats(1e-4, 1.0))
def test_kl_saturation_and_direction(n, seed, delta):
    rng = np.random.default_rng(seed)
    F, _, _ = random_spd(n, rng)
    g = rng.normal(size=n)
    res = tr.trpo_update(g, F, delta)
    quad = 0.5 * res.delta_theta @ F.matrix @ res.delta_theta
    assert quad == pytest.approx(delta, rel=1e-8)
    assert res.norm == pytest.approx(np.linalg.norm(res.delta_theta), rel=1e-12)
    nat = np.linalg.solve(F.matrix, g)
    cos = nat @ res.delta_theta / (np.linalg.norm(nat) * res.norm)
    assert cos >= 1 - 1e-10


def test_cg_identity_one_iteration():
    calls = []

    def fvp(v):
        calls.append(1)
        return v

    res = tr.trpo_update_cg(np.array([0.3, -1.2, 2.0]), fvp, 0.1, max_iters=5, tol=1e-12)
    assert len(calls) == 1
    direct = tr.trpo_update([0.3, -1.2, 2.0], FisherModel(np.eye(3)), 0.1)
    np.testing.assert_allclose(res.delta_theta, direct.delta_theta, rtol=1e-12)


@pytest.mark.parametrize("n", [50, 120, 200])
def test_cg_matches_direct(n):
    rng = np.random.default_rng(n)
    F, _, _ = random_spd(n, rng, cond=20.0)
    g = rng.normal(size=n)
    direct = tr.trpo_update(g, F, 0.02)
    cg = tr.trpo_update_cg(g, F.matvec, 0.02, max_iters=5 * n, tol=1e-10)
    np.testing.assert_allclose(cg.delta_theta, direct.delta_theta, rtol=1e-6, atol=1e-6 * direct.norm)


def test_cg_convergence_failure():
    rng = np.random.default_rng(0)
    F, _, _ = random_spd(30, rng, cond=1e4)
    with pytest.raises(tr.ConvergenceFailure) as info:
        tr.trpo_update_cg(rng.normal(size=30), F.matvec, 0.1, max_iters=1, tol=1e-14)
    assert info.value.residual > 0


def test_natural_gradient_switches_to_cg_above_threshold():
    n = tr.CG_THRESHOLD + 10
    rng = np.random.default_rng(2)
    lam = rng.uniform(1, 3, size=n)
    F = FisherModel(np.diag(lam))
    g = rng.normal(size=n)
    a = tr.natural_gradient_update(g, F, 0.05)
    b = tr.trpo_update(g, F, 0.05)
    np.testing.assert_allclose(a.delta_theta, b.delta_theta, rtol=1e-8)


def test_beta_update():
    g = np.array([0.4, -2.0, 1.0])
    np.testing.assert_allclose(tr.beta_update(g, FisherModel(np.eye(3)), 1.0).delta_theta, g)
    res = tr.beta_update([1.0, 1.0], FisherModel(np.diag([1.0, 4.0])), 2.0)
    np.testing.assert_allclose(res.delta_theta, [0.5, 0.125], rtol=1e-14)
    half = tr.beta_update([1.0, 1.0], FisherModel(np.diag([1.0, 4.0])), 4.0)
    np.testing.assert_allclose(half.delta_theta, 0.5 * res.delta_theta)
    rng = np.random.default_rng(4)
    F, _, _ = random_spd(6, rng)
    g = rng.normal(size=6)
    r1 = tr.beta_update(g, F, 3.0)
    np.testing.assert_allclose(F.matrix @ r1.delta_theta * 3.0, g, rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(tr.beta_update(5 * g, F, 3.0).delta_theta, 5 * r1.delta_theta, rtol=1e-12)


def test_update_norm_eigen_examples():
    rng = np.random.default_rng(0)
    assert tr.update_norm_eigen(rng.normal(size=4), np.ones(4), 0.3) == pytest.approx(math.sqrt(0.6))
    v = tr.update_norm_eigen([1.0, 1.0], [1.0, 4.0], 0.5)
    assert v == pytest.approx(math.sqrt((1 + 1 / 16) / (1 + 1 / 4)), rel=1e-14)
    assert v == pytest.approx(0.9220, abs=1e-4)
    assert tr.update_norm_eigen([1.0, 0.0], [9.0, 2.0], 0.5) == pytest.approx(1.0 / 3.0)
    with pytest.raises(tr.ZeroGradient):
        tr.update_norm_eigen([0.0, 0.0], [1.0, 1.0], 0.5)


def test_update_norm_eigen_matches_trpo_on_random_systems():
    rng = np.random.default_rng(123)
    for _ in range(100):
        n = int(rng.integers(1, 15))
        F, Q, lam = random_spd(n, rng)
        g = rng.normal(size=n)
        alpha = Q.T @ g
        assert tr.update_norm_eigen(alpha, lam, 0.05) == pytest.approx(tr.trpo_update(g, F, 0.05).norm, rel=1e-8)


def test_synthesized_fisher():
    block = np.array([[2.0, 0.3], [0.3, 1.0]])
    np.testing.assert_allclose(tr.synthesize_factorized_fisher(1, block).matrix, block)
    lam1 = np.linalg.eigvalsh(block)
    np.testing.assert_allclose(np.linalg.eigvalsh(tr.synthesize_factorized_fisher(4, block).matrix), 4 * lam1)
    np.testing.assert_allclose(tr.synthesize_factorized_fisher(9, np.eye(3)).matrix, 9 * np.eye(3))


def test_scaling_experiment_synthetic_ratios_and_slopes():
    rng = np.random.default_rng(9)
    base, _, _ = random_spd(4, rng)
    g = rng.normal(size=4)
    table = tr.scaling_experiment([4, 1, 2, 8, 16, 32], base, g, delta=0.01, beta=1.0)
    assert table.dims == [1, 2, 4, 8, 16, 32]
    assert table.trpo_norm[2] / table.trpo_norm[0] == pytest.approx(0.5, rel=1e-12)
    assert table.beta_norm[2] / table.beta_norm[0] == pytest.approx(0.25, rel=1e-12)
    assert table.trpo_slope == pytest.approx(-0.5, abs=1e-6)
    assert table.beta_slope == pytest.approx(-1.0, abs=1e-6)


def test_scaling_experiment_monte_carlo_fisher():
    rng = np.random.default_rng(21)

    def fisher(d):
        return tr.monte_carlo_shared_head_fisher(d, 0.0, -0.5, 20_000, rng)

    table = tr.scaling_experiment([1, 2, 4, 8, 16, 32], fisher, np.array([1.0, 0.5]), 0.01, 1.0)
    assert table.trpo_slope == pytest.approx(-0.5, abs=0.1)
    assert table.beta_slope == pytest.approx(-1.0, abs=0.1)


def test_loglog_slope_degenerate():
    assert tr.loglog_slope([4], [1.0]) is None
    assert tr.loglog_slope([2, 2], [1.0, 3.0]) is None
