import numpy as np
import pytest

from dpdlab.estimation import (
    SingularSystemError,
    UpdateConfig,
    fit_proactive,
    fit_static,
    ila_update,
    ls_solve,
    robust_update,
)
from dpdlab.models import ModelStructure, ParameterSet, build_regressor, proactive_output
from conftest import crandn


def svd_solve(H, b):
    """Minimum-norm LS solution from an explicit SVD pseudoinverse."""
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    return Vh.conj().T @ ((U.conj().T @ b) / s)


def test_identity_system(rng):
    t = crandn(rng, 4)
    np.testing.assert_allclose(ls_solve(np.eye(4), t), t, rtol=1e-14)


def test_orthonormal_columns(rng):
    Q, _ = np.linalg.qr(crandn(rng, 40, 5))
    b = crandn(rng, 40)
    np.testing.assert_allclose(ls_solve(Q, b), Q.conj().T @ b, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("shape", [(64, 6), (32, 12), (256, 2)])
def test_matches_svd_oracle(rng, shape):
    H, b = crandn(rng, *shape), crandn(rng, shape[0])
    ref = svd_solve(H, b)
    assert np.linalg.norm(ls_solve(H, b) - ref) / np.linalg.norm(ref) < 1e-9


def test_badly_scaled_columns(rng):
    # MP columns at small drive span many decades; column scaling absorbs it.
    x = 0.05 * crandn(rng, 2000)
    H = build_regressor(x, ModelStructure("MP", 7, 2))
    theta = crandn(rng, H.shape[1]) * np.sqrt(np.mean(np.abs(H) ** 2, axis=0)) ** -1
    b = H @ theta
    np.testing.assert_allclose(ls_solve(H, b), theta, rtol=1e-6)


def test_residual_orthogonality(rng):
    H, b = crandn(rng, 80, 7), crandn(rng, 80)
    r = H @ ls_solve(H, b) - b
    assert np.linalg.norm(H.conj().T @ r) <= 1e-9 * np.linalg.norm(H.conj().T @ b)


def test_rank_deficient_system_names_column_count(rng):
    H = crandn(rng, 30, 4)
    H = np.hstack([H, H[:, :2] * 2.0])
    with pytest.raises(SingularSystemError, match="2 of 6 columns"):
        ls_solve(H, crandn(rng, 30))
    # The ridge makes it solvable.
    assert np.all(np.isfinite(ls_solve(H, crandn(rng, 30), 1e-10)))


def test_ridge_matches_augmented_oracle(rng):
    H, b, reg = crandn(rng, 50, 5), crandn(rng, 50), 1e-3
    scale = np.sqrt(np.mean(np.abs(H) ** 2, axis=0))
    Hs = H / scale
    lam = reg * np.sum(np.abs(Hs) ** 2) / 5
    ref = np.linalg.solve(Hs.conj().T @ Hs + lam * np.eye(5), Hs.conj().T @ b) / scale
    np.testing.assert_allclose(ls_solve(H, b, reg), ref, rtol=1e-10)


def test_ls_input_errors(rng):
    with pytest.raises(ValueError):
        ls_solve(crandn(rng, 5, 2), crandn(rng, 4))
    with pytest.raises(ValueError):
        ls_solve(crandn(rng, 2, 5), crandn(rng, 2))
    with pytest.raises(ValueError):
        ls_solve(np.full((4, 2), np.nan), crandn(rng, 4))
    with pytest.raises(ValueError):
        ls_solve(crandn(rng, 5, 2), crandn(rng, 5), -1.0)


def test_update_config_validation():
    for bad in (dict(mu=1.5), dict(mu=-0.1), dict(regularization=-1), dict(algorithm="lms")):
        with pytest.raises(ValueError):
            UpdateConfig(**bad)
    assert UpdateConfig(algorithm="ILA").algorithm == "ila"


def _system(rng, n=200, k=6):
    return crandn(rng, k), crandn(rng, n, k), crandn(rng, n)


def test_ila_fixed_points(rng):
    theta, H, x = _system(rng)
    theta_hat = ls_solve(H, x, 0.0)
    assert np.array_equal(ila_update(theta, H, x, UpdateConfig(0.0, 0.0)), theta)
    assert np.array_equal(ila_update(theta, H, x, UpdateConfig(1.0, 0.0)), theta_hat)
    np.testing.assert_allclose(ila_update(np.zeros(6), H, x, UpdateConfig(0.5, 0.0)),
                               theta_hat / 2, rtol=1e-14)


@pytest.mark.parametrize("mu", [0.1, 0.25, 0.8])
def test_ila_is_affine_in_mu(rng, mu):
    theta, H, x = _system(rng)
    theta_hat = ls_solve(H, x, 0.0)
    got = ila_update(theta, H, x, UpdateConfig(mu, 0.0))
    assert np.array_equal(got, theta + mu * (theta_hat - theta))


def test_robust_fixed_points(rng):
    theta, H_y, _ = _system(rng)
    H_x = crandn(rng, *H_y.shape)
    x = H_y @ theta
    for mu in (0.3, 1.0):
        assert np.array_equal(robust_update(theta, H_y, H_x, x, UpdateConfig(mu)), theta)
    assert np.array_equal(robust_update(theta, H_y, H_x, crandn(rng, len(x)),
                                        UpdateConfig(0.0)), theta)


def test_robust_equals_ila_for_identical_regressors(rng):
    theta, H, x = _system(rng)
    cfg = UpdateConfig(1.0, 0.0)
    np.testing.assert_allclose(robust_update(theta, H, H, x, cfg), ila_update(theta, H, x, cfg),
                               rtol=1e-10)


def test_robust_update_definition(rng):
    theta, H_y, x = _system(rng)
    H_x = crandn(rng, *H_y.shape)
    e = x - H_y @ theta
    ref = theta + 0.4 * svd_solve(H_x, e)
    np.testing.assert_allclose(robust_update(theta, H_y, H_x, x, UpdateConfig(0.4, 0.0)), ref,
                               rtol=1e-10)
    with pytest.raises(ValueError):
        robust_update(theta, H_y, H_x[:, :3], x, UpdateConfig())


def test_updates_leave_consistent_model_alone(rng):
    s = ModelStructure("MP", 3, 1)
    y = crandn(rng, 300)
    H = build_regressor(y, s)
    theta = crandn(rng, s.n_coeff)
    x = H @ theta
    np.testing.assert_allclose(ila_update(theta, H, x, UpdateConfig(0.7, 0.0)), theta, rtol=1e-10)
    np.testing.assert_array_equal(robust_update(theta, H, build_regressor(x, s), x,
                                                UpdateConfig(0.7)), theta)


def test_fit_static_recovers_model(rng):
    s = ModelStructure("MP", 5, 2)
    x = 0.3 * crandn(rng, 3000)
    theta = crandn(rng, s.n_coeff)
    y = build_regressor(x, s) @ theta
    np.testing.assert_allclose(fit_static(x, y, s, 0.0).theta, theta, rtol=1e-8)


def test_fit_proactive_recovers_both_vectors(rng):
    s = ModelStructure("MP", 3, 2)
    x = 0.5 * crandn(rng, 4000)
    st = 0.5 + 0.5 * np.sin(np.linspace(0, 6, 4000))
    truth = ParameterSet(s, crandn(rng, s.n_coeff), crandn(rng, s.n_coeff))
    y = proactive_output(x, truth, st)
    got = fit_proactive(x, y, st, s, 0.0)
    for a, b in ((got.theta, truth.theta), (got.theta_dyn, truth.theta_dyn)):
        assert np.linalg.norm(a - b) / np.linalg.norm(b) < 1e-8


def test_fit_proactive_degenerate_state(rng):
    s = ModelStructure("MP", 3, 1)
    x = 0.5 * crandn(rng, 1000)
    y = x + 0.1 * x * np.abs(x) ** 2
    got = fit_proactive(x, y, np.zeros(1000), s, 1e-10)
    np.testing.assert_array_equal(got.theta_dyn, 0)
    # Same fit up to the (tiny) ridge bias, which is normalized per system.
    np.testing.assert_allclose(got.theta, fit_static(x, y, s, 1e-10).theta, atol=1e-7)


def test_fit_proactive_identity_system(rng):
    s = ModelStructure("MP", 3, 1)
    x = 0.5 * crandn(rng, 1000)
    st = rng.random(1000)
    expected = np.zeros(s.n_coeff)
    expected[0] = 1
    got = fit_proactive(x, x, st, s, 0.0)
    np.testing.assert_allclose(got.theta, expected, atol=1e-10)
    np.testing.assert_allclose(got.theta_dyn, 0, atol=1e-10)
    got = fit_proactive(x, x, st, s)
    np.testing.assert_allclose(got.theta, expected, atol=1e-6)
    np.testing.assert_allclose(got.theta_dyn, 0, atol=1e-6)


def test_fit_proactive_residual_not_worse_than_static(rng):
    s = ModelStructure("MP", 3, 1)
    x = 0.5 * crandn(rng, 2000)
    st = rng.random(2000)
    y = x - 0.2 * st * x * np.abs(x) ** 2 + 0.01 * crandn(rng, 2000)
    pro = fit_proactive(x, y, st, s)
    stat = fit_static(x, y, s)
    r_pro = np.linalg.norm(proactive_output(x, pro, st) - y)
    r_stat = np.linalg.norm(build_regressor(x, s) @ stat.theta - y)
    assert r_pro <= r_stat
