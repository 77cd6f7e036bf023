import math

import numpy as np
import pytest

from casbp import ProblemSpec, parse

from helpers import make_spec, matched_spec, square_grid


def production_spec(dt=5e-5, nx=101):
    return make_spec(nx=nx, t1=1.0, dt=dt, stride=10)


def test_mismatch_matrix_production_data():
    spec = production_spec()
    w = spec.mismatch_matrix()
    np.testing.assert_array_equal(w, np.array([[-1.0, 0.0], [0.0, 0.0]]))


def test_mismatch_matrix_matched_channel_is_zero():
    # g = I, R = I, Sigma = lam * I: the weight vanishes identically
    lam = 2.0
    spec = make_spec(g=np.eye(2), sigma=math.sqrt(lam) * np.eye(2), lam=lam)
    np.testing.assert_allclose(spec.mismatch_matrix(), 0.0, atol=1e-15)


def test_mismatch_matrix_identity_case():
    spec = make_spec(g=np.eye(2), sigma=np.eye(2), lam=2.0)
    np.testing.assert_allclose(spec.mismatch_matrix(), np.eye(2), atol=1e-15)


def test_mismatch_matrix_symmetric_for_random_specs():
    rng = np.random.default_rng(8)
    for _ in range(20):
        g = rng.standard_normal((2, rng.integers(1, 4)))
        a = rng.standard_normal((g.shape[1], g.shape[1]))
        r = a @ a.T + g.shape[1] * np.eye(g.shape[1])
        s = rng.standard_normal((2, 2))
        spec = make_spec(g=g, sigma=s, R=r, lam=float(rng.uniform(0.5, 2)))
        w = spec.mismatch_matrix()
        np.testing.assert_allclose(w, w.T, atol=1e-12)


def test_mismatch_matrix_rejects_non_spd_R():
    spec = make_spec(g=np.eye(2), R=np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(ValueError, match="positive definite"):
        spec.mismatch_matrix()


def test_cfl_bound_production_arithmetic():
    spec = production_spec()
    # 0.9 * min(dx^2, dy^2) / (S11 + S22 + |S12|) = 0.9 * 4e-4 / 2
    assert spec.cfl_bound() == pytest.approx(1.8e-4, rel=1e-12)
    report = spec.validate()
    assert report.cfl_ok and report.ok
    assert report.cfl_bound == pytest.approx(1.8e-4, rel=1e-12)


def test_cfl_fail_for_large_dt():
    report = production_spec(dt=1e-3).validate()
    assert not report.cfl_ok
    assert not report.ok
    assert any("CFL" in f for f in report.failures)


def test_w_psd_flag_is_not_a_hard_failure():
    report = production_spec().validate()
    assert report.w_psd is False
    assert report.ok  # solver still runs; the flag is informational
    assert report.mismatch_norm == pytest.approx(1.0)


def test_negative_state_cost_is_hard_failure():
    spec = make_spec(q="x1 - 10")
    report = spec.validate()
    assert not report.q_nonnegative
    assert any("nonnegative" in f for f in report.failures)


def test_lambda_must_be_one_when_mismatched():
    spec = make_spec(lam=2.0)  # production-style g=(0,1)^T keeps W nonzero
    report = spec.validate()
    assert any("lambda" in f for f in report.failures)
    # matched channel may override lambda freely
    ok = make_spec(g=np.eye(2), sigma=math.sqrt(3.0) * np.eye(2), lam=3.0)
    assert ok.validate().ok


def test_sigma_diagonal_must_be_positive():
    spec = make_spec(sigma=np.array([[0.0, 0.0], [0.0, 1.0]]))
    report = spec.validate()
    assert any("diagonal" in f for f in report.failures)


def test_validation_is_pure():
    spec = production_spec(nx=41, dt=2e-4)
    assert spec.validate() == spec.validate()


def test_timestep_divides_horizon_exactly():
    spec = make_spec(t1=1.0, dt=5e-5)
    assert spec.n_steps == 20000
    assert spec.n_steps * spec.dt_effective == spec.horizon


def test_control_recovery_matrix():
    spec = production_spec()
    rec = spec.control_recovery_matrix
    np.testing.assert_array_equal(rec, np.array([[0.0, 1.0]]))
