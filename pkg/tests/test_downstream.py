import math

import numpy as np
import pytest

from rffb import bounds
from rffb import downstream as ds
from rffb.core import FrequencyBasis, sample_frequencies
from rffb.errors import ConvergenceError, InvalidArgument


def test_dataset_records_diameter():
    data = ds.Dataset([[0, 0], [3, 4]], [1, -1])
    assert data.R == pytest.approx(5.0)
    with pytest.raises(InvalidArgument):
        ds.Dataset([[0, 0], [3, 4]], [1, -1], R=4.0)
    with pytest.raises(InvalidArgument):
        ds.Dataset([[0, 0]], [1, 2])


def test_krr_scalar_case():
    lam = 0.7
    model = ds.krr_fit(ds.Dataset([[0.3, -1.0]], [1.0]), lam)
    assert model.dual_coefficients[0] == pytest.approx(1 / (1 + lam), rel=1e-14)
    assert ds.krr_predict(model, [0.3, -1.0]) == pytest.approx(1 / (1 + lam), rel=1e-14)


def test_krr_residual_on_random_instances():
    rng = np.random.default_rng(1)
    for seed in range(100):
        n, d = int(rng.integers(1, 51)), int(rng.integers(1, 5))
        data = ds.Dataset(rng.normal(size=(n, d)), rng.normal(size=n))
        for mode, basis in (("exact", None), ("rff", sample_frequencies(d, 64, seed))):
            model = ds.krr_fit(data, float(rng.uniform(0.01, 2)), mode, basis)
            assert model.residual <= 1e-10


def test_krr_limits_and_linearity():
    data = ds.regression_data(20, 2, 3)
    far = np.array([40.0, 40.0])
    model = ds.krr_fit(data, 0.5)
    assert abs(ds.krr_predict(model, far)) <= 20 * math.exp(-800) * np.linalg.norm(model.dual_coefficients) + 1e-300
    assert np.max(np.abs(ds.krr_predict(ds.krr_fit(data, 1e12), data.X))) < 1e-10
    doubled = ds.Dataset(data.X, 2 * data.y)
    x = data.X[:5] + 0.1
    assert np.allclose(ds.krr_predict(ds.krr_fit(doubled, 0.5), x), 2 * ds.krr_predict(model, x), rtol=1e-12, atol=0)


def test_krr_permutation_invariance():
    data = ds.regression_data(25, 3, 8)
    perm = np.random.default_rng(0).permutation(25)
    shuffled = ds.Dataset(data.X[perm], data.y[perm])
    x = ds.probe_points(data, 10, 1)
    a = ds.krr_predict(ds.krr_fit(data, 0.3), x)
    b = ds.krr_predict(ds.krr_fit(shuffled, 0.3), x)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


def test_krr_rff_converges_to_exact():
    data = ds.regression_data(10, 2, 4)
    x = ds.probe_points(data, 10, 2)
    exact = ds.krr_predict(ds.krr_fit(data, 0.5), x)
    approx = ds.krr_predict(ds.krr_fit(data, 0.5, "rff", sample_frequencies(2, 10 ** 6, 5)), x)
    assert np.max(np.abs(exact - approx)) <= 1e-2


def test_krr_gap_check_zero_error_basis():
    # D = 1 basis with omega = 0 gives k_hat = 1; use a single-point dataset so u = 0 on it
    data = ds.Dataset([[0.0]], [1.0])
    rep = ds.krr_gap_check(data, 0.5, FrequencyBasis([[0.0]]), np.array([[0.0]]))
    assert rep.u == 0.0 and rep.gap == 0.0 and rep.passed


def test_krr_gap_check_constant_targets_skips():
    data = ds.Dataset([[0.0], [1.0]], [2.0, 2.0])
    rep = ds.krr_gap_check(data, 0.5, sample_frequencies(1, 16, 1), np.array([[0.5]]))
    assert rep.skipped and rep.passed


def test_krr_gap_holds_on_seeds():
    for seed in range(10):
        data = ds.regression_data(30, 3, seed)
        rep = ds.krr_gap_check(data, 0.5, sample_frequencies(3, 2048, 100 + seed), ds.probe_points(data, 20, seed))
        assert rep.passed and rep.gap <= rep.bound


def test_krr_gap_bound_algebra():
    u, m = 0.01, 1.3
    for lam in (0.25, 0.5, 1.0, 2.0):
        ratio = ds.krr_gap_bound(lam / 2, m, u) / ds.krr_gap_bound(lam, m, u)
        assert ratio == pytest.approx(((lam / 2 + 1) / (lam / 2) ** 2) / ((lam + 1) / lam ** 2))
        assert ratio > 1


def test_kernel_error_decreases_with_D():
    data = ds.regression_data(20, 2, 1)
    ks = np.array([8, 10, 12, 14, 16])
    us = [np.mean([ds.kernel_entry_error(sample_frequencies(2, 2 ** k, s), data.X) for s in range(8)])
          for k in ks]
    assert all(b < a for a, b in zip(us, us[1:]))
    # roughly 1 / sqrt(D)
    slope = np.polyfit(ks * math.log(2), np.log(us), 1)[0]
    assert -0.7 <= slope <= -0.35


def test_svm_two_point_closed_form():
    # far apart: K = I, dual = min(1, box) for each coordinate
    data = ds.Dataset([[-30.0, 0.0], [30.0, 0.0]], [-1.0, 1.0])
    for C0 in (0.5, 2.0, 10.0):
        m = ds.svm_fit(data, C0)
        expected = min(1.0, C0 / 2)
        assert m.alpha == pytest.approx([expected, expected], abs=1e-12)
        assert ds.svm_predict(m, [30.0, 0.0]) == pytest.approx(expected, abs=1e-12)


def test_svm_two_point_closed_form_with_overlap():
    # K = [[1, k], [k, 1]] with opposite labels: interior solution a = 1 / (1 - k)
    x = 1.0
    data = ds.Dataset([[-x / 2], [x / 2]], [-1.0, 1.0])
    k = math.exp(-x * x / 2)
    m = ds.svm_fit(data, 100.0)
    assert m.alpha == pytest.approx([1 / (1 - k)] * 2, rel=1e-8)


def test_svm_small_C_shrinks_to_zero():
    data = ds.blob_data(30, 2, 1)
    m = ds.svm_fit(data, 1e-9)
    assert np.max(np.abs(ds.svm_predict(m, data.X))) <= 1e-9


def test_svm_certifies_gap_in_both_modes():
    data = ds.blob_data(60, 2, 2)
    basis = sample_frequencies(2, 1024, 3)
    for mode in ("exact", "rff"):
        m = ds.svm_fit(data, 1.0, mode, basis if mode == "rff" else None, tol=1e-8)
        assert 0 <= m.solver_gap <= 1e-8
        assert np.all(np.isfinite(ds.svm_predict(m, data.X)))
    m = ds.svm_fit(data, 1.0, "rff", basis)
    assert ds.svm_predict(m, data.X[:4]) == pytest.approx(ds.feature_matrix(data.X[:4], basis) @ m.eta, rel=1e-12)


def test_svm_rff_matches_kernel_form_of_the_same_dual():
    data = ds.blob_data(40, 2, 6)
    basis = sample_frequencies(2, 512, 7)
    m = ds.svm_fit(data, 1.0, "rff", basis)
    Z = ds.feature_matrix(data.X, basis)
    x = ds.probe_points(data, 8, 1)
    via_kernel = (ds.feature_matrix(x, basis) @ Z.T) @ (m.alpha * data.y)
    assert np.allclose(ds.svm_predict(m, x), via_kernel, rtol=1e-10, atol=1e-13)


def test_svm_rejects_bad_labels_and_budget():
    with pytest.raises(InvalidArgument):
        ds.svm_fit(ds.Dataset([[0.0], [1.0]], [1.0, 0.0]), 1.0)
    with pytest.raises(InvalidArgument):
        ds.svm_fit(ds.blob_data(10, 2, 1), 1.0, "rff")
    with pytest.raises(ConvergenceError) as err:
        ds.svm_fit(ds.blob_data(60, 2, 1), 1000.0, tol=1e-14, max_sweeps=2)
    assert err.value.achieved > 1e-14


def test_svm_gap_holds_on_seeds():
    for seed in range(5):
        data = ds.blob_data(60, 2, seed)
        rep = ds.svm_gap_check(data, 1.0, sample_frequencies(2, 4096, 50 + seed), ds.probe_points(data, 20, seed))
        assert rep.passed
        assert rep.slack <= 2 * math.sqrt(2e-8)


def test_svm_bound_decreases_with_n_at_scaled_weight():
    vals = [bounds.svm_error_propagation(n ** -0.5, n, 0.01) for n in (30, 60, 120)]
    assert vals == sorted(vals, reverse=True)


def test_solver_slack():
    assert ds.solver_slack(0.0) == 0.0
    assert ds.solver_slack(2e-8) == pytest.approx(2e-4)
