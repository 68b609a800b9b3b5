import math

import numpy as np
import pytest
import scipy.linalg

from lowrank_maps import kernel as kmod
from lowrank_maps.errors import DimensionMismatch, InputError, NotPsd
from lowrank_maps.kernel import (
    KernelSpec,
    eigenfunction_eval,
    gram,
    kernel_lowrank_solve,
    polynomial_features,
)
from lowrank_maps.solver import solve_lowrank

LINEAR = KernelSpec("linear")
POLY = KernelSpec("polynomial", degree=2, offset=1.0)
GAUSS = KernelSpec("gaussian", bandwidth=1.5)


def normalized_left_eigvecs(m, x):
    """Left eigenvectors of ``m``, unit norm, largest value on the columns of ``x`` real positive."""
    lam, vl = scipy.linalg.eig(m, left=True, right=False)
    out = []
    for j in range(lam.size):
        # scipy returns vl with vl^H m = lam vl^H; we want xi^T m = lam xi^T
        xi = np.conj(vl[:, j]) / np.linalg.norm(vl[:, j])
        vals = x.T @ xi
        i = int(np.argmax(np.abs(vals)))
        out.append((lam[j], xi * abs(vals[i]) / vals[i]))
    return out


def test_gram_examples():
    a = np.array([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(gram(LINEAR, a, a), np.eye(2))
    np.testing.assert_array_equal(gram(POLY, a, a), [[4.0, 1.0], [1.0, 4.0]])
    g = gram(GAUSS, a, a)
    np.testing.assert_array_equal(np.diag(g), [1.0, 1.0])
    assert g[0, 1] == pytest.approx(math.exp(-2.0 / (2 * 1.5**2)), rel=1e-15)
    assert KernelSpec("polynomial", degree=3, offset=0.0).evaluate([1.0, 2.0], [3.0, 1.0]) == 125.0


def test_gram_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        gram(LINEAR, np.ones((2, 3)), np.ones((3, 3)))


def test_kernel_spec_validation():
    with pytest.raises(InputError):
        KernelSpec("cubic")
    with pytest.raises(InputError):
        KernelSpec("gaussian", bandwidth=0.0)
    with pytest.raises(InputError):
        KernelSpec("polynomial", degree=0)
    with pytest.raises(InputError):
        KernelSpec.from_dict({"kind": "linear", "width": 2})
    spec = KernelSpec.from_dict({"kind": "polynomial", "degree": 3, "offset": 0.5})
    assert KernelSpec.from_dict(spec.to_dict()) == spec


def test_polynomial_features_reproduce_kernel(rng):
    pts = rng.standard_normal((2, 7))
    phi = polynomial_features(pts, 2, 1.0)
    assert phi.shape == (6, 7)
    np.testing.assert_allclose(phi.T @ phi, gram(POLY, pts, pts), rtol=1e-12, atol=1e-12)


def test_linear_kernel_matches_finite_solver(rng):
    for _ in range(15):
        d, q = int(rng.integers(1, 6)), int(rng.integers(1, 9))
        x, y = rng.standard_normal((d, q)), rng.standard_normal((d, q))
        k = int(rng.integers(0, d + 1))
        ks = kernel_lowrank_solve(LINEAR, x, y, k)
        fs = solve_lowrank(x, y, k, 2)
        assert math.sqrt(ks.achieved_error_sq) == pytest.approx(fs.achieved_error, rel=1e-8, abs=1e-10)
        assert ks.achieved_error_sq == pytest.approx(ks.predicted_error_sq, rel=1e-8, abs=1e-10)
        assert ks.k_effective == fs.k_effective
        np.testing.assert_allclose(ks.z_sigma[: fs.z_sigma.size], fs.z_sigma, atol=1e-8)


def test_polynomial_kernel_matches_explicit_lift(rng):
    for _ in range(10):
        q = int(rng.integers(2, 10))
        x, y = rng.standard_normal((2, q)), rng.standard_normal((2, q))
        k = int(rng.integers(0, 7))
        ks = kernel_lowrank_solve(POLY, x, y, k)
        fs = solve_lowrank(polynomial_features(x, 2, 1.0), polynomial_features(y, 2, 1.0), k, 2)
        scale = 1 + fs.achieved_error**2
        assert ks.achieved_error_sq == pytest.approx(fs.achieved_error**2, rel=1e-7, abs=1e-9 * scale)


def test_k_zero_error_is_trace(rng):
    x, y = rng.standard_normal((3, 6)), rng.standard_normal((3, 6))
    ks = kernel_lowrank_solve(GAUSS, x, y, 0)
    g_yy = gram(GAUSS, y, y)
    assert ks.achieved_error_sq == pytest.approx(np.trace(g_yy), rel=1e-12)
    assert ks.predicted_error_sq == pytest.approx(np.trace(g_yy), rel=1e-12)
    assert ks.eigenvalues.size == 0


def test_gaussian_formula_consistency_and_monotone(rng):
    x, y = rng.standard_normal((2, 12)), rng.standard_normal((2, 12))
    errs = []
    for k in range(13):
        ks = kernel_lowrank_solve(GAUSS, x, y, k)
        assert ks.achieved_error_sq == pytest.approx(ks.predicted_error_sq, rel=1e-7, abs=1e-9)
        errs.append(ks.achieved_error_sq)
    assert all(b <= a + 1e-10 for a, b in zip(errs, errs[1:]))


def test_eigenfunctions_match_left_eigenvectors(rng):
    for _ in range(10):
        d = int(rng.integers(2, 6))
        x, y = rng.standard_normal((d, 12)), rng.standard_normal((d, 12))
        k = int(rng.integers(1, d + 1))
        fs = solve_lowrank(x, y, k, 2)
        ks = kernel_lowrank_solve(LINEAR, x, y, k)
        ref = normalized_left_eigvecs(fs.m_star, x)
        x_new = rng.standard_normal((d, 4))
        vals = eigenfunction_eval(ks, LINEAR, x, x_new)
        for j, lam in enumerate(ks.eigenvalues):
            if abs(lam) < 1e-8:
                continue
            dist = [abs(l - lam) for l, _ in ref]
            xi = ref[int(np.argmin(dist))][1]
            assert min(dist) < 1e-8
            np.testing.assert_allclose(vals[:, j], x_new.T @ xi, atol=1e-7)


def test_eigenfunction_at_training_points(rng):
    x, y = rng.standard_normal((2, 8)), rng.standard_normal((2, 8))
    ks = kernel_lowrank_solve(GAUSS, x, y, 3)
    np.testing.assert_allclose(eigenfunction_eval(ks, GAUSS, x, x), ks.train_eigfn_values, atol=1e-12)
    with pytest.raises(DimensionMismatch):
        eigenfunction_eval(ks, GAUSS, x, np.ones((3, 2)))


def test_eigenfunctions_with_polynomial_lift(rng):
    x, y = rng.standard_normal((2, 10)), rng.standard_normal((2, 10))
    ks = kernel_lowrank_solve(POLY, x, y, 3)
    px, py = polynomial_features(x, 2, 1.0), polynomial_features(y, 2, 1.0)
    fs = solve_lowrank(px, py, 3, 2)
    ref = normalized_left_eigvecs(fs.m_star, px)
    x_new = rng.standard_normal((2, 3))
    vals = eigenfunction_eval(ks, POLY, x, x_new)
    for j, lam in enumerate(ks.eigenvalues):
        dist = [abs(l - lam) for l, _ in ref]
        xi = ref[int(np.argmin(dist))][1]
        np.testing.assert_allclose(vals[:, j], polynomial_features(x_new, 2, 1.0).T @ xi, atol=1e-6)


def test_duplicated_samples(rng):
    # repeating every sample keeps the operator and doubles the squared error
    x, y = rng.standard_normal((3, 7)), rng.standard_normal((3, 7))
    a = kernel_lowrank_solve(GAUSS, x, y, 2)
    b = kernel_lowrank_solve(GAUSS, np.hstack([x, x]), np.hstack([y, y]), 2)
    np.testing.assert_allclose(b.eigenvalues, a.eigenvalues, atol=1e-9)
    assert b.achieved_error_sq == pytest.approx(2 * a.achieved_error_sq, rel=1e-8)


def test_indefinite_gram_rejected(monkeypatch, rng):
    def bad_gram(kernel, a, b):
        return -np.eye(np.asarray(a).shape[1])

    monkeypatch.setattr(kmod, "gram", bad_gram)
    with pytest.raises(NotPsd):
        kernel_lowrank_solve(LINEAR, np.ones((2, 3)), np.ones((2, 3)), 1)


def test_jitter_recorded(rng):
    x, y = rng.standard_normal((2, 5)), rng.standard_normal((2, 5))
    ks = kernel_lowrank_solve(GAUSS, x, y, 2, jitter=1e-8)
    assert ks.jitter == 1e-8
