import math

import numpy as np
import pytest

from lowrank_maps.continuous import (
    HsKernel,
    QuadratureRule,
    composite_trapezoid,
    continuous_lowrank,
    discretize_hs,
    gauss_legendre,
    polynomial_kernel,
    refine_to_convergence,
    tensor_rule,
)
from lowrank_maps.errors import InputError, KernelEvalFailure, NotConverged
from lowrank_maps.linalg import schatten_norm
from lowrank_maps.solver import solve_lowrank

LINEAR_1U = polynomial_kernel([[1.0, 0.0], [0.0, 1.0]])  # k(u) = [1; u]


def smooth_kx():
    return HsKernel(3, lambda u: np.array([1.0, math.sin(u), math.exp(u)]))


def mapped(kernel, a):
    return HsKernel(a.shape[0], lambda u: a @ kernel.eval(u))


# ---------------------------------------------------------------- discretization

def test_gram_of_linear_kernel_is_exact():
    xh = discretize_hs(LINEAR_1U, gauss_legendre(2))
    np.testing.assert_allclose(xh @ xh.T, [[1.0, 0.5], [0.5, 1.0 / 3.0]], rtol=0, atol=1e-12)


def test_constant_and_zero_kernels():
    xh = discretize_hs(HsKernel(2, lambda u: np.array([1.0, 0.0])), gauss_legendre(5))
    np.testing.assert_allclose(xh @ xh.T, [[1.0, 0.0], [0.0, 0.0]], atol=1e-14)
    zh = discretize_hs(HsKernel(2, lambda u: np.zeros(2)), gauss_legendre(5))
    np.testing.assert_array_equal(zh, np.zeros((2, 5)))


@pytest.mark.parametrize("bad", [
    lambda u: np.array([np.nan, 1.0]),
    lambda u: np.array([1.0, 2.0, 3.0]),
    lambda u: 1.0 / 0.0,
])
def test_kernel_eval_failure(bad):
    with pytest.raises(KernelEvalFailure):
        discretize_hs(HsKernel(2, bad), gauss_legendre(3))


def test_quadrature_exactness():
    # cubic components; products have degree <= 6 <= 2Q - 1 for Q = 4
    kx = polynomial_kernel([[1.0, 2.0, 0.0, -1.0], [0.0, 1.0, 3.0, 0.5]])
    ky = polynomial_kernel([[0.5, 0.0, 1.0, 1.0], [2.0, -1.0, 0.0, 0.0]])
    xh, yh = discretize_hs(kx, gauss_legendre(4)), discretize_hs(ky, gauss_legendre(4))

    def exact(ca, cb):
        ca, cb = np.asarray(ca), np.asarray(cb)
        out = np.zeros((ca.shape[0], cb.shape[0]))
        for i in range(ca.shape[0]):
            for j in range(cb.shape[0]):
                prod = np.polynomial.polynomial.polymul(ca[i], cb[j])
                out[i, j] = sum(c / (d + 1) for d, c in enumerate(prod))
        return out

    cx = [[1.0, 2.0, 0.0, -1.0], [0.0, 1.0, 3.0, 0.5]]
    cy = [[0.5, 0.0, 1.0, 1.0], [2.0, -1.0, 0.0, 0.0]]
    np.testing.assert_allclose(xh @ xh.T, exact(cx, cx), atol=1e-12)
    np.testing.assert_allclose(yh @ xh.T, exact(cy, cx), atol=1e-12)
    np.testing.assert_allclose(yh @ yh.T, exact(cy, cy), atol=1e-12)


# ---------------------------------------------------------------- rules

@pytest.mark.parametrize("q", [1, 2, 5, 17])
def test_gauss_legendre_weights(q):
    rule = gauss_legendre(q, -1.0, 3.0)
    assert rule.weights.sum() == pytest.approx(4.0, rel=1e-10)
    assert np.all((rule.nodes > -1.0) & (rule.nodes < 3.0))


def test_trapezoid_rule():
    rule = composite_trapezoid(5, 0.0, 2.0)
    np.testing.assert_allclose(rule.weights, [0.25, 0.5, 0.5, 0.5, 0.25])
    assert rule.weights.sum() == pytest.approx(2.0, rel=1e-10)
    # exact for linear integrands
    assert rule.weights @ rule.nodes[:, 0] == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(InputError):
        composite_trapezoid(1)


def test_tensor_rule():
    rule = tensor_rule(gauss_legendre(3), gauss_legendre(2, 0.0, 2.0))
    assert rule.nodes.shape == (6, 2)
    assert rule.weights.sum() == pytest.approx(2.0, rel=1e-10)
    # integral of x*y over [0,1] x [0,2] is 1
    assert rule.weights @ (rule.nodes[:, 0] * rule.nodes[:, 1]) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(InputError):
        tensor_rule()


def test_rule_validation():
    with pytest.raises(InputError):
        QuadratureRule(np.array([0.0, 1.0]), np.array([1.0, -1.0]))
    with pytest.raises(InputError):
        QuadratureRule(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(InputError):
        gauss_legendre(0)


def test_two_dimensional_kernel():
    kx = HsKernel(3, lambda u: np.array([1.0, u[0], u[1]]))
    xh = discretize_hs(kx, tensor_rule(gauss_legendre(2), gauss_legendre(2)))
    expected = [[1.0, 0.5, 0.5], [0.5, 1 / 3, 0.25], [0.5, 0.25, 1 / 3]]
    np.testing.assert_allclose(xh @ xh.T, expected, atol=1e-12)


# ---------------------------------------------------------------- solve

def test_recovers_operator(rng):
    a = rng.standard_normal((3, 3))
    sol = continuous_lowrank(smooth_kx(), mapped(smooth_kx(), a), gauss_legendre(8), 3)
    np.testing.assert_allclose(sol.m_star, a, rtol=1e-8, atol=1e-8 * np.abs(a).max())
    assert sol.extras["nodes"] == 8


@pytest.mark.parametrize("p", [1, 2, math.inf])
def test_k_zero(p):
    ky = mapped(LINEAR_1U, np.diag([2.0, 0.5]))
    rule = gauss_legendre(4)
    sol = continuous_lowrank(LINEAR_1U, ky, rule, 0, p)
    assert sol.achieved_error == schatten_norm(discretize_hs(ky, rule), p)
    assert ("approximation" in sol.extras) == (p != 2)


def test_diagonal_map_error_matches_prediction():
    a = np.diag([2.0, 0.01])
    rule = gauss_legendre(2)
    sol = continuous_lowrank(LINEAR_1U, mapped(LINEAR_1U, a), rule, 1, 2)
    fin = solve_lowrank(discretize_hs(LINEAR_1U, rule), discretize_hs(mapped(LINEAR_1U, a), rule), 1, 2)
    assert sol.achieved_error == fin.achieved_error
    assert sol.achieved_error == pytest.approx(fin.z_sigma[1], rel=1e-9)
    assert abs(sol.achieved_error - sol.predicted_error) <= 1e-9


def test_weight_scaling(rng):
    a = rng.standard_normal((3, 3))
    ky = HsKernel(3, lambda u: a @ smooth_kx().eval(u) + np.array([0.0, u**2, math.cos(3 * u)]))
    rule = gauss_legendre(6)
    c = 3.7
    s1 = continuous_lowrank(smooth_kx(), ky, rule, 2)
    s2 = continuous_lowrank(smooth_kx(), ky, rule.scaled(c), 2)
    np.testing.assert_allclose(s2.m_star, s1.m_star, rtol=1e-9, atol=1e-9 * np.abs(s1.m_star).max())
    assert s2.achieved_error == pytest.approx(math.sqrt(c) * s1.achieved_error, rel=1e-9)


def test_node_permutation(rng):
    ky = HsKernel(3, lambda u: np.array([u**3, math.sin(2 * u), 1.0 - u]))
    rule = gauss_legendre(7)
    perm = rng.permutation(rule.size)
    permuted = QuadratureRule(rule.nodes[perm], rule.weights[perm])
    s1 = continuous_lowrank(smooth_kx(), ky, rule, 2)
    s2 = continuous_lowrank(smooth_kx(), ky, permuted, 2)
    np.testing.assert_allclose(s2.m_star, s1.m_star, atol=1e-12)
    assert s2.achieved_error == pytest.approx(s1.achieved_error, abs=1e-12)
    assert s2.predicted_error == pytest.approx(s1.predicted_error, abs=1e-12)


# ---------------------------------------------------------------- refinement

def test_polynomial_kernels_converge_at_first_doubling():
    kx = polynomial_kernel([[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 2.0]])
    ky = polynomial_kernel([[0.0, 1.0, -1.0, 1.0], [1.0, 0.0, 0.0, 1.0]])
    # cubic products have degree 6, integrated exactly from Q = 4 on
    sol, trace = refine_to_convergence(kx, ky, 1, 2, gauss_legendre, 4, 64, 1e-12)
    assert [q for q, _ in trace] == [4, 8]
    assert sol.extras["nodes"] == 8


def test_smooth_kernel_trace_is_cauchy():
    # k < n so the error is nonzero and the trace shows genuine convergence
    ky = HsKernel(3, lambda u: np.array([math.exp(-u), math.sin(3 * u), 1.0 / (1.0 + u)]))
    try:
        _, trace = refine_to_convergence(smooth_kx(), ky, 1, 2, gauss_legendre, 2, 256, 1e-15)
    except NotConverged as exc:
        trace = exc.trace
    diffs = [abs(b - a) for (_, a), (_, b) in zip(trace, trace[1:])]
    # differences shrink until they reach roundoff
    for d0, d1 in zip(diffs, diffs[1:]):
        assert d1 <= d0 or d1 < 1e-13


def test_huge_tolerance_stops_at_first_doubling():
    ky = HsKernel(3, lambda u: np.array([math.exp(-u), math.sin(3 * u), 1.0]))
    _, trace = refine_to_convergence(smooth_kx(), ky, 1, 2, gauss_legendre, 3, 64, 1.0)
    assert trace[0][0] == 3 and len(trace) == 2


def test_not_converged_carries_trace():
    ky = HsKernel(3, lambda u: np.array([abs(u - 0.3), math.sin(3 * u), 1.0]))
    with pytest.raises(NotConverged) as info:
        refine_to_convergence(smooth_kx(), ky, 1, 2, composite_trapezoid, 2, 8, 1e-15)
    assert [q for q, _ in info.value.trace] == [2, 4, 8]
    assert info.value.solution.extras["nodes"] == 8


def test_refine_validation():
    with pytest.raises(InputError):
        refine_to_convergence(LINEAR_1U, LINEAR_1U, 1, 2, gauss_legendre, 1, 8, 1e-6)
    with pytest.raises(InputError):
        refine_to_convergence(LINEAR_1U, LINEAR_1U, 1, 2, gauss_legendre, 8, 4, 1e-6)
