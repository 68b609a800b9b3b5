"""Continuous DMD: kernel operators ``g -> int k(u) g(u) dmu(u)`` discretized by quadrature.

A rule with nodes ``u_j`` and weights ``w_j`` turns a kernel into the
``n x Q`` matrix with columns ``sqrt(w_j) k(u_j)``.  Its Gram products and
Frobenius norm are quadrature approximations of the continuous ones, so the
finite solver applies unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
import math
from typing import Callable

import numpy as np

from .errors import InputError, KernelEvalFailure, NotConverged
from .linalg import DEFAULT_TOL, ToleranceConfig, check_p
from .solver import LowRankSolution, solve_lowrank

__all__ = [
    "HsKernel",
    "QuadratureRule",
    "gauss_legendre",
    "composite_trapezoid",
    "tensor_rule",
    "discretize_hs",
    "continuous_lowrank",
    "refine_to_convergence",
    "polynomial_kernel",
]


@dataclass(frozen=True)
class HsKernel:
    """Kernel ``u -> k(u)`` in ``R^n`` of a Hilbert-Schmidt operator into ``R^n``."""

    output_dim: int
    eval: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes (``Q x d``) and positive weights representing a measure."""

    nodes: np.ndarray
    weights: np.ndarray
    description: str = "user-supplied"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if nodes.shape[0] == 0:
            raise InputError("quadrature rule has no nodes")
        if nodes.shape[0] != weights.shape[0]:
            raise InputError(f"{nodes.shape[0]} nodes but {weights.shape[0]} weights")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
            raise InputError("quadrature nodes and weights must be finite")
        if np.any(weights <= 0):
            raise InputError("quadrature weights must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def scaled(self, c: float) -> "QuadratureRule":
        return QuadratureRule(self.nodes, self.weights * c, f"{self.description}*{c:g}")


def gauss_legendre(q: int, a: float = 0.0, b: float = 1.0) -> QuadratureRule:
    """``q``-point Gauss-Legendre rule on ``[a, b]``; exact for polynomials of degree ``<= 2q - 1``."""
    if q < 1:
        raise InputError(f"need at least one node, got {q}")
    x, w = np.polynomial.legendre.leggauss(q)
    half = 0.5 * (b - a)
    return QuadratureRule(half * x + 0.5 * (a + b), half * w, f"gauss-legendre({q}) on [{a:g}, {b:g}]")


def composite_trapezoid(q: int, a: float = 0.0, b: float = 1.0) -> QuadratureRule:
    """Composite trapezoid rule with ``q >= 2`` equispaced nodes on ``[a, b]``."""
    if q < 2:
        raise InputError(f"trapezoid rule needs at least two nodes, got {q}")
    x = np.linspace(a, b, q)
    w = np.full(q, (b - a) / (q - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return QuadratureRule(x, w, f"composite-trapezoid({q}) on [{a:g}, {b:g}]")


def tensor_rule(*rules: QuadratureRule) -> QuadratureRule:
    """Tensor product of 1-D rules on a box (up to three dimensions)."""
    if not 1 <= len(rules) <= 3:
        raise InputError("tensor rules support one to three factors")
    nodes, weights = [], []
    for combo in product(*[range(r.size) for r in rules]):
        nodes.append([float(r.nodes[i, 0]) for r, i in zip(rules, combo)])
        weights.append(math.prod(float(r.weights[i]) for r, i in zip(rules, combo)))
    desc = " x ".join(r.description for r in rules)
    return QuadratureRule(np.array(nodes), np.array(weights), desc)


def polynomial_kernel(coefficients) -> HsKernel:
    """Kernel ``k(u) = sum_d coefficients[:, d] * u**d`` on a 1-D domain."""
    c = np.asarray(coefficients, dtype=np.float64)
    if c.ndim != 2:
        raise InputError("polynomial kernel coefficients must be an n x (degree+1) array")

    def ev(u):
        t = float(np.ravel(u)[0])
        return c @ (t ** np.arange(c.shape[1]))

    return HsKernel(output_dim=c.shape[0], eval=ev)


def discretize_hs(kernel: HsKernel, rule: QuadratureRule) -> np.ndarray:
    """``n x Q`` matrix with column ``j`` equal to ``sqrt(w_j) * kernel.eval(u_j)``."""
    out = np.empty((kernel.output_dim, rule.size))
    for j in range(rule.size):
        u = rule.nodes[j]
        try:
            val = np.asarray(kernel.eval(u if u.shape[0] > 1 else u[0]), dtype=np.float64).ravel()
        except Exception as exc:  # noqa: BLE001 - user callback
            raise KernelEvalFailure(f"kernel evaluation failed at node {u}: {exc}") from exc
        if val.shape[0] != kernel.output_dim:
            raise KernelEvalFailure(f"kernel returned {val.shape[0]} values at node {u}, expected {kernel.output_dim}")
        if not np.all(np.isfinite(val)):
            raise KernelEvalFailure(f"kernel is not finite at node {u}")
        out[:, j] = math.sqrt(rule.weights[j]) * val
    return out


def continuous_lowrank(kx: HsKernel, ky: HsKernel, rule: QuadratureRule, k: int, p=2,
                       tol: ToleranceConfig = DEFAULT_TOL) -> LowRankSolution:
    """Solve the discretized continuous problem; ``m_star`` is the ``n x n`` operator estimate."""
    if kx.output_dim != ky.output_dim:
        raise InputError(f"kernels map to R^{kx.output_dim} and R^{ky.output_dim}")
    sol = solve_lowrank(discretize_hs(kx, rule), discretize_hs(ky, rule), k, p, tol)
    sol.extras["quadrature"] = rule.description
    sol.extras["nodes"] = rule.size
    if check_p(p) != 2:
        sol.extras["approximation"] = "Schatten-p with p != 2 evaluated on the discretized operators"
    return sol


def refine_to_convergence(kx: HsKernel, ky: HsKernel, k: int, p, rule_family, q_start: int, q_max: int,
                          conv_rtol: float, tol: ToleranceConfig = DEFAULT_TOL):
    """Double the node count until the achieved error settles.

    Stops at the first ``Q`` with
    ``|err(2Q) - err(Q)| <= conv_rtol * (1 + err(2Q))`` and returns the
    finer solution together with the ``(Q, error)`` trace.

    Raises
    ------
    NotConverged
        When the next doubling would exceed ``q_max``; carries the trace and
        the finest solution computed.
    """
    if q_start < 2 or q_max < q_start:
        raise InputError(f"need 2 <= q_start <= q_max, got q_start={q_start}, q_max={q_max}")
    q = q_start
    sol = continuous_lowrank(kx, ky, rule_family(q), k, p, tol)
    trace = [(q, sol.achieved_error)]
    while True:
        q_next = 2 * q
        if q_next > q_max:
            raise NotConverged(f"no convergence within {q_max} nodes", trace=trace, solution=sol)
        nxt = continuous_lowrank(kx, ky, rule_family(q_next), k, p, tol)
        trace.append((q_next, nxt.achieved_error))
        if abs(nxt.achieved_error - sol.achieved_error) <= conv_rtol * (1.0 + nxt.achieved_error):
            nxt.extras["refinement_trace"] = trace
            return nxt, trace
        q, sol = q_next, nxt
