"""Closed-form optimal rank-k solution of ``min ||Y - M X||_{S,p}`` over rank(M) <= k.

The minimizer is ``M = P_k Y X^+`` where ``P_k`` projects onto the top-k
left singular vectors of ``Z = Y X^+ X``.  It does not depend on ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DimensionMismatch
from .linalg import (
    DEFAULT_TOL,
    ToleranceConfig,
    _rank_from_sigma,
    as_matrix,
    check_p,
    pinv,
    psd_sqrt,
    schatten_from_sigma,
    schatten_norm,
    svd,
)

__all__ = [
    "LowRankSolution",
    "build_z",
    "projector_topk",
    "solve_lowrank",
    "predicted_error",
    "error_terms",
    "second_term_expanded",
    "solve_weighted",
    "spectral_gap",
]


@dataclass
class LowRankSolution:
    """Result of a rank-constrained solve.

    ``q_basis`` spans the range of the projector (for a weighted solve, the
    projector acting on ``K^{1/2}``-transformed outputs).  ``achieved_error``
    is measured on the residual; ``predicted_error`` comes from the
    closed-form error expression.
    """

    m_star: np.ndarray
    q_basis: np.ndarray
    z_sigma: np.ndarray
    k_requested: int
    achieved_error: float
    predicted_error: float
    p: float
    rank_x: int
    weighted: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def k_effective(self) -> int:
        return self.q_basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.q_basis @ self.q_basis.T

    @property
    def spectral_gap(self):
        return spectral_gap(self.z_sigma, self.k_requested)

    @property
    def quasi_norm(self) -> bool:
        return self.p < 1


def _pair(x, y):
    x = as_matrix(x, "X")
    y = as_matrix(y, "Y")
    if x.shape != y.shape:
        raise DimensionMismatch(f"X has shape {x.shape} but Y has shape {y.shape}")
    return x, y


def _check_k(k):
    if isinstance(k, bool) or int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    return int(k)


def spectral_gap(sigma, k):
    """``sigma_k - sigma_{k+1}`` (1-based, zero padded); ``None`` when ``k == 0``."""
    if k == 0:
        return None
    s = np.concatenate([np.asarray(sigma, dtype=np.float64), [0.0, 0.0]])
    if k > s.size - 1:
        return 0.0
    return float(s[k - 1] - s[k])


def build_z(x, y, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """``Y X^+ X``: the outputs restricted to the row space of ``X``."""
    x, y = _pair(x, y)
    return (y @ pinv(x, tol)) @ x


def projector_topk(z, k: int, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the top ``min(k, rank(z))`` left singular vectors of ``z``."""
    k = _check_k(k)
    f = svd(z)
    kp = min(k, _rank_from_sigma(f.sigma, tol.rank_rtol))
    return f.u[:, :kp]


def _solve_core(x, y, k, tol):
    x_pinv = pinv(x, tol)
    rank_x = _rank_from_sigma(svd(x).sigma, tol.rank_rtol)
    y_xp = y @ x_pinv
    z = y_xp @ x
    fz = svd(z)
    kp = min(k, _rank_from_sigma(fz.sigma, tol.rank_rtol))
    q = fz.u[:, :kp]
    return q, fz.sigma, y_xp, x_pinv, rank_x


def error_terms(x, y, k: int, p, tol: ToleranceConfig = DEFAULT_TOL):
    """The two squared terms of the closed-form error.

    Returns ``(tail, leak)`` where ``tail = (sum_{i>k} sigma_i(Z)**p)**(2/p)``
    and ``leak = ||Y (I - X^+ X)||_{S,p}**2`` is the part of ``Y`` that no
    operator composed with ``X`` can reach.  Indices past the numerical rank
    of ``Z`` are counted in the tail, so the tail matches the rank actually
    used by :func:`solve_lowrank`.
    """
    x, y = _pair(x, y)
    k = _check_k(k)
    p = check_p(p)
    x_pinv = pinv(x, tol)
    z = (y @ x_pinv) @ x
    sz = svd(z).sigma
    kp = min(k, _rank_from_sigma(sz, tol.rank_rtol))
    tail = schatten_from_sigma(sz[kp:], p) ** 2
    if _rank_from_sigma(svd(x).sigma, tol.rank_rtol) == x.shape[1]:
        # full column rank: I - X^+ X vanishes identically
        return tail, 0.0
    leak = schatten_norm(y - y @ (x_pinv @ x), p) ** 2
    return tail, leak


def predicted_error(x, y, k: int, p, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Closed-form optimal error ``sqrt(tail + leak)`` (see :func:`error_terms`)."""
    tail, leak = error_terms(x, y, k, p, tol)
    return math.sqrt(tail + leak)


def second_term_expanded(x, y, p, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Leak term through the right singular bases of ``X`` and ``Y``.

    Computes ``(sum_l (sum_j sigma_j(Y)**2 <psi_j^Y, psi_l^X>**2)**(p/2))**(2/p)``
    with ``l`` running over an orthonormal completion of the null space of
    ``X`` in the full source space.  Equal to ``||Y (I - X^+ X)||_{S,2}**2``
    at ``p = 2``; for other ``p`` it is a basis-dependent quantity.
    """
    x, y = _pair(x, y)
    p = check_p(p)
    q = x.shape[1]
    rank_x = _rank_from_sigma(svd(x).sigma, tol.rank_rtol)
    _, _, vt_x = np.linalg.svd(x, full_matrices=True)
    null_basis = vt_x[rank_x:].T  # q x (q - rank_x)
    if null_basis.shape[1] == 0:
        return 0.0
    _, s_y, vt_y = np.linalg.svd(y, full_matrices=False)
    inner = vt_y @ null_basis  # <psi_j^Y, psi_l^X>
    per_l = np.sqrt(np.sum((s_y[:, None] * inner) ** 2, axis=0))
    assert per_l.shape[0] == q - rank_x
    return schatten_from_sigma(per_l, p) ** 2


def solve_lowrank(x, y, k: int, p=2, tol: ToleranceConfig = DEFAULT_TOL) -> LowRankSolution:
    """Optimal rank-``k`` operator ``M`` minimizing ``||Y - M X||_{S,p}``.

    Parameters
    ----------
    x, y : ndarray, shape (n, q)
        Input and output snapshots; ``M`` is ``n x n``.
    k : int
        Rank budget.  Requests beyond ``rank(Z)`` are capped, not rejected.
    p : float or "inf"
        Schatten order used to report errors.  The minimizer itself is the
        same for every ``p``.

    Examples
    --------
    >>> import numpy as np
    >>> sol = solve_lowrank(np.eye(2), np.diag([3.0, 1.0]), k=1)
    >>> sol.m_star
    array([[3., 0.],
           [0., 0.]])
    >>> sol.achieved_error
    1.0
    """
    x, y = _pair(x, y)
    k = _check_k(k)
    p = check_p(p)
    q, z_sigma, y_xp, _, rank_x = _solve_core(x, y, k, tol)
    m_star = q @ (q.T @ y_xp)
    achieved = schatten_norm(y - m_star @ x, p)
    predicted = predicted_error(x, y, k, p, tol)
    return LowRankSolution(
        m_star=m_star,
        q_basis=q,
        z_sigma=z_sigma,
        k_requested=k,
        achieved_error=achieved,
        predicted_error=predicted,
        p=p,
        rank_x=rank_x,
    )


def solve_weighted(x, y, weight, k: int, p=2, tol: ToleranceConfig = DEFAULT_TOL) -> LowRankSolution:
    """Optimal rank-``k`` solution for the weighted norm ``||K^{1/2} (Y - M X)||_{S,p}``.

    ``weight`` is the symmetric PSD matrix ``K`` defining the output inner
    product ``<v1, K v2>``.  The solution is
    ``(K^{1/2})^+ P'_k K^{1/2} Y X^+`` with ``P'_k`` built from
    ``Z' = K^{1/2} Y X^+ X``.  With ``K = I`` it reproduces
    :func:`solve_lowrank` exactly.
    """
    x, y = _pair(x, y)
    k = _check_k(k)
    p = check_p(p)
    weight = as_matrix(weight, "K")
    if weight.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"K has shape {weight.shape} but outputs have dimension {y.shape[0]}")
    sqrt_k, sqrt_k_pinv = psd_sqrt(weight, tol)

    x_pinv = pinv(x, tol)
    rank_x = _rank_from_sigma(svd(x).sigma, tol.rank_rtol)
    y_xp = y @ x_pinv
    z = y_xp @ x
    zw = sqrt_k @ z
    fz = svd(zw)
    kp = min(k, _rank_from_sigma(fz.sigma, tol.rank_rtol))
    q = fz.u[:, :kp]
    m_star = sqrt_k_pinv @ (q @ (q.T @ (sqrt_k @ y_xp)))
    achieved = schatten_norm(sqrt_k @ (y - m_star @ x), p)
    # the weighted problem is the plain one with outputs K^{1/2} Y
    predicted = predicted_error(x, sqrt_k @ y, k, p, tol)
    return LowRankSolution(
        m_star=m_star,
        q_basis=q,
        z_sigma=fz.sigma,
        k_requested=k,
        achieved_error=achieved,
        predicted_error=predicted,
        p=p,
        rank_x=rank_x,
        weighted=True,
        extras={"sqrt_k": sqrt_k, "sqrt_k_pinv": sqrt_k_pinv},
    )
