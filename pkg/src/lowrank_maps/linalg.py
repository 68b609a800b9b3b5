"""Dense linear-algebra primitives: SVD, pseudoinverse, rank, Schatten norms.

Every operator is represented by a real ``float64`` 2-D numpy array.  All
functions are pure; none mutate their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import DimensionMismatch, InputError, NonConvergence, NotPsd, NotSymmetric

__all__ = [
    "ToleranceConfig",
    "SvdFactors",
    "as_matrix",
    "check_p",
    "svd",
    "numerical_rank",
    "pinv",
    "schatten_norm",
    "schatten_from_sigma",
    "basis_schatten_norm",
    "psd_sqrt",
]


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical thresholds.

    Parameters
    ----------
    rank_rtol : float
        A singular value counts as nonzero when it exceeds ``rank_rtol * sigma_1``.
    psd_atol : float
        Negative eigenvalues of a weight or Gram matrix down to
        ``-psd_atol * max(1, |lambda|_max)`` are clipped to zero; anything
        lower is rejected.
    recon_rtol : float
        Relative reconstruction tolerance used by self-checks.
    """

    rank_rtol: float = 1e-12
    psd_atol: float = 1e-10
    recon_rtol: float = 1e-12

    def __post_init__(self):
        for name in ("rank_rtol", "psd_atol", "recon_rtol"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise InputError(f"tolerance {name} must be a positive finite real, got {value!r}")


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``a = u @ diag(sigma) @ vt`` with canonical signs."""

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray

    @property
    def r(self) -> int:
        return self.sigma.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.vt


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate ``a`` as a finite real 2-D array and return a float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"{name} must have at least one row and one column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or Inf entries")
    return arr


def check_p(p) -> float:
    """Normalize a Schatten order; accepts positive reals, ``inf`` and the string ``"inf"``."""
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity"):
            return math.inf
        try:
            p = float(p)
        except ValueError:
            raise InputError(f"invalid Schatten order {p!r}") from None
    p = float(p)
    if math.isnan(p) or p <= 0:
        raise InputError(f"Schatten order must be > 0, got {p}")
    return p


def _canonical_signs(u, vt):
    # largest-|entry| of each left vector made nonnegative; argmax keeps the lowest index on ties
    if u.shape[1] == 0:
        return u, vt
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[idx, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    return u * signs, vt * signs[:, None]


def svd(a) -> SvdFactors:
    """Thin singular value decomposition with deterministic conventions.

    Singular values are returned in descending order and each left singular
    vector is flipped so that its entry of largest magnitude is nonnegative
    (the first such entry when several tie); the matching right vector is
    flipped with it.

    Raises
    ------
    NonConvergence
        If LAPACK's divide-and-conquer driver fails to converge.
    """
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"SVD did not converge for a {a.shape} matrix") from exc
    u, vt = _canonical_signs(u, vt)
    return SvdFactors(u=u, sigma=s, vt=vt)


def _rank_from_sigma(sigma, rank_rtol):
    if sigma.size == 0 or sigma[0] <= 0:
        return 0
    return int(np.count_nonzero(sigma > rank_rtol * sigma[0]))


def numerical_rank(a, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    """Number of singular values above ``tol.rank_rtol * sigma_1`` (0 for the zero matrix)."""
    return _rank_from_sigma(svd(a).sigma, tol.rank_rtol)


def pinv(a, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse from the canonical SVD.

    Singular values at or below ``tol.rank_rtol * sigma_1`` are treated as
    exact zeros and are not inverted.
    """
    f = svd(a)
    r = _rank_from_sigma(f.sigma, tol.rank_rtol)
    return (f.vt[:r].T / f.sigma[:r]) @ f.u[:, :r].T


def schatten_from_sigma(sigma, p) -> float:
    """Schatten-p value of a list of singular values."""
    p = check_p(p)
    sigma = np.abs(np.asarray(sigma, dtype=np.float64))
    if sigma.size == 0:
        return 0.0
    top = float(sigma.max())
    if top == 0.0:
        return 0.0
    if math.isinf(p):
        return top
    # scaled to avoid overflow/underflow of sigma**p
    return top * float(np.sum((sigma / top) ** p)) ** (1.0 / p)


def schatten_norm(a, p) -> float:
    """Schatten p-norm: ``(sum sigma_i**p)**(1/p)``, or ``max sigma_i`` for ``p = inf``.

    ``p = 1`` is the trace (nuclear) norm, ``p = 2`` the Frobenius norm.
    Orders below 1 give the Schatten quasi-norm.
    """
    a = as_matrix(a)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"SVD did not converge for a {a.shape} matrix") from exc
    return schatten_from_sigma(s, p)


def basis_schatten_norm(a, p, basis=None) -> float:
    """``(sum_i ||a e_i||**p)**(1/p)`` over an orthonormal basis of the column space.

    Diagnostic only.  It agrees with :func:`schatten_norm` for every basis
    when ``p == 2``, and in general only when the basis is the right singular
    basis of ``a``.  ``basis`` holds the basis vectors as columns and
    defaults to the canonical one.
    """
    a = as_matrix(a)
    p = check_p(p)
    if basis is None:
        cols = a
    else:
        basis = np.asarray(basis, dtype=np.float64)
        if basis.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"basis has {basis.shape[0]} rows, matrix has {a.shape[1]} columns")
        cols = a @ basis
    return schatten_from_sigma(np.linalg.norm(cols, axis=0), p)


def psd_sqrt(k, tol: ToleranceConfig = DEFAULT_TOL):
    """Symmetric square root of a PSD matrix and its pseudoinverse.

    Returns
    -------
    (sqrt_k, sqrt_k_pinv) : tuple of ndarray

    Raises
    ------
    NotSymmetric
        If ``k`` is not square or ``|k - k.T| > 1e-10`` somewhere.
    NotPsd
        If an eigenvalue lies below ``-psd_atol * max(1, |lambda|_max)``.
    """
    k = as_matrix(k, "weight")
    if k.shape[0] != k.shape[1]:
        raise NotSymmetric(f"weight must be square, got {k.shape}")
    if np.max(np.abs(k - k.T)) > 1e-10:
        raise NotSymmetric("weight is not symmetric to atol 1e-10")
    ksym = 0.5 * (k + k.T)
    try:
        lam, w = np.linalg.eigh(ksym)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence("symmetric eigendecomposition did not converge") from exc
    scale = max(1.0, float(np.max(np.abs(lam))))
    if lam.min() < -tol.psd_atol * scale:
        raise NotPsd(f"weight has eigenvalue {lam.min():.3e} below -{tol.psd_atol:g}")
    lam = np.clip(lam, 0.0, None)
    root = np.sqrt(lam)
    keep = root > tol.rank_rtol * root.max() if root.max() > 0 else np.zeros_like(root, dtype=bool)
    inv_root = np.zeros_like(root)
    inv_root[keep] = 1.0 / root[keep]
    sqrt_k = (w * root) @ w.T
    sqrt_k_pinv = (w * inv_root) @ w.T
    return sqrt_k, sqrt_k_pinv
