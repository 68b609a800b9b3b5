"""Optimal rank-k operator regression in a reproducing-kernel feature space.

Only Gram matrices are ever formed.  With feature maps ``Psi_X``, ``Psi_Y``
(one column per sample) the closed form ``M = P_k Psi_Y Psi_X^+`` is carried
in sample coordinates:

* ``Pi`` projects ``R^q`` onto the range of ``G_XX = Psi_X^T Psi_X``, so that
  ``Z = Psi_Y Pi``;
* ``Z^T Z = Pi G_YY Pi`` yields the singular values of ``Z`` and its right
  singular vectors ``v_i``;
* the left singular vectors are ``Psi_Y C`` with ``C = Pi V / sigma``.

Input points are stored as the columns of a ``d x q`` array.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
import math

import numpy as np

from .errors import DimensionMismatch, InputError, NotPsd
from .linalg import DEFAULT_TOL, ToleranceConfig
from .dmd import sort_eigenvalues

__all__ = [
    "KernelSpec",
    "KernelSolution",
    "gram",
    "kernel_lowrank_solve",
    "eigenfunction_eval",
    "polynomial_features",
]

_KINDS = ("linear", "polynomial", "gaussian")


@dataclass(frozen=True)
class KernelSpec:
    """A positive-definite kernel.

    ``linear``: ``x.y``; ``polynomial``: ``(x.y + offset)**degree``;
    ``gaussian``: ``exp(-||x - y||**2 / (2 bandwidth**2))``.
    """

    kind: str = "linear"
    degree: int = 2
    offset: float = 0.0
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InputError(f"unknown kernel kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise InputError(f"polynomial degree must be an integer >= 1, got {self.degree}")
            if not self.offset >= 0:
                raise InputError(f"polynomial offset must be >= 0, got {self.offset}")
        if self.kind == "gaussian" and not self.bandwidth > 0:
            raise InputError(f"gaussian bandwidth must be > 0, got {self.bandwidth}")

    @classmethod
    def from_dict(cls, cfg: dict) -> "KernelSpec":
        cfg = dict(cfg)
        kind = cfg.pop("kind", "linear")
        allowed = {"degree", "offset", "bandwidth"}
        unknown = set(cfg) - allowed
        if unknown:
            raise InputError(f"unknown kernel parameters {sorted(unknown)}")
        return cls(kind=kind, **cfg)

    def to_dict(self) -> dict:
        if self.kind == "linear":
            return {"kind": "linear"}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "degree": int(self.degree), "offset": float(self.offset)}
        return {"kind": "gaussian", "bandwidth": float(self.bandwidth)}

    def evaluate(self, x, y) -> float:
        return float(gram(self, np.reshape(x, (-1, 1)), np.reshape(y, (-1, 1)))[0, 0])


def _points(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[1] == 0:
        raise InputError(f"{name} must be a d x q array of points (columns)")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} contains NaN or Inf entries")
    return a


def gram(kernel: KernelSpec, a, b) -> np.ndarray:
    """``G[i, j] = kernel(a[:, i], b[:, j])``."""
    a = _points(a, "A")
    b = _points(b, "B")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"point dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    inner = a.T @ b
    if kernel.kind == "linear":
        return inner
    if kernel.kind == "polynomial":
        return (inner + kernel.offset) ** int(kernel.degree)
    sq = np.sum(a * a, axis=0)[:, None] + np.sum(b * b, axis=0)[None, :] - 2.0 * inner
    np.maximum(sq, 0.0, out=sq)
    if a is b or (a.shape == b.shape and np.array_equal(a, b)):
        np.fill_diagonal(sq, 0.0)
    return np.exp(-sq / (2.0 * kernel.bandwidth**2))


def polynomial_features(points, degree: int, offset: float) -> np.ndarray:
    """Explicit feature map of ``(x.y + offset)**degree`` (columns are samples).

    Enumerates multinomial terms, so the dimension is ``C(d + degree, degree)``.
    """
    pts = _points(points, "points")
    d = pts.shape[0]
    # augment with sqrt(offset) so the kernel becomes a homogeneous polynomial
    aug = np.vstack([pts, np.full((1, pts.shape[1]), math.sqrt(offset))])
    rows = []
    for combo in combinations_with_replacement(range(d + 1), degree):
        counts = np.bincount(combo, minlength=d + 1)
        coef = math.factorial(degree)
        for c in counts:
            coef //= math.factorial(int(c))
        rows.append(math.sqrt(coef) * np.prod(aug[list(combo)], axis=0))
    return np.array(rows)


@dataclass
class KernelSolution:
    """Rank-constrained solution carried in sample coordinates.

    ``coeff_projector`` (``q x k'``) expresses the retained left singular
    vectors of ``Z`` as combinations of the output feature vectors.
    ``eigfn_coeffs`` (``q x k'``, complex) express the eigenfunctions as
    kernel expansions over the input training points.
    """

    coeff_projector: np.ndarray
    z_sigma: np.ndarray
    eigenvalues: np.ndarray
    eigfn_coeffs: np.ndarray
    train_eigfn_values: np.ndarray
    compressed: np.ndarray
    achieved_error_sq: float
    predicted_error_sq: float
    k_requested: int
    rank_x: int
    jitter: float = 0.0

    @property
    def k_effective(self) -> int:
        return self.coeff_projector.shape[1]


def _psd_eigh(g, tol, name):
    g = 0.5 * (g + g.T)
    lam, w = np.linalg.eigh(g)
    lam, w = lam[::-1], w[:, ::-1]
    scale = max(1.0, float(np.max(np.abs(lam))))
    if lam.size and lam[-1] < -tol.psd_atol * scale:
        raise NotPsd(f"{name} has eigenvalue {lam[-1]:.3e}; kernel is not positive semidefinite")
    return np.clip(lam, 0.0, None), w


def _canonical_columns(values, *others):
    # largest-|entry| of each column made nonnegative; applies the same flips to ``others``
    if values.shape[1] == 0:
        return (values, *others)
    idx = np.argmax(np.abs(values), axis=0)
    signs = np.where(values[idx, np.arange(values.shape[1])] < 0, -1.0, 1.0)
    return (values * signs, *(o * signs for o in others))


def _normalize_eigenfunctions(coeffs, g_xx):
    """Unit feature-space norm; the largest training-point value made real positive."""
    values = g_xx @ coeffs
    for j in range(coeffs.shape[1]):
        norm_sq = float(np.real(np.conj(coeffs[:, j]) @ g_xx @ coeffs[:, j]))
        if norm_sq <= 0:
            continue
        i = int(np.argmax(np.abs(values[:, j])))
        phase = values[i, j] / abs(values[i, j]) if values[i, j] != 0 else 1.0
        scale = 1.0 / (math.sqrt(norm_sq) * phase)
        coeffs[:, j] *= scale
        values[:, j] *= scale
    return coeffs, values


def kernel_lowrank_solve(
    kernel: KernelSpec,
    x_points,
    y_points,
    k: int,
    tol: ToleranceConfig = DEFAULT_TOL,
    jitter: float = 0.0,
) -> KernelSolution:
    """Optimal rank-``k`` feature-space operator from Gram matrices alone.

    Parameters
    ----------
    kernel : KernelSpec
    x_points, y_points : ndarray, shape (d, q)
        Paired samples; ``y_points[:, j]`` is the image of ``x_points[:, j]``.
    k : int
        Rank budget, capped at the number of retained directions.
    jitter : float
        Added to the diagonal of ``G_XX`` before inversion (default 0).

    Notes
    -----
    Gram eigenvalues at or below ``rank_rtol`` times the largest one are
    discarded; the same rule applied to ``sigma**2`` caps the retained rank.
    ``achieved_error_sq`` is the squared Hilbert-Schmidt norm of the
    residual ``Psi_Y - M Psi_X`` evaluated through ``G_YY``;
    ``predicted_error_sq`` is ``trace(G_YY) - sum_{i<=k'} sigma_i**2``.
    """
    x = _points(x_points, "x_points")
    y = _points(y_points, "y_points")
    if x.shape != y.shape:
        raise DimensionMismatch(f"x_points {x.shape} and y_points {y.shape} differ")
    if isinstance(k, bool) or int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    k = int(k)
    q = x.shape[1]

    g_xx = gram(kernel, x, x)
    g_yy = gram(kernel, y, y)
    g_yx = gram(kernel, y, x)
    _psd_eigh(g_yy, tol, "G_YY")
    lam_x, w_x = _psd_eigh(g_xx + jitter * np.eye(q), tol, "G_XX")
    keep = lam_x > tol.rank_rtol * lam_x[0] if lam_x[0] > 0 else np.zeros(q, dtype=bool)
    rank_x = int(np.count_nonzero(keep))
    w_r = w_x[:, keep]
    proj = w_r @ w_r.T
    g_xx_pinv = (w_r / lam_x[keep]) @ w_r.T

    zz = proj @ g_yy @ proj
    lam_z, v_z = np.linalg.eigh(0.5 * (zz + zz.T))
    lam_z, v_z = np.clip(lam_z[::-1], 0.0, None), v_z[:, ::-1]
    z_sigma = np.sqrt(lam_z)
    n_pos = int(np.count_nonzero(lam_z > tol.rank_rtol * lam_z[0])) if lam_z[0] > 0 else 0
    kp = min(k, n_pos)
    coeff = (proj @ v_z[:, :kp]) / z_sigma[:kp]
    # sign convention: <phi_i, psi(y_j)> has a nonnegative largest entry
    _, coeff = _canonical_columns(g_yy @ coeff, coeff)

    compressed = coeff.T @ g_yy @ g_xx_pinv @ g_yx.T @ coeff
    if kp:
        lam, eta = np.linalg.eig(compressed.T)
        order = sort_eigenvalues(lam)
        lam, eta = lam[order], eta[:, order]
        # left eigenvectors of M in feature space: xi^T = eta^T C^T G_YY G_XX^+ Psi_X^T
        eig_coeffs = g_xx_pinv @ g_yy @ coeff @ eta
        eig_coeffs, train_vals = _normalize_eigenfunctions(eig_coeffs.astype(complex), g_xx)
    else:
        lam = np.zeros(0, dtype=complex)
        eig_coeffs = np.zeros((q, 0), dtype=complex)
        train_vals = np.zeros((q, 0), dtype=complex)

    d_map = coeff @ coeff.T @ g_yy @ g_xx_pinv @ g_xx
    resid = np.eye(q) - d_map
    achieved_sq = max(float(np.trace(resid.T @ g_yy @ resid)), 0.0)
    predicted_sq = max(float(np.trace(g_yy)) - float(np.sum(lam_z[:kp])), 0.0)

    return KernelSolution(
        coeff_projector=coeff,
        z_sigma=z_sigma,
        eigenvalues=lam,
        eigfn_coeffs=eig_coeffs,
        train_eigfn_values=train_vals,
        compressed=compressed,
        achieved_error_sq=achieved_sq,
        predicted_error_sq=predicted_sq,
        k_requested=k,
        rank_x=rank_x,
        jitter=float(jitter),
    )


def eigenfunction_eval(solution: KernelSolution, kernel: KernelSpec, training_points, x_new) -> np.ndarray:
    """Evaluate every eigenfunction at new points; returns ``(m, k')`` complex values."""
    train = _points(training_points, "training_points")
    new = _points(x_new, "x_new")
    if new.shape[0] != train.shape[0]:
        raise DimensionMismatch(f"x_new has dimension {new.shape[0]}, training points {train.shape[0]}")
    if solution.eigfn_coeffs.shape[0] != train.shape[1]:
        raise DimensionMismatch("training_points do not match the solution's sample count")
    return gram(kernel, new, train) @ solution.eigfn_coeffs
