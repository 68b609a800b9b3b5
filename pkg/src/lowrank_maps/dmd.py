"""Dynamic mode decomposition front-end built on the rank-constrained solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, TooFewSnapshots
from .linalg import DEFAULT_TOL, ToleranceConfig, as_matrix, pinv
from .solver import LowRankSolution, solve_lowrank

__all__ = [
    "SnapshotSeries",
    "SpectralSummary",
    "snapshot_pairs",
    "unconstrained_dmd",
    "lowrank_dmd",
    "dmd_modes",
    "sort_eigenvalues",
]


@dataclass(frozen=True)
class SnapshotSeries:
    """Time-ordered states stored as the columns of an ``n x T`` array."""

    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim != 2:
            raise TooFewSnapshots(f"states must be an n x T array, got shape {states.shape}")
        if states.shape[1] < 2:
            raise TooFewSnapshots(f"need at least 2 snapshots, got {states.shape[1]}")
        object.__setattr__(self, "states", as_matrix(states, "states"))

    @property
    def state_dim(self) -> int:
        return self.states.shape[0]

    @property
    def count(self) -> int:
        return self.states.shape[1]


@dataclass
class SpectralSummary:
    eigenvalues: np.ndarray
    modes: np.ndarray
    residuals: np.ndarray


def _series(series):
    return series if isinstance(series, SnapshotSeries) else SnapshotSeries(series)


def snapshot_pairs(series):
    """Split a series into ``X = [s_0 .. s_{T-2}]`` and ``Y = [s_1 .. s_{T-1}]``."""
    s = _series(series).states
    return s[:, :-1].copy(), s[:, 1:].copy()


def unconstrained_dmd(x, y, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Least-squares operator ``Y X^+`` with no rank constraint."""
    x = as_matrix(x, "X")
    y = as_matrix(y, "Y")
    if x.shape != y.shape:
        raise DimensionMismatch(f"X has shape {x.shape} but Y has shape {y.shape}")
    return y @ pinv(x, tol)


def lowrank_dmd(series, k: int, p=2, tol: ToleranceConfig = DEFAULT_TOL) -> LowRankSolution:
    x, y = snapshot_pairs(series)
    return solve_lowrank(x, y, k, p, tol)


def sort_eigenvalues(lam):
    """Order by decreasing modulus, then decreasing real part, then decreasing imaginary part."""
    lam = np.asarray(lam)
    # round keys so conjugate pairs and near-ties order stably
    keys = (-np.round(lam.imag, 12), -np.round(lam.real, 12), -np.round(np.abs(lam), 12))
    return np.lexsort(keys)


def dmd_modes(solution: LowRankSolution, x, y, tol: ToleranceConfig = DEFAULT_TOL) -> SpectralSummary:
    """Eigenvalues and modes of ``m_star`` through its ``k' x k'`` compression.

    The compression is ``q^T Y X^+ q`` with ``q`` the projector basis; its
    eigenvalues are the nonzero-eigenvalue candidates of ``m_star`` and its
    eigenvectors lift to modes ``q w``.  Residuals ``||m_star v - lambda v||``
    are reported rather than used to reject defective cases.
    """
    x = as_matrix(x, "X")
    y = as_matrix(y, "Y")
    q = solution.q_basis
    n = solution.m_star.shape[0]
    if q.shape[1] == 0:
        return SpectralSummary(
            eigenvalues=np.zeros(0, dtype=complex),
            modes=np.zeros((n, 0), dtype=complex),
            residuals=np.zeros(0),
        )
    compressed = q.T @ (y @ pinv(x, tol)) @ q
    lam, w = np.linalg.eig(compressed)
    order = sort_eigenvalues(lam)
    lam, w = lam[order], w[:, order]
    modes = q @ w
    modes = modes / np.linalg.norm(modes, axis=0)
    residuals = np.linalg.norm(solution.m_star @ modes - modes * lam, axis=0)
    return SpectralSummary(eigenvalues=lam, modes=modes, residuals=residuals)
