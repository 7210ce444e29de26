"""Dense symmetric linear algebra for the log-determinant measures.

Everything here works on plain float64 numpy arrays.  Matrices are small
(one per selected subset, order <= budget + conditioning set), so we keep
dense Cholesky factors and grow them one row at a time while the greedy
selection runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NotPositiveDefinite

DEFAULT_JITTER_SCHEDULE = (0.0, 1e-10, 1e-8, 1e-6)

_SYMMETRY_RTOL = 1e-12


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return (m + m.T) / 2, rejecting matrices that are not symmetric
    within 1e-12 relative tolerance."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        return m
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    scale = max(np.abs(m).max(), 1.0)
    if np.abs(m - m.T).max() > _SYMMETRY_RTOL * scale * m.shape[0]:
        raise ValueError("matrix is not symmetric within tolerance")
    return (m + m.T) / 2.0


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular factor of a (possibly jittered) symmetric matrix."""

    lower: np.ndarray
    jitter_used: float

    @property
    def order(self) -> int:
        return self.lower.shape[0]

    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.lower)))) if self.order else 0.0


def cholesky(m: np.ndarray, jitter_schedule=DEFAULT_JITTER_SCHEDULE) -> CholFactor:
    """Factor ``m + j*I`` for the smallest jitter ``j`` in the schedule
    that yields a positive-definite matrix.

    Raises NotPositiveDefinite if every schedule entry fails.
    """
    m = symmetrize(m)
    if m.shape[0] == 0:
        return CholFactor(lower=np.zeros((0, 0)), jitter_used=0.0)
    eye = np.eye(m.shape[0])
    for j in jitter_schedule:
        try:
            lower = np.linalg.cholesky(m + j * eye)
        except np.linalg.LinAlgError:
            continue
        return CholFactor(lower=lower, jitter_used=float(j))
    raise NotPositiveDefinite(
        f"matrix of order {m.shape[0]} not positive definite for any jitter in {tuple(jitter_schedule)}"
    )


def log_det(f: CholFactor) -> float:
    return f.log_det()


def solve_lower(f: CholFactor, rhs: np.ndarray) -> np.ndarray:
    """Solve L x = rhs against the factor's lower triangle."""
    if f.order == 0:
        return np.zeros_like(rhs)
    return solve_triangular(f.lower, rhs, lower=True, check_finite=False)


def extension_pivot(f: CholFactor, new_row: np.ndarray, new_diag: float):
    """Row and pivot that extending the factor by one index would append.

    Returns (solved_row, pivot_squared) where pivot_squared may be
    nonpositive for an indefinite extension.  This is the O(m^2) kernel
    behind incremental log-det marginal gains: the gain of appending an
    index is log(pivot_squared).
    """
    new_row = np.asarray(new_row, dtype=np.float64)
    if new_row.shape != (f.order,):
        raise ValueError(f"new_row has length {new_row.shape}, factor order is {f.order}")
    solved = solve_lower(f, new_row)
    pivot_sq = float(new_diag + f.jitter_used - np.dot(solved, solved))
    return solved, pivot_sq


def extend_factor(
    f: CholFactor, new_row: np.ndarray, new_diag: float, jitter_schedule=DEFAULT_JITTER_SCHEDULE
) -> CholFactor:
    """Factor of the (m+1)-order matrix obtained by appending a row/column.

    The existing factor's jitter is kept; the schedule is only consulted
    for additional jitter on the appended pivot.
    """
    solved, pivot_sq = extension_pivot(f, new_row, new_diag)
    # Extra pivot jitter only perturbs the appended diagonal entry; we do
    # not refactor the whole matrix for it.
    for j in jitter_schedule:
        if pivot_sq + j > 0.0:
            n = f.order
            lower = np.zeros((n + 1, n + 1))
            lower[:n, :n] = f.lower
            lower[n, :n] = solved
            lower[n, n] = np.sqrt(pivot_sq + j)
            return CholFactor(lower=lower, jitter_used=f.jitter_used)
    raise NotPositiveDefinite("appended pivot nonpositive after jitter schedule")


def schur_complement(joint: np.ndarray, block_a_indices) -> np.ndarray:
    """S_B - S_AB^T S_A^{-1} S_AB for the complement block B of the joint matrix."""
    joint = symmetrize(joint)
    n = joint.shape[0]
    a_idx = np.asarray(sorted(block_a_indices), dtype=np.intp)
    b_idx = np.asarray([i for i in range(n) if i not in set(a_idx.tolist())], dtype=np.intp)
    s_a = joint[np.ix_(a_idx, a_idx)]
    s_ab = joint[np.ix_(a_idx, b_idx)]
    s_b = joint[np.ix_(b_idx, b_idx)]
    if len(a_idx) == 0:
        return s_b
    f = cholesky(s_a, jitter_schedule=(0.0,))
    half = solve_lower(f, s_ab)
    return s_b - half.T @ half


def conditioned_matrix(s_aa: np.ndarray, s_aq: np.ndarray, q_factor: CholFactor) -> np.ndarray:
    """S_A - S_AQ S_Q^{-1} S_AQ^T given a precomputed factor of S_Q."""
    if q_factor.order == 0:
        return np.array(s_aa, dtype=np.float64, copy=True)
    half = solve_lower(q_factor, np.asarray(s_aq, dtype=np.float64).T)
    return np.asarray(s_aa, dtype=np.float64) - half.T @ half
