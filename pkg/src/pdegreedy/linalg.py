"""Dense matrix kernels: thin SVD, column-pivoted QR, QR least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SvdConvergenceError(RuntimeError):
    """The SVD iteration failed to converge."""


class RankDeficiencyError(ValueError):
    """A least-squares matrix lost full column rank."""

    def __init__(self, column: int, ratio: float):
        self.column = column
        self.ratio = ratio
        super().__init__(
            f"rank deficiency at column {column}: "
            f"|r[{column},{column}]| / |r[0,0]| = {ratio:.3e} < 1e-12"
        )


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD a = left @ diag(singular_values) @ right_t."""

    left: np.ndarray            # (n, z), orthonormal columns
    singular_values: np.ndarray  # (z,), non-increasing, non-negative
    right_t: np.ndarray         # (z, m), orthonormal rows

    @property
    def rank_limit(self) -> int:
        return self.singular_values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right_t


@dataclass(frozen=True)
class PivotedQr:
    """Column-pivoted factorization q @ r = a[:, pivots]."""

    q: np.ndarray       # orthonormal columns
    r: np.ndarray       # upper triangular, |r[i,i]| non-increasing
    pivots: np.ndarray  # column indices in greedy selection order


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    return a


def svd(a) -> SvdFactors:
    """Thin SVD of a real matrix.

    Raises SvdConvergenceError if the underlying LAPACK iteration fails.
    """
    a = _as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        # LAPACK does not report its iteration count; pass shape instead.
        raise SvdConvergenceError(
            f"SVD iteration did not converge on a {a.shape[0]}x{a.shape[1]} matrix"
        ) from exc
    return SvdFactors(left=u, singular_values=s, right_t=vt)


def truncate(f: SvdFactors, r: int) -> SvdFactors:
    """Keep the leading r singular triplets."""
    if not 1 <= r <= f.rank_limit:
        raise ValueError(f"rank {r} out of range [1, {f.rank_limit}]")
    return SvdFactors(
        left=f.left[:, :r],
        singular_values=f.singular_values[:r],
        right_t=f.right_t[:r, :],
    )


def pivoted_qr(a) -> PivotedQr:
    """QR factorization with greedy column pivoting.

    The first pivot is the column of maximal 2-norm; each later pivot
    maximizes the residual norm after projecting out the columns already
    chosen. Ties resolve to the lowest column index (LAPACK geqp3 scans
    left to right), so a zero matrix pivots in index order.
    """
    a = _as_matrix(a)
    q, r, pivots = scipy.linalg.qr(a, mode="economic", pivoting=True)
    return PivotedQr(q=q, r=r, pivots=pivots)


def qr_least_squares(a, b) -> np.ndarray:
    """Minimize ||a x - b||_2 via x = R^{-1} Q^T b.

    Requires rows >= cols and full column rank; rank loss is detected
    through the diagonal of R relative to |r[0,0]|.
    """
    a = _as_matrix(a)
    b = np.asarray(b, dtype=float).reshape(-1)
    n, k = a.shape
    if n < k:
        raise ValueError(f"system is underdetermined: {n} rows < {k} cols")
    if b.shape[0] != n:
        raise ValueError(f"rhs length {b.shape[0]} != {n} rows")
    q, r = scipy.linalg.qr(a, mode="economic")
    diag = np.abs(np.diag(r))
    if diag[0] == 0.0:
        raise RankDeficiencyError(0, 0.0)
    ratios = diag / diag[0]
    bad = np.nonzero(ratios < 1e-12)[0]
    if bad.size:
        raise RankDeficiencyError(int(bad[0]), float(ratios[bad[0]]))
    return scipy.linalg.solve_triangular(r, q.T @ b)
