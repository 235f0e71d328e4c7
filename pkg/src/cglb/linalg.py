"""Dense symmetric linear algebra primitives.

Thin, contract-enforcing wrappers around LAPACK (via scipy/numpy):
Cholesky factorisation with a jitter escalation ladder, triangular
solves, and symmetric eigendecomposition. Everything is float64 and
operates on plain ndarrays; all functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, DimensionMismatch, NotPositiveDefinite

# Diagonal boosts tried in order, as multiples of mean(diag(A)).
DEFAULT_JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular factor L with L @ L.T = A + jitter_used * I."""

    L: np.ndarray
    jitter_used: float

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def logdet(self) -> float:
        """log|A + jitter*I| = 2 * sum(log diag L)."""
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))


def _as_sym_matrix(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if a.size and not np.array_equal(a, a.T):
        raise DimensionMismatch("matrix is not exactly symmetric; symmetrise it first")
    return a


def cholesky(a: np.ndarray, jitter_ladder: tuple = DEFAULT_JITTER_LADDER) -> CholFactor:
    """Cholesky-factorise a symmetric PSD matrix, escalating diagonal jitter.

    Each ladder entry is scaled by mean(diag(a)); the first entry that
    yields a successful factorisation wins and is recorded in
    ``jitter_used``.

    Raises NotPositiveDefinite if every ladder entry fails.
    """
    a = _as_sym_matrix(a)
    n = a.shape[0]
    if n == 0:
        return CholFactor(L=np.zeros((0, 0)), jitter_used=0.0)
    scale = float(np.mean(np.diag(a)))
    if scale <= 0.0:
        scale = 1.0
    for mult in jitter_ladder:
        jitter = mult * scale
        try:
            L = scipy.linalg.cholesky(
                a + jitter * np.eye(n) if jitter > 0.0 else a,
                lower=True, check_finite=False,
            )
        except scipy.linalg.LinAlgError:
            continue
        return CholFactor(L=L, jitter_used=jitter)
    raise NotPositiveDefinite(
        f"matrix of size {n} not positive definite after jitter ladder {jitter_ladder}"
    )


def tri_solve(factor: CholFactor, b: np.ndarray, transposed: bool = False) -> np.ndarray:
    """Solve L x = b (or L.T x = b when ``transposed``) for vector/matrix b."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != factor.n:
        raise DimensionMismatch(
            f"rhs has leading dimension {b.shape[0]}, factor is {factor.n}x{factor.n}"
        )
    if factor.n == 0:
        return b.copy()
    return scipy.linalg.solve_triangular(
        factor.L, b, lower=True, trans=1 if transposed else 0, check_finite=False
    )


def chol_solve(factor: CholFactor, b: np.ndarray) -> np.ndarray:
    """Full solve (A + jitter*I)^{-1} b via two triangular solves."""
    return tri_solve(factor, tri_solve(factor, b), transposed=True)


def sym_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues sorted descending, matching orthonormal
    eigenvector columns) so that A = V diag(w) V.T.
    """
    a = _as_sym_matrix(a)
    if a.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    try:
        w, v = scipy.linalg.eigh(a, check_finite=False)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise ConvergenceFailure(str(exc)) from exc
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]
