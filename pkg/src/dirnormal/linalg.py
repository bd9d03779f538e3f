"""Dense symmetric positive definite (SPD) linear algebra primitives.

All routines operate on plain ``numpy`` float arrays.  Matrices that are
required to be SPD are symmetrized as ``(M + M.T) / 2`` where they are
constructed, so accumulated asymmetric rounding never reaches a Cholesky
factorization.
"""

from __future__ import annotations

import numpy as np

from .exceptions import NotPositiveDefiniteError

__all__ = [
    "symmetrize",
    "check_symmetric",
    "spd_cholesky",
    "is_positive_definite",
    "log_det_spd",
    "inv_spd",
    "vech",
    "vech_indices",
    "duplication_matrix",
    "eig_pencil",
]


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return ``(m + m.T) / 2``."""
    return 0.5 * (m + m.T)


def check_symmetric(m: np.ndarray, rtol: float = 1e-12) -> None:
    """Raise ``NotPositiveDefiniteError`` if ``m`` is not square-symmetric.

    Symmetry is relative: the largest asymmetry must not exceed ``rtol``
    times the largest absolute entry (or ``rtol`` absolutely for a zero
    matrix).
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotPositiveDefiniteError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if float(np.max(np.abs(m - m.T))) > rtol * scale:
        raise NotPositiveDefiniteError("matrix is not symmetric to tolerance")


def spd_cholesky(m: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor ``L`` with ``L @ L.T == m``.

    Raises
    ------
    NotPositiveDefiniteError
        If the factorization fails, i.e. ``m`` is not positive definite.
    """
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc


def is_positive_definite(m: np.ndarray) -> bool:
    """Whether the Cholesky factorization of ``m`` succeeds."""
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


def log_det_spd(m: np.ndarray) -> float:
    """Log-determinant of an SPD matrix via its Cholesky factor.

    Equals ``2 * sum(log(diag(L)))`` for the lower factor ``L``, which is
    stable for the ill-conditioned matrices produced by near-boundary
    parameter paths.
    """
    ell = spd_cholesky(m)
    return float(2.0 * np.sum(np.log(np.diag(ell))))


def inv_spd(m: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix, symmetrized on output."""
    ell = spd_cholesky(m)
    ell_inv = np.linalg.solve(ell, np.eye(ell.shape[0]))
    return symmetrize(ell_inv.T @ ell_inv)


def vech_indices(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the lower triangle in column-major order.

    The ordering matches the classical half-vectorization: stack the
    columns of the lower triangle, i.e. (1,1), (2,1), ..., (p,1), (2,2), ...
    """
    rows, cols = np.tril_indices(p)
    order = np.lexsort((rows, cols))
    return rows[order], cols[order]


def vech(m: np.ndarray) -> np.ndarray:
    """Half-vectorization of a symmetric matrix (column-major lower triangle)."""
    m = np.asarray(m)
    rows, cols = vech_indices(m.shape[0])
    return m[rows, cols]


def duplication_matrix(p: int) -> np.ndarray:
    """The ``p**2 x p(p+1)/2`` matrix ``D`` with ``D @ vech(M) = vec(M)``.

    ``vec`` stacks columns; ``M`` must be symmetric for the identity to hold.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    rows, cols = vech_indices(p)
    dup = np.zeros((p * p, p * (p + 1) // 2))
    for k, (i, j) in enumerate(zip(rows, cols)):
        dup[i + j * p, k] = 1.0
        dup[j + i * p, k] = 1.0
    return dup


def eig_pencil(lambda0_inv: np.ndarray, lambda_inv: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``inv(lambda0_inv) @ lambda_inv``, ascending.

    Both arguments must be SPD.  The product is similar to the symmetric
    matrix ``L^-1 @ lambda_inv @ L^-T`` where ``L`` is the Cholesky factor
    of ``lambda0_inv``, so the eigenvalues are real and positive and no
    nonsymmetric eigensolver is needed.  They are invariant under a
    simultaneous congruence of both inputs.
    """
    ell = spd_cholesky(lambda0_inv)
    half = np.linalg.solve(ell, lambda_inv)
    sym = np.linalg.solve(ell, half.T)
    try:
        return np.linalg.eigvalsh(symmetrize(sym))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigvalsh rarely fails
        raise NotPositiveDefiniteError(str(exc)) from exc
