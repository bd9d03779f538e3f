"""Multivariate-normal sufficient statistics, canonical quantities, samplers.

The model is ``y_1, ..., y_n`` i.i.d. ``N_p(mu, inv(Lambda))`` with
concentration matrix ``Lambda``.  The canonical parameterization pairs
``xi = Lambda @ mu`` with ``vech(Lambda)``; all higher-level statistics in
this package are expressed through the per-sample moments collected in
:class:`SampleSummary`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, NonFiniteError
from .linalg import log_det_spd, spd_cholesky, symmetrize

__all__ = [
    "SampleSummary",
    "CanonicalPoint",
    "validate_data",
    "check_estimate_exists",
    "summarize",
    "info_log_det",
    "sample_mvn",
]


@dataclass(frozen=True, eq=False)
class SampleSummary:
    """Sufficient statistics of one sample.

    Attributes
    ----------
    n, p : int
        Number of observations and of variables.
    ybar : ndarray, shape (p,)
        Sample mean.
    second_moment : ndarray, shape (p, p)
        ``y.T @ y / n``.
    mle_cov : ndarray, shape (p, p)
        Maximum likelihood covariance ``second_moment - ybar ybar.T``;
        the estimate of ``inv(Lambda)``.
    centered_ssq : ndarray, shape (p, p)
        Centered sum of squares ``n * mle_cov``.
    """

    n: int
    p: int
    ybar: np.ndarray
    second_moment: np.ndarray
    mle_cov: np.ndarray
    centered_ssq: np.ndarray


@dataclass(frozen=True, eq=False)
class CanonicalPoint:
    """A value of the canonical parameter ``(xi, Lambda)``."""

    xi: np.ndarray
    concentration: np.ndarray

    @classmethod
    def from_moments(cls, mu: np.ndarray, cov: np.ndarray) -> "CanonicalPoint":
        """Build from the moment parameterization ``(mu, inv(Lambda))``."""
        ell = spd_cholesky(cov)
        concentration = np.linalg.solve(ell.T, np.linalg.solve(ell, np.eye(len(mu))))
        concentration = symmetrize(concentration)
        return cls(xi=concentration @ np.asarray(mu, dtype=float), concentration=concentration)

    def mean(self) -> np.ndarray:
        """The mean vector ``inv(Lambda) @ xi``."""
        return np.linalg.solve(self.concentration, self.xi)


def validate_data(data: np.ndarray, min_rows: int = 2) -> np.ndarray:
    """Validate a raw data matrix and return it as a float array.

    Rows are observations, columns variables.  Raises ``NonFiniteError`` on
    NaN/Inf entries and ``DimensionError`` on wrong shape or too few rows.
    """
    y = np.asarray(data, dtype=float)
    if y.ndim != 2:
        raise DimensionError(f"data must be a 2-d observations-by-variables matrix, got ndim={y.ndim}")
    if y.shape[0] < min_rows:
        raise DimensionError(f"need at least {min_rows} observations, got {y.shape[0]}")
    if y.shape[1] < 1:
        raise DimensionError("data must have at least one column")
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("data contain NaN or infinite entries")
    return y


def check_estimate_exists(n: int, p: int) -> None:
    """Require ``n >= p + 2``, the condition for a nondegenerate fit.

    ``n >= p + 1`` makes the covariance estimate invertible with probability
    one; the extra observation keeps the exponent ``(n - p - 2)/2`` of the
    tilted density nonnegative.
    """
    if n < p + 2:
        raise DimensionError(f"need n >= p + 2 observations per group (got n={n}, p={p})")


def summarize(data: np.ndarray) -> SampleSummary:
    """Compute the sufficient statistics of a sample.

    Notes
    -----
    A degenerate sample (e.g. identical rows) yields a positive
    semidefinite ``mle_cov``; positive definiteness is checked downstream
    where an invertible estimate is actually required.
    """
    y = validate_data(data)
    n, p = y.shape
    ybar = y.mean(axis=0)
    second_moment = symmetrize(y.T @ y / n)
    mle_cov = symmetrize(second_moment - np.outer(ybar, ybar))
    return SampleSummary(
        n=n,
        p=p,
        ybar=ybar,
        second_moment=second_moment,
        mle_cov=mle_cov,
        centered_ssq=n * mle_cov,
    )


def info_log_det(concentration: np.ndarray, n: int) -> float:
    """Log-determinant of the observed information in the canonical scale.

    For ``n`` observations in ``p`` dimensions the determinant equals
    ``n**(p(p+3)/2) * 2**-p * det(Lambda)**-(p+2)``, independent of ``xi``;
    this returns its logarithm using a Cholesky log-determinant.
    """
    lam = np.asarray(concentration, dtype=float)
    p = lam.shape[0]
    return float(
        0.5 * p * (p + 3) * np.log(n) - p * np.log(2.0) - (p + 2) * log_det_spd(lam)
    )


def sample_mvn(mu: np.ndarray, cov: np.ndarray, n: int, seed) -> np.ndarray:
    """Draw ``n`` i.i.d. ``N_p(mu, cov)`` rows, deterministic given ``seed``.

    Parameters
    ----------
    seed : int, sequence of ints, or numpy.random.SeedSequence
        Key for the counter-based generator; equal keys give bit-identical
        samples, so independent streams can be derived per replication.
    """
    mu = np.asarray(mu, dtype=float)
    ell = spd_cholesky(np.asarray(cov, dtype=float))
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal((n, mu.shape[0]))
    return mu + z @ ell.T
