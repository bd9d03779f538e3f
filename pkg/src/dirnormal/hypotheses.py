"""Null hypotheses on the normal mean/concentration and their constrained fits.

Six null hypotheses are supported:

* :class:`ProportionalIdentity` -- covariance proportional to the identity;
* :class:`BlockIndependence`    -- block-diagonal concentration;
* :class:`EqualDistributions`   -- identical distribution across k groups;
* :class:`EqualCovariances`     -- common concentration across k groups;
* :class:`SpecifiedMeanCov`     -- fully specified mean and concentration;
* :class:`CompleteIndependence` -- diagonal concentration;

plus the general :class:`ZeroPattern` (prescribed zero entries of the
concentration matrix, fitted by iterative proportional scaling).

A :class:`ConstrainedFit` bundles the per-group sufficient statistics with
the constrained estimates, the degrees of freedom ``d`` and, for the cases
whose tilted path is linear in ``t``, the eigenvalues of the constrained-vs-
unconstrained covariance pencil that drive all downstream formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import SampleSummary, check_estimate_exists, summarize, validate_data
from .exceptions import (
    DimensionError,
    NoConvergenceError,
    NotPositiveDefiniteError,
)
from .linalg import (
    eig_pencil,
    inv_spd,
    is_positive_definite,
    spd_cholesky,
    symmetrize,
    vech,
)

__all__ = [
    "ProportionalIdentity",
    "BlockIndependence",
    "EqualDistributions",
    "EqualCovariances",
    "SpecifiedMeanCov",
    "CompleteIndependence",
    "ZeroPattern",
    "Hypothesis",
    "ConstrainedFit",
    "PathPoint",
    "SufficientShift",
    "degrees_of_freedom",
    "constrained_mle",
    "fit_hypothesis",
    "fit_zero_pattern",
    "expected_s_psi",
    "path_estimates",
    "standardize",
]


@dataclass(frozen=True)
class ProportionalIdentity:
    """Covariance equal to an unspecified scalar times the identity."""

    tag = "c1"


@dataclass(frozen=True)
class BlockIndependence:
    """Independence between blocks of variables of the given sizes."""

    block_sizes: tuple[int, ...]
    tag = "c2"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        object.__setattr__(self, "block_sizes", sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise DimensionError("need at least two blocks, each of size >= 1")


@dataclass(frozen=True)
class EqualDistributions:
    """Identical mean and concentration across independent groups."""

    tag = "c3"


@dataclass(frozen=True)
class EqualCovariances:
    """Common concentration across independent groups, means free."""

    tag = "c4"


@dataclass(frozen=True, eq=False)
class SpecifiedMeanCov:
    """Fully specified mean vector and concentration matrix.

    Data are standardized internally to the equivalent hypothesis with zero
    mean and identity concentration, so ``lambda0`` is the *concentration*
    under the null, not the covariance.
    """

    mu0: np.ndarray
    lambda0: np.ndarray
    tag = "c5"

    def __post_init__(self):
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        lambda0 = np.asarray(self.lambda0, dtype=float)
        if lambda0.shape != (mu0.shape[0], mu0.shape[0]):
            raise DimensionError("lambda0 must be p x p with p = len(mu0)")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "lambda0", symmetrize(lambda0))


@dataclass(frozen=True)
class CompleteIndependence:
    """Diagonal concentration (all correlations zero)."""

    tag = "c6"


@dataclass(frozen=True)
class ZeroPattern:
    """Prescribed zero entries of the concentration matrix.

    ``zero_pairs`` holds 0-based off-diagonal index pairs ``(i, j)`` with
    ``i < j``; each pair constrains both symmetric entries to zero.
    """

    zero_pairs: tuple[tuple[int, int], ...]
    tag = "pattern"

    def __post_init__(self):
        pairs = []
        for i, j in self.zero_pairs:
            i, j = int(i), int(j)
            if i == j:
                raise DimensionError("zero pattern must not constrain diagonal entries")
            pairs.append((min(i, j), max(i, j)))
        pairs = tuple(sorted(set(pairs)))
        object.__setattr__(self, "zero_pairs", pairs)

    def mask(self, p: int) -> np.ndarray:
        """Boolean ``p x p`` matrix, True where the concentration is forced to zero."""
        m = np.zeros((p, p), dtype=bool)
        for i, j in self.zero_pairs:
            if j >= p:
                raise DimensionError(f"zero pair {(i, j)} out of range for p={p}")
            m[i, j] = m[j, i] = True
        return m


Hypothesis = Union[
    ProportionalIdentity,
    BlockIndependence,
    EqualDistributions,
    EqualCovariances,
    SpecifiedMeanCov,
    CompleteIndependence,
    ZeroPattern,
]

_GROUP_CASES = (EqualDistributions, EqualCovariances)
# Cases whose tilted covariance path is a convex combination, linear in t.
_LINEAR_CASES = (
    ProportionalIdentity,
    BlockIndependence,
    CompleteIndependence,
    ZeroPattern,
    EqualCovariances,
)


@dataclass(frozen=True, eq=False)
class ConstrainedFit:
    """Constrained maximum likelihood fit of a hypothesis.

    Attributes
    ----------
    hypothesis : Hypothesis
        The null being fitted (post-standardization form for the fully
        specified case).
    summaries : tuple of SampleSummary
        Per-group sufficient statistics (length 1 for one-sample cases).
    lambda0_inv : ndarray
        Constrained covariance estimate, shared across groups.
    mu0 : tuple of ndarray
        Per-group constrained mean estimates.
    d : int
        Degrees of freedom of the hypothesis.
    pencil_eigs : tuple of ndarray or None
        Per-group eigenvalues of the constrained-vs-unconstrained pencil,
        present exactly for the linear-path cases.
    standardized : bool
        True when the data were transformed to the zero-mean/identity form.
    """

    hypothesis: Hypothesis
    summaries: tuple[SampleSummary, ...]
    lambda0_inv: np.ndarray
    mu0: tuple[np.ndarray, ...]
    d: int
    pencil_eigs: tuple[np.ndarray, ...] | None
    standardized: bool = False

    @property
    def k(self) -> int:
        return len(self.summaries)

    @property
    def p(self) -> int:
        return self.summaries[0].p

    @property
    def n_total(self) -> int:
        return sum(s.n for s in self.summaries)


@dataclass(frozen=True, eq=False)
class PathPoint:
    """Tilted estimates along the line through the null expectation (t=0)
    and the observed data point (t=1)."""

    t: float
    lambda_t_inv: tuple[np.ndarray, ...]
    mu_t: tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class SufficientShift:
    """Expected value of the centered sufficient statistic under the fit.

    Blocks follow the half-vectorized layout: one mean block and one
    ``vech`` block per group.  The observed statistic is zero by centering,
    so the shift locates the ``t = 0`` end of the tilted line.
    """

    mean_blocks: tuple[np.ndarray, ...]
    vech_blocks: tuple[np.ndarray, ...]

    def max_abs(self) -> float:
        return max(
            max((float(np.max(np.abs(b))) for b in self.mean_blocks), default=0.0),
            max((float(np.max(np.abs(b))) for b in self.vech_blocks), default=0.0),
        )


def degrees_of_freedom(hypothesis: Hypothesis, p: int, k: int = 1) -> int:
    """Number of constraints the hypothesis imposes on the free parameters."""
    full_cov = p * (p + 1) // 2
    if isinstance(hypothesis, ProportionalIdentity):
        return full_cov - 1
    if isinstance(hypothesis, BlockIndependence):
        sizes = hypothesis.block_sizes
        if sum(sizes) != p:
            raise DimensionError(f"block sizes {sizes} do not sum to p={p}")
        return full_cov - sum(s * (s + 1) // 2 for s in sizes)
    if isinstance(hypothesis, EqualDistributions):
        return p * (p + 3) * (k - 1) // 2
    if isinstance(hypothesis, EqualCovariances):
        return p * (p + 1) * (k - 1) // 2
    if isinstance(hypothesis, SpecifiedMeanCov):
        return p * (p + 3) // 2
    if isinstance(hypothesis, CompleteIndependence):
        return p * (p - 1) // 2
    if isinstance(hypothesis, ZeroPattern):
        hypothesis.mask(p)  # range check
        return len(hypothesis.zero_pairs)
    raise TypeError(f"unknown hypothesis {hypothesis!r}")


def standardize(data: np.ndarray, mu0: np.ndarray, lambda0: np.ndarray) -> np.ndarray:
    """Transform data so a specified-mean/concentration null becomes
    zero-mean/identity.

    Uses ``L.T @ (y - mu0)`` rowwise with ``lambda0 = L @ L.T``; any square
    root works since the null covariance of the transform is exactly the
    identity.
    """
    y = validate_data(data)
    mu0 = np.asarray(mu0, dtype=float)
    ell = spd_cholesky(symmetrize(np.asarray(lambda0, dtype=float)))
    return (y - mu0) @ ell


def _block_diagonal_of(v: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    out = np.zeros_like(v)
    start = 0
    for s in sizes:
        sl = slice(start, start + s)
        out[sl, sl] = v[sl, sl]
        start += s
    return out


def fit_zero_pattern(
    mle_cov: np.ndarray,
    zero_pairs: Sequence[tuple[int, int]],
    tol: float = 1e-9,
    max_sweeps: int = 10_000,
) -> np.ndarray:
    """Constrained covariance estimate under a concentration zero pattern.

    Edgewise iterative proportional scaling: the concentration candidate
    ``K`` starts diagonal, and each free margin ``c`` (every singleton and
    every unconstrained pair) is updated by
    ``K[c, c] += inv(S[c, c]) - inv(Sigma[c, c])`` where ``Sigma = inv(K)``.
    ``Sigma`` is maintained by a rank-two update, so the margin matches the
    sample value exactly after each step.  The fixed point matches
    ``mle_cov`` on all free entries while keeping the constrained
    concentration entries exactly zero.

    Convergence is declared when the largest absolute change of ``Sigma``
    within a sweep drops below ``tol``.
    """
    s = symmetrize(np.asarray(mle_cov, dtype=float))
    p = s.shape[0]
    if not is_positive_definite(s):
        raise NotPositiveDefiniteError("sample covariance is not positive definite")
    zero = ZeroPattern(tuple((i, j) for i, j in zero_pairs)).mask(p) if zero_pairs else np.zeros((p, p), bool)
    if not zero.any():
        return s.copy()

    free_pairs = [(i, j) for i in range(p) for j in range(i + 1, p) if not zero[i, j]]
    cov = np.diag(np.diag(s)).astype(float)
    conc = np.diag(1.0 / np.diag(s))

    margins: list[list[int]] = [[i] for i in range(p)] + [[i, j] for i, j in free_pairs]
    for _ in range(max_sweeps):
        delta_sweep = 0.0
        for c in margins:
            scc = s[np.ix_(c, c)]
            ccc = cov[np.ix_(c, c)]
            c_inv = np.linalg.inv(ccc)
            step = np.linalg.inv(scc) - c_inv
            if np.max(np.abs(step)) == 0.0:
                continue
            conc[np.ix_(c, c)] += step
            # Sigma' = Sigma - U (C^-1 - C^-1 S_cc C^-1) U^T drives the
            # c-margin of Sigma exactly to S_cc.
            u = cov[:, c]
            g = c_inv - c_inv @ scc @ c_inv
            update = u @ g @ u.T
            cov = cov - update
            delta_sweep = max(delta_sweep, float(np.max(np.abs(update))))
        if delta_sweep < tol:
            break
    else:
        raise NoConvergenceError(f"zero-pattern fit did not converge in {max_sweeps} sweeps")

    conc = symmetrize(conc)
    conc[zero] = 0.0
    out = inv_spd(conc)
    if not is_positive_definite(out):  # pragma: no cover - guarded by inv_spd
        raise NotPositiveDefiniteError("zero-pattern fit is not positive definite")
    return out


def constrained_mle(hypothesis: Hypothesis, summaries: Sequence[SampleSummary]) -> ConstrainedFit:
    """Constrained maximum likelihood estimates under the hypothesis.

    ``summaries`` holds one entry per group; one-sample hypotheses require
    exactly one.  For the fully specified case the summaries must come from
    data already standardized with :func:`standardize`.
    """
    summaries = tuple(summaries)
    if not summaries:
        raise DimensionError("need at least one sample summary")
    p = summaries[0].p
    if any(s.p != p for s in summaries):
        raise DimensionError("all groups must share the same number of variables")
    k = len(summaries)
    if isinstance(hypothesis, _GROUP_CASES):
        if k < 2:
            raise DimensionError(f"{type(hypothesis).__name__} requires at least two groups")
    elif k != 1:
        raise DimensionError(f"{type(hypothesis).__name__} is a one-sample hypothesis")

    d = degrees_of_freedom(hypothesis, p, k)
    standardized = False

    if isinstance(hypothesis, ProportionalIdentity):
        v = summaries[0].mle_cov
        lambda0_inv = (np.trace(v) / p) * np.eye(p)
        mu0 = (summaries[0].ybar,)
    elif isinstance(hypothesis, BlockIndependence):
        if sum(hypothesis.block_sizes) != p:
            raise DimensionError(f"block sizes {hypothesis.block_sizes} do not sum to p={p}")
        lambda0_inv = _block_diagonal_of(summaries[0].mle_cov, hypothesis.block_sizes)
        mu0 = (summaries[0].ybar,)
    elif isinstance(hypothesis, CompleteIndependence):
        lambda0_inv = np.diag(np.diag(summaries[0].mle_cov))
        mu0 = (summaries[0].ybar,)
    elif isinstance(hypothesis, ZeroPattern):
        lambda0_inv = fit_zero_pattern(summaries[0].mle_cov, hypothesis.zero_pairs)
        mu0 = (summaries[0].ybar,)
    elif isinstance(hypothesis, SpecifiedMeanCov):
        lambda0_inv = np.eye(p)
        mu0 = (np.zeros(p),)
        standardized = True
    elif isinstance(hypothesis, EqualCovariances):
        n = sum(s.n for s in summaries)
        lambda0_inv = symmetrize(sum(s.centered_ssq for s in summaries) / n)
        mu0 = tuple(s.ybar for s in summaries)
    elif isinstance(hypothesis, EqualDistributions):
        n = sum(s.n for s in summaries)
        ybar = sum(s.n * s.ybar for s in summaries) / n
        pooled_second = sum(s.n * s.second_moment for s in summaries) / n
        lambda0_inv = symmetrize(pooled_second - np.outer(ybar, ybar))
        mu0 = tuple(ybar for _ in summaries)
    else:
        raise TypeError(f"unknown hypothesis {hypothesis!r}")

    if not is_positive_definite(lambda0_inv):
        raise NotPositiveDefiniteError("constrained covariance estimate is not positive definite")

    pencil = None
    if isinstance(hypothesis, _LINEAR_CASES):
        pencil = tuple(eig_pencil(lambda0_inv, s.mle_cov) for s in summaries)

    return ConstrainedFit(
        hypothesis=hypothesis,
        summaries=summaries,
        lambda0_inv=lambda0_inv,
        mu0=mu0,
        d=d,
        pencil_eigs=pencil,
        standardized=standardized,
    )


def fit_hypothesis(hypothesis: Hypothesis, data) -> ConstrainedFit:
    """Fit a hypothesis directly from raw data.

    ``data`` is a single observations-by-variables matrix for one-sample
    hypotheses and a sequence of such matrices for the group hypotheses.
    Each group must satisfy ``n >= p + 2``.  Data for the fully specified
    case are standardized here before summarizing.
    """
    if isinstance(hypothesis, _GROUP_CASES):
        groups = [validate_data(g) for g in data]
        if len(groups) < 2:
            raise DimensionError("group hypotheses need at least two groups")
    else:
        groups = [validate_data(data)]
    p = groups[0].shape[1]
    if any(g.shape[1] != p for g in groups):
        raise DimensionError("all groups must share the same number of variables")
    for g in groups:
        check_estimate_exists(g.shape[0], p)
    if isinstance(hypothesis, SpecifiedMeanCov):
        if hypothesis.mu0.shape[0] != p:
            raise DimensionError(f"hypothesis is {hypothesis.mu0.shape[0]}-dimensional, data has p={p}")
        groups = [standardize(groups[0], hypothesis.mu0, hypothesis.lambda0)]
    return constrained_mle(hypothesis, [summarize(g) for g in groups])


def expected_s_psi(fit: ConstrainedFit) -> SufficientShift:
    """Expected centered sufficient statistic under the constrained fit.

    A shift of exactly zero means the observed data sit at the null
    expectation; the tilted line then degenerates to a point.
    """
    hyp = fit.hypothesis
    means: list[np.ndarray] = []
    vechs: list[np.ndarray] = []
    if isinstance(hyp, (ProportionalIdentity, BlockIndependence, CompleteIndependence, ZeroPattern)):
        s = fit.summaries[0]
        means.append(np.zeros(fit.p))
        vechs.append(-0.5 * s.n * vech(fit.lambda0_inv - s.mle_cov))
    elif isinstance(hyp, SpecifiedMeanCov):
        s = fit.summaries[0]
        means.append(-s.n * s.ybar)
        vechs.append(-0.5 * s.n * vech(np.eye(fit.p) - s.second_moment))
    elif isinstance(hyp, EqualCovariances):
        for s in fit.summaries:
            means.append(np.zeros(fit.p))
            vechs.append(-0.5 * s.n * vech(fit.lambda0_inv - s.mle_cov))
    elif isinstance(hyp, EqualDistributions):
        ybar = fit.mu0[0]
        for s in fit.summaries:
            means.append(-s.n * (s.ybar - ybar))
            vechs.append(-0.5 * s.n * vech(fit.lambda0_inv - s.second_moment + np.outer(ybar, ybar)))
    else:
        raise TypeError(f"unknown hypothesis {hyp!r}")
    return SufficientShift(mean_blocks=tuple(means), vech_blocks=tuple(vechs))


def is_degenerate(fit: ConstrainedFit) -> bool:
    """Whether the observed point coincides with the null expectation."""
    scale = 1.0 + max(float(np.max(np.abs(s.second_moment))) for s in fit.summaries)
    return expected_s_psi(fit).max_abs() <= 1e-12 * fit.n_total * scale


def path_estimates(fit: ConstrainedFit, t: float) -> PathPoint:
    """Tilted estimates at position ``t`` along the line.

    ``t = 0`` gives the constrained estimates and ``t = 1`` the observed
    per-group estimates.  Raises ``NotPositiveDefiniteError`` if ``t`` lies
    outside the interval on which the tilted covariance stays positive
    definite.
    """
    hyp = fit.hypothesis
    t = float(t)
    covs: list[np.ndarray] = []
    mus: list[np.ndarray] = []
    if isinstance(hyp, (ProportionalIdentity, BlockIndependence, CompleteIndependence, ZeroPattern, EqualCovariances)):
        for s, mu in zip(fit.summaries, fit.mu0):
            covs.append((1.0 - t) * fit.lambda0_inv + t * s.mle_cov)
            mus.append(mu)
    elif isinstance(hyp, SpecifiedMeanCov):
        s = fit.summaries[0]
        covs.append(
            (1.0 - t) * np.eye(fit.p)
            + t * s.mle_cov
            + t * (1.0 - t) * np.outer(s.ybar, s.ybar)
        )
        mus.append(t * s.ybar)
    elif isinstance(hyp, EqualDistributions):
        ybar = fit.mu0[0]
        for s in fit.summaries:
            b = s.ybar - ybar
            covs.append((1.0 - t) * fit.lambda0_inv + t * s.mle_cov + t * (1.0 - t) * np.outer(b, b))
            mus.append((1.0 - t) * ybar + t * s.ybar)
    else:
        raise TypeError(f"unknown hypothesis {hyp!r}")
    for c in covs:
        spd_cholesky(symmetrize(c))
    return PathPoint(t=t, lambda_t_inv=tuple(symmetrize(c) for c in covs), mu_t=tuple(mus))
