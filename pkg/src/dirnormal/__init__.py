"""Testing engine for hypotheses on the mean vector and covariance (or
concentration) matrix of multivariate normal data.

The directional test measures departure from the null along the line
through the null expectation of the sufficient statistic and the observed
data point; its p-value is exactly uniform under the null whenever every
group satisfies ``n >= p + 2``.  Classical references (likelihood ratio,
bootstrap Bartlett correction, large-deviation modifications) and a
reproducible Monte Carlo harness for size/power studies ship alongside.
"""

from .classical import (
    ClassicalReport,
    bartlett_bootstrap,
    bartlett_rescale,
    chisq_upper_tail,
    classical_report,
    lrt,
    skovgaard_gamma,
    skovgaard_log_gamma,
    skovgaard_stats,
)
from .core import (
    CanonicalPoint,
    SampleSummary,
    check_estimate_exists,
    info_log_det,
    sample_mvn,
    summarize,
)
from .directional import (
    DirectionalDiagnostics,
    DirectionalEvaluator,
    curvature,
    directional_pvalue,
    integration_interval,
    log_gbar,
    maximize_gbar,
    t_sup,
)
from .exceptions import (
    DegenerateNullError,
    DimensionError,
    DirnormalError,
    InvalidScenarioError,
    NoConvergenceError,
    NonFiniteError,
    NotPositiveDefiniteError,
    ParseError,
)
from .hypotheses import (
    BlockIndependence,
    CompleteIndependence,
    ConstrainedFit,
    EqualCovariances,
    EqualDistributions,
    PathPoint,
    ProportionalIdentity,
    SpecifiedMeanCov,
    SufficientShift,
    ZeroPattern,
    constrained_mle,
    degrees_of_freedom,
    expected_s_psi,
    fit_hypothesis,
    fit_zero_pattern,
    path_estimates,
    standardize,
)
from .linalg import duplication_matrix, eig_pencil, log_det_spd
from .simulation import (
    Extreme,
    Local,
    Null,
    ScenarioSpec,
    Setting1,
    StudyResult,
    corrected_cutoff,
    generate_scenario,
    ks_uniformity,
    run_study,
)

__version__ = "0.1.0"
