"""Trace-power statistics of Haar-random classical-group matrices.

Exact symbolic verification of the conditional-moment identities behind
the normal limit of Tr(M^j) on SO(n), USp(2n) and U(n), closed-form
Kolmogorov-distance bounds, and a seeded Monte Carlo harness that checks
both against simulation.
"""

from .symfunc import (
    CoeffPoly,
    Group,
    GroupMismatchError,
    Monomial,
    OutsideLaplacianDomainError,
    PowerLetter,
    PowerSumPoly,
    UnsupportedHeatOrderError,
    heat_first_order,
    laplacian,
)
from .moments import (
    ExpectationResult,
    MomentQuery,
    MomentResult,
    expectation,
    g_poly,
    moment,
    normal_moment,
)
from .stein import (
    LemmaReport,
    StatisticSpec,
    SteinBound,
    build_w,
    conditional_drift,
    conditional_square_increment,
    fourth_moment_linear_coefficient,
    r_second_moment,
    run_lemma_suite,
    second_moment_increment,
    stein_bound,
    variance_coefficient,
)

__version__ = "0.1.0"
