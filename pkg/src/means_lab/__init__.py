"""Generalized means and their Jensen convexity: evaluation, analytic deciders and sampling oracles."""

__version__ = "0.1.0"

from .characterization import (
    GiniDecision,
    beta,
    decide_bajraktarevic,
    decide_corollary_generator,
    decide_gini_global,
    decide_gini_subinterval,
    decide_gini_two_variable,
    decide_holder,
    decide_quasiarithmetic,
    decide_scale_split,
    gamma,
)
from .convexity_lab import (
    ConvexityVerdict,
    SearchBudget,
    Status,
    Witness,
    bivariate_convexity_test,
    gradient_monotonicity_test,
    jensen_falsify,
    subgradient_inequality_test,
)
from .means_core import (
    GeneratorSpec,
    GiniParams,
    Interval,
    MeanValue,
    WeightSpec,
    bajraktarevic_mean,
    gini_mean,
    holder_mean,
    quasiarithmetic_mean,
)
from .quasideviation import (
    AxiomReport,
    OneSidedDerivatives,
    Quasideviation,
    check_axioms,
    deviation_mean,
    from_bajraktarevic,
    normalize,
    normalized_plus,
    one_sided_partial,
    scale_split,
)
