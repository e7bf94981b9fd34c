"""Experiments Module for pencilbench

Adversarial sweeps, Monte Carlo distributions and property checks.
"""

from .adversarial import (
    OdecoSpec, PowerLawFit, SweepRow, adversarial_sweep, fit_powerlaw, fit_sweep,
    make_bad_odeco, perturb_decomposition, project_cpd
)
from .monte_carlo import (
    BoundPoint, CcdfSeries, ErrorCcdfResult, McConfig, SamplingModel, Solver,
    fit_ccdf_tail, run_forward_error_ccdf, run_kappa_ccdf, sample_cpd, unit_norm_cpd
)
from .parallel import mix_seed, parallel_map, resolve_threads
from .property_suite import (
    CheckResult, IdentifiabilityConfig, NodecreaseConfig, check_kruskal_implies_identifiable_numerically,
    check_nodecrease, nodecrease_margin, run_property_suite
)

__all__ = [
    # Adversarial
    "OdecoSpec",
    "SweepRow",
    "PowerLawFit",
    "make_bad_odeco",
    "project_cpd",
    "perturb_decomposition",
    "adversarial_sweep",
    "fit_powerlaw",
    "fit_sweep",
    # Monte Carlo
    "SamplingModel",
    "Solver",
    "McConfig",
    "BoundPoint",
    "CcdfSeries",
    "ErrorCcdfResult",
    "sample_cpd",
    "unit_norm_cpd",
    "run_kappa_ccdf",
    "run_forward_error_ccdf",
    "fit_ccdf_tail",
    # Property checks
    "CheckResult",
    "NodecreaseConfig",
    "IdentifiabilityConfig",
    "nodecrease_margin",
    "check_nodecrease",
    "check_kruskal_implies_identifiable_numerically",
    "run_property_suite",
    # Parallel
    "mix_seed",
    "parallel_map",
    "resolve_threads",
]
