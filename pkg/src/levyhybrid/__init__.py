"""Simulation and verification toolkit for hybrid Levy-driven linear systems.

Exact event-driven simulation of linear systems under compound-Poisson and
Wiener noise, quadratic Lyapunov certificate synthesis, pathwise drift-
condition checks, closed-form expectation oracles, and a scenario runner
that tests moment boundedness statistically against those oracles.
"""

__version__ = "0.1.0"

from .certificates import (
    Certificate,
    ParametricCertificate,
    ParametricFamily,
    certify,
    parametric_certificate,
    verify_certificate,
)
from .drift import (
    DriftConditionParams,
    ResetJumpRecord,
    doleans_exponential,
    jump_term_decomposition,
    lyapunov_value,
    reset_jump_xi,
    verify_drift_inequality,
    wiener_qv_rate,
)
from .errors import (
    AlphaFloorError,
    ConfigError,
    ContainmentError,
    DivergentMomentError,
    InstabilityError,
    LevyHybridError,
    NonIntegrableTailError,
    PreconditionError,
    QuadratureError,
)
from .hybrid import (
    ResetSpec,
    ThetaProcessSpec,
    mean_reverting_theta,
    simulate_parameter_reset,
    simulate_parameter_varying,
    simulate_state_reset,
)
from .measures import (
    AtomLaw,
    CauchyLaw,
    ContinuousDensity,
    EmpiricalLaw,
    LevyMeasureSpec,
    NormalLaw,
    PolynomialSpec,
    absolute_moment,
    moment_condition_check,
    polynomial_jump_integral,
    truncate,
    two_point,
)
from .oracles import (
    OracleResult,
    discounted_jump_sum_expectation,
    mc_estimate,
    prod_exp_expectation,
    stationary_covariance,
    stationary_mean,
)
from .reporting import MomentReport, boundedness_test
from .runner import run_scenario
from .sampling import (
    Event,
    JumpPath,
    SeedSpec,
    merge_events,
    sample_compound_poisson,
    sample_reset_times,
    wiener_increments,
)
from .scenarios import HybridScenario, build_scenario, load_config
from .sde import SystemMatrices, Trajectory, apply_jump, propagate_exact, simulate_ti

__all__ = [
    "__version__",
    "AtomLaw",
    "AlphaFloorError",
    "Certificate",
    "CauchyLaw",
    "ConfigError",
    "ContainmentError",
    "ContinuousDensity",
    "DivergentMomentError",
    "DriftConditionParams",
    "EmpiricalLaw",
    "Event",
    "HybridScenario",
    "InstabilityError",
    "JumpPath",
    "LevyHybridError",
    "LevyMeasureSpec",
    "MomentReport",
    "NonIntegrableTailError",
    "NormalLaw",
    "OracleResult",
    "ParametricCertificate",
    "ParametricFamily",
    "PolynomialSpec",
    "PreconditionError",
    "QuadratureError",
    "ResetJumpRecord",
    "ResetSpec",
    "SeedSpec",
    "SystemMatrices",
    "ThetaProcessSpec",
    "Trajectory",
    "absolute_moment",
    "apply_jump",
    "boundedness_test",
    "build_scenario",
    "certify",
    "discounted_jump_sum_expectation",
    "doleans_exponential",
    "jump_term_decomposition",
    "load_config",
    "lyapunov_value",
    "mc_estimate",
    "mean_reverting_theta",
    "merge_events",
    "moment_condition_check",
    "parametric_certificate",
    "polynomial_jump_integral",
    "prod_exp_expectation",
    "propagate_exact",
    "reset_jump_xi",
    "run_scenario",
    "sample_compound_poisson",
    "sample_reset_times",
    "simulate_parameter_reset",
    "simulate_parameter_varying",
    "simulate_state_reset",
    "simulate_ti",
    "stationary_covariance",
    "stationary_mean",
    "truncate",
    "two_point",
    "verify_certificate",
    "verify_drift_inequality",
    "wiener_increments",
    "wiener_qv_rate",
]
