"""Closed-form expectation oracles that anchor the Monte Carlo acceptance tests.

Each oracle returns its value together with a formula tag and an input
digest, so every number quoted in a report can be traced back to the
expression that produced it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .certificates import spectral_abscissa
from .errors import InstabilityError
from .measures import LevyMeasureSpec, PolynomialSpec, polynomial_jump_integral
from .sampling import JumpPath, SeedSpec, sample_compound_poisson_from

MC_CHUNK = 256


@dataclass(frozen=True)
class OracleResult:
    value: float
    formula: str
    input_digest: str


def _digest(payload: dict) -> str:
    def _clean(obj):
        if isinstance(obj, dict):
            return {str(k): _clean(v) for k, v in obj.items()}
        return obj

    blob = json.dumps(_clean(payload), sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def prod_exp_expectation(spec: LevyMeasureSpec, f: PolynomialSpec, t: float) -> OracleResult:
    """E[prod_{s<=t} (1 + f(dL_s))] = exp(t * integral of f against the measure)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    integral = polynomial_jump_integral(spec, f)
    return OracleResult(
        value=math.exp(t * integral),
        formula="prod_exp",
        input_digest=_digest({"rate": spec.rate, "f": f.coefficients, "t": t}),
    )


def discounted_jump_sum_expectation(
    spec: LevyMeasureSpec, f: PolynomialSpec, alpha: float, t: float
) -> OracleResult:
    """E[sum_{s<=t} e^{-alpha(t-s)} f(dL_s)] = (1 - e^{-alpha t})/alpha * integral f d(nu)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    integral = polynomial_jump_integral(spec, f)
    return OracleResult(
        value=(1.0 - math.exp(-alpha * t)) / alpha * integral,
        formula="discounted_jump_sum",
        input_digest=_digest(
            {"rate": spec.rate, "f": f.coefficients, "alpha": alpha, "t": t}
        ),
    )


def stationary_mean(a, b, specs) -> np.ndarray:
    """Stationary mean -A^{-1} B m1 with m1_i = rate_i E[J_i]."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float).reshape(a.shape[0], -1)
    m1 = np.array([s.rate * s.jump_law.raw_moment(1) for s in specs])
    return -np.linalg.solve(a, b @ m1)


def stationary_covariance(a, b, c, specs) -> np.ndarray:
    """Solve A S + S A' + B M B' + C C' = 0 with M = diag(rate_i E[J_i^2]).

    This is the covariance about the stationary mean; the jump source term
    enters through raw second moments because each jump is a point event.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    if spectral_abscissa(a) >= 0:
        raise InstabilityError("stationary covariance requires a Hurwitz A")
    b = np.asarray(b, dtype=float).reshape(n, -1) if np.size(b) else np.zeros((n, 0))
    c = np.asarray(c, dtype=float).reshape(n, -1) if np.size(c) else np.zeros((n, 0))
    if len(specs) != b.shape[1]:
        raise ValueError("one measure per jump component is required")
    m = np.diag([s.rate * s.jump_law.raw_moment(2) for s in specs]) if specs else np.zeros((0, 0))
    source = b @ m @ b.T + c @ c.T
    sigma = solve_continuous_lyapunov(a, -source)
    return 0.5 * (sigma + sigma.T)


def mc_estimate(
    functional: Callable[[JumpPath], float],
    spec: LevyMeasureSpec,
    horizon: float,
    n_paths: int,
    seed: SeedSpec,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of a jump-path functional.

    Replications are drawn in fixed chunks from counter-based streams and
    reduced in chunk order, so the estimate is bit-reproducible for a given
    seed regardless of scheduling.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    total = 0.0
    total_sq = 0.0
    done = 0
    chunk = 0
    while done < n_paths:
        rng = seed.child(path=chunk, stream="mc").generator()
        take = min(MC_CHUNK, n_paths - done)
        for _ in range(take):
            times, sizes = sample_compound_poisson_from(rng, spec, horizon)
            value = float(functional(JumpPath((times,), (sizes,), horizon)))
            total += value
            total_sq += value * value
        done += take
        chunk += 1
    mean = total / n_paths
    var = max(total_sq - n_paths * mean * mean, 0.0) / (n_paths - 1)
    return mean, math.sqrt(var / n_paths)
