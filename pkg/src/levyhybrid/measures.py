"""Finite-activity Levy measures: jump laws, moment functionals, truncation.

A measure is ``rate * law(dx)`` where ``rate`` is the jump intensity and
``law`` a probability distribution of jump sizes with no mass at zero.
Continuous intensities enter only through :func:`truncate`, which restricts
them to ``|x| > eps`` and renormalizes, yielding a compound-Poisson spec.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import quad

from .errors import (
    DivergentMomentError,
    LevyHybridError,
    NonIntegrableTailError,
    QuadratureError,
)

#: Absolute tolerance demanded from adaptive quadrature; these values anchor
#: acceptance tests, so a result whose error estimate exceeds this is a hard
#: failure rather than a warning.
QUAD_ABS_TOL = 1e-10

_WEIGHT_TOL = 1e-12


def _quad_checked(fn, lo: float, hi: float) -> float:
    value, err = quad(fn, lo, hi, epsabs=QUAD_ABS_TOL * 1e-2, epsrel=1e-12, limit=200)
    if err > QUAD_ABS_TOL * max(1.0, abs(value)):
        raise QuadratureError(
            f"quadrature error estimate {err:.3e} exceeds tolerance on [{lo}, {hi}]"
        )
    return value


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolynomialSpec:
    """Polynomial with zero constant term and bounded total degree.

    ``coefficients`` maps exponent multi-indices ``(j1, ..., jl)`` to real
    coefficients; every index has ``1 <= j1+...+jl <= degree_bound`` so that
    f(0) = 0 holds by construction.
    """

    coefficients: Mapping[tuple[int, ...], float]
    degree_bound: int

    def __post_init__(self):
        if self.degree_bound < 1:
            raise ValueError("degree_bound must be a positive integer")
        if not self.coefficients:
            raise ValueError("polynomial needs at least one term")
        n_vars = None
        for idx, coeff in self.coefficients.items():
            if not all(isinstance(j, int) and j >= 0 for j in idx):
                raise ValueError(f"invalid exponent multi-index {idx!r}")
            total = sum(idx)
            if total < 1 or total > self.degree_bound:
                raise ValueError(
                    f"multi-index {idx!r} has total degree {total}, "
                    f"outside [1, {self.degree_bound}]"
                )
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite coefficient for {idx!r}")
            if n_vars is None:
                n_vars = len(idx)
            elif len(idx) != n_vars:
                raise ValueError("mixed multi-index lengths")
        object.__setattr__(self, "coefficients", dict(self.coefficients))

    @classmethod
    def univariate(cls, powers: Mapping[int, float], degree_bound: int | None = None):
        """Build a one-variable polynomial from a {power: coefficient} map."""
        coeffs = {(int(k),): float(v) for k, v in powers.items()}
        bound = degree_bound if degree_bound is not None else max(powers)
        return cls(coeffs, bound)

    @property
    def n_vars(self) -> int:
        return len(next(iter(self.coefficients)))

    @property
    def degree(self) -> int:
        return max(sum(idx) for idx in self.coefficients)

    def require_univariate(self) -> None:
        if self.n_vars != 1:
            raise ValueError("operation requires a one-variable polynomial")

    def evaluate(self, x):
        """Evaluate at a scalar, an array (univariate, elementwise), or a
        point given as a length-l vector (multivariate)."""
        if self.n_vars == 1:
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            for (k,), c in self.coefficients.items():
                out = out + c * x**k
            return out if out.ndim else float(out)
        point = np.asarray(x, dtype=float)
        if point.shape != (self.n_vars,):
            raise ValueError(f"expected a point of dimension {self.n_vars}")
        total = 0.0
        for idx, c in self.coefficients.items():
            total += c * float(np.prod(point ** np.asarray(idx)))
        return total


# ---------------------------------------------------------------------------
# Jump-size laws
# ---------------------------------------------------------------------------


class JumpLaw(ABC):
    """Distribution of a single jump size J (no mass at zero)."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray: ...

    @abstractmethod
    def abs_moment(self, q: float) -> float:
        """E|J|^q; raises DivergentMomentError when infinite."""

    @abstractmethod
    def raw_moment(self, k: int) -> float:
        """E[J^k]; raises DivergentMomentError when infinite."""


@dataclass(frozen=True)
class AtomLaw(JumpLaw):
    """Finite discrete law: atoms at ``locations`` with ``weights``."""

    locations: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        locs = tuple(float(x) for x in self.locations)
        wts = tuple(float(w) for w in self.weights)
        if len(locs) != len(wts) or not locs:
            raise ValueError("locations and weights must be non-empty and aligned")
        if any(x == 0.0 for x in locs):
            raise ValueError("a jump law cannot place mass at zero")
        if any(w < 0 or not math.isfinite(w) for w in wts):
            raise ValueError("weights must be finite and nonnegative")
        if abs(sum(wts) - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {sum(wts)!r}, expected 1 within {_WEIGHT_TOL}")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "weights", wts)

    def sample(self, rng, size):
        idx = rng.choice(len(self.locations), size=size, p=self.weights)
        return np.asarray(self.locations, dtype=float)[idx]

    def abs_moment(self, q):
        return float(sum(w * abs(x) ** q for x, w in zip(self.locations, self.weights)))

    def raw_moment(self, k):
        return float(sum(w * x**k for x, w in zip(self.locations, self.weights)))


def two_point(a: float) -> AtomLaw:
    """Symmetric two-point law on {-a, +a}."""
    if a <= 0:
        raise ValueError("two_point requires a > 0")
    return AtomLaw((-a, a), (0.5, 0.5))


@dataclass(frozen=True)
class NormalLaw(JumpLaw):
    """Mean-zero normal jump sizes with the given variance."""

    variance: float

    def __post_init__(self):
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise ValueError("variance must be positive and finite")

    def sample(self, rng, size):
        return rng.normal(0.0, math.sqrt(self.variance), size)

    def abs_moment(self, q):
        # E|Z|^q = 2^{q/2} Gamma((q+1)/2) / sqrt(pi) for Z ~ N(0,1)
        unit = 2.0 ** (q / 2.0) * math.gamma((q + 1.0) / 2.0) / math.sqrt(math.pi)
        return self.variance ** (q / 2.0) * unit

    def raw_moment(self, k):
        if k % 2 == 1:
            return 0.0
        # (k-1)!! * variance^{k/2}
        out = 1.0
        for j in range(1, k, 2):
            out *= j
        return out * self.variance ** (k / 2.0)


@dataclass(frozen=True)
class CauchyLaw(JumpLaw):
    """Centered Cauchy jump sizes; every integer absolute moment diverges."""

    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("scale must be positive and finite")

    def sample(self, rng, size):
        return self.scale * rng.standard_cauchy(size)

    def abs_moment(self, q):
        if q >= 1:
            raise DivergentMomentError(
                f"Cauchy law has no finite absolute moment of order {q}", order=q
            )
        return self.scale**q / math.cos(math.pi * q / 2.0)

    def raw_moment(self, k):
        raise DivergentMomentError(
            f"Cauchy law has no finite raw moment of order {k}", order=k
        )


@dataclass(frozen=True)
class EmptyLaw(JumpLaw):
    """Degenerate law for rate-zero measures (no jumps ever occur)."""

    def sample(self, rng, size):
        if size:
            raise LevyHybridError("the empty jump law cannot be sampled")
        return np.empty(0)

    def abs_moment(self, q):
        return 0.0

    def raw_moment(self, k):
        return 0.0


@dataclass(frozen=True)
class EmpiricalLaw(JumpLaw):
    """Sampler-defined law; moments must be supplied explicitly.

    ``sampler(rng, size)`` draws jump sizes. Without a moment table the
    moment functionals are unavailable (not divergent), which is an error.
    """

    sampler: Callable[[np.random.Generator, int], np.ndarray]
    abs_moments: Mapping[float, float] | None = None
    raw_moments: Mapping[int, float] | None = None

    def sample(self, rng, size):
        out = np.asarray(self.sampler(rng, size), dtype=float)
        if out.shape != (size,):
            raise LevyHybridError("empirical sampler returned the wrong shape")
        return out

    def abs_moment(self, q):
        if self.abs_moments is None or q not in self.abs_moments:
            raise LevyHybridError(
                f"empirical law has no declared absolute moment of order {q}"
            )
        return float(self.abs_moments[q])

    def raw_moment(self, k):
        if self.raw_moments is None or k not in self.raw_moments:
            raise LevyHybridError(f"empirical law has no declared raw moment of order {k}")
        return float(self.raw_moments[k])


# ---------------------------------------------------------------------------
# Continuous intensities and truncation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuousDensity:
    """Pointwise description of a continuous jump intensity ``nu(x)``.

    ``tail_power`` records the polynomial decay exponent p with
    ``nu(x) ~ |x|^{-p}`` for large ``|x|``; ``None`` means the tails decay
    faster than any polynomial (or the support is compact), so every
    polynomial moment of a truncation is finite.
    """

    fn: Callable[[float], float]
    support: tuple[float, float]
    tail_power: float | None = None
    label: str = "density"

    def __post_init__(self):
        lo, hi = self.support
        if not lo < 0 < hi:
            raise ValueError("support must be an interval around zero")

    def moment_is_finite(self, q: float) -> bool:
        lo, hi = self.support
        if math.isfinite(lo) and math.isfinite(hi):
            return True
        return self.tail_power is None or q < self.tail_power - 1.0


@dataclass(frozen=True)
class TruncationRecord:
    density: ContinuousDensity
    epsilon: float


@dataclass(frozen=True)
class TruncatedDensityLaw(JumpLaw):
    """Law proportional to ``1[|x| > eps] nu(x)``, normalized by the tail mass."""

    density: ContinuousDensity
    epsilon: float
    tail_mass: float
    _cdf_grid: tuple = field(default=None, repr=False, compare=False)

    def _intervals(self):
        lo, hi = self.density.support
        out = []
        if lo < -self.epsilon:
            out.append((lo, -self.epsilon))
        if hi > self.epsilon:
            out.append((self.epsilon, hi))
        return out

    def _moment(self, integrand, order):
        if not self.density.moment_is_finite(order):
            raise DivergentMomentError(
                f"truncated density has divergent moment of order {order} "
                f"(tail power {self.density.tail_power})",
                order=order,
            )
        total = 0.0
        for lo, hi in self._intervals():
            total += _quad_checked(lambda x: integrand(x) * self.density.fn(x), lo, hi)
        return total / self.tail_mass

    def abs_moment(self, q):
        return self._moment(lambda x: abs(x) ** q, q)

    def raw_moment(self, k):
        return self._moment(lambda x: x**k, k)

    def _build_sampler(self):
        lo, hi = self.density.support
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise LevyHybridError(
                "sampling from a truncated density requires compact support; "
                "use an explicit parametric law for heavy-tailed inputs"
            )
        segments = []
        for a, b in self._intervals():
            xs = np.linspace(a, b, 4097)
            vals = np.array([max(self.density.fn(x), 0.0) for x in xs])
            cdf = np.concatenate(
                [[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(xs))]
            )
            mass = cdf[-1]
            if mass <= 0:
                continue
            keep = np.concatenate([[True], np.diff(cdf) > 0])
            segments.append((mass, cdf[keep] / mass, xs[keep]))
        masses = np.array([m for m, _, _ in segments])
        object.__setattr__(self, "_cdf_grid", (np.cumsum(masses) / masses.sum(), segments))

    def sample(self, rng, size):
        # inverse-CDF per tail segment; inverting each side separately keeps
        # draws out of the excised band (-eps, eps)
        if self._cdf_grid is None:
            self._build_sampler()
        bounds, segments = self._cdf_grid
        u = rng.random(size)
        out = np.empty(size)
        seg_idx = np.searchsorted(bounds, u, side="right")
        seg_idx = np.minimum(seg_idx, len(segments) - 1)
        for i, (_, cdf, xs) in enumerate(segments):
            mask = seg_idx == i
            if not np.any(mask):
                continue
            low = bounds[i - 1] if i > 0 else 0.0
            local = (u[mask] - low) / (bounds[i] - low)
            out[mask] = np.interp(local, cdf, xs)
        return out


# ---------------------------------------------------------------------------
# Measure spec and operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevyMeasureSpec:
    """Finite-activity Levy measure: ``rate`` times a jump-size law."""

    rate: float
    jump_law: JumpLaw
    source: TruncationRecord | None = None

    def __post_init__(self):
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ValueError("rate must be finite and nonnegative")
        if self.rate > 0 and isinstance(self.jump_law, EmptyLaw):
            raise ValueError("a positive-rate measure needs a real jump law")


def absolute_moment(spec: LevyMeasureSpec, q: float) -> float:
    """m_q = rate * E|J|^q. Zero-rate measures have every moment zero."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if spec.rate == 0.0:
        return 0.0
    return spec.rate * spec.jump_law.abs_moment(q)


def polynomial_jump_integral(spec: LevyMeasureSpec, f: PolynomialSpec) -> float:
    """Integral of a one-variable polynomial f (f(0)=0) against the measure,
    i.e. rate * E[f(J)]."""
    f.require_univariate()
    if spec.rate == 0.0:
        return 0.0
    total = 0.0
    for (k,), c in f.coefficients.items():
        if c != 0.0:
            total += c * spec.jump_law.raw_moment(k)
    return spec.rate * total


def truncate(density: ContinuousDensity, epsilon: float) -> LevyMeasureSpec:
    """Restrict a continuous intensity to ``|x| > epsilon`` and renormalize.

    The result is a compound-Poisson spec with rate ``integral of nu over the
    tails`` and jump law proportional to the restricted density; the source
    density and level are recorded for convergence studies.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    lo, hi = density.support
    if not (math.isfinite(lo) and math.isfinite(hi)):
        if density.tail_power is not None and density.tail_power <= 1.0:
            raise NonIntegrableTailError(
                f"tail power {density.tail_power} <= 1: infinite mass beyond any level"
            )
    rate = 0.0
    if lo < -epsilon:
        rate += _quad_checked(density.fn, lo, -epsilon)
    if hi > epsilon:
        rate += _quad_checked(density.fn, epsilon, hi)
    if not math.isfinite(rate):
        raise NonIntegrableTailError("tail mass is not finite")
    record = TruncationRecord(density, float(epsilon))
    if rate <= 0.0:
        return LevyMeasureSpec(0.0, EmptyLaw(), source=record)
    law = TruncatedDensityLaw(density, float(epsilon), rate)
    return LevyMeasureSpec(rate, law, source=record)


@dataclass(frozen=True)
class MomentCondition:
    satisfied: bool
    failing_order: int | None = None


def moment_condition_check(spec: LevyMeasureSpec, order: int) -> MomentCondition:
    """Check that every absolute moment up to ``order`` is finite."""
    if order < 1:
        raise ValueError("order must be >= 1")
    for q in range(1, order + 1):
        try:
            absolute_moment(spec, q)
        except DivergentMomentError:
            return MomentCondition(False, q)
    return MomentCondition(True, None)
