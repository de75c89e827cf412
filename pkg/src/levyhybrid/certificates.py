"""Quadratic Lyapunov certificates for stable matrices and parametric families.

A certificate is a pair (P, alpha) with P >= I and P A + A' P <= -alpha P.
The parametric constructor additionally enforces the pointwise ordering
P(theta) >= P(theta0) over a verification grid on the parameter box, which is
what makes parameter resetting to theta0 a non-positive jump of the Lyapunov
process.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .errors import AlphaFloorError, InstabilityError

_EIG_CLIP = 1e-14


def spectral_abscissa(a: np.ndarray) -> float:
    return float(np.max(np.linalg.eigvals(a).real))


def _sym_eigvals(m: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(0.5 * (m + m.T))


@dataclass(frozen=True)
class Certificate:
    """Verified decay witness: P >= I, alpha > 0, residual = lam_max(PA + A'P + alpha P)."""

    p: np.ndarray
    alpha: float
    residual: float


def certify(a) -> Certificate:
    """Solve P0 A + A' P0 = -I, set alpha = 1/lam_max(P0) and rescale so P >= I.

    The rescaling P = P0 / lam_min(P0) preserves the decay inequality by
    homogeneity, and -I <= -alpha P0 makes the stated alpha valid.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    if a.shape != (n, n) or not np.all(np.isfinite(a)):
        raise ValueError("A must be a finite square matrix")
    if spectral_abscissa(a) >= 0:
        raise InstabilityError(
            f"matrix is not Hurwitz (spectral abscissa {spectral_abscissa(a):.6g})"
        )
    if n == 1:
        # closed form: P0 = -1/(2a), rescaled P = 1, alpha = -2a, residual 0
        return Certificate(np.array([[1.0]]), -2.0 * float(a[0, 0]), 0.0)
    p0 = solve_continuous_lyapunov(a.T, -np.eye(n))
    p0 = 0.5 * (p0 + p0.T)
    eigs = _sym_eigvals(p0)
    if eigs[0] <= 0:
        raise InstabilityError("Lyapunov solve returned a non-positive-definite solution")
    alpha = 1.0 / float(eigs[-1])
    p = p0 / float(eigs[0])
    residual = float(_sym_eigvals(p @ a + a.T @ p + alpha * p)[-1])
    return Certificate(p, alpha, residual)


def verify_certificate(p, alpha: float, a, tol: float = 1e-8):
    """Check lam_max(PA + A'P + alpha P) <= tol and lam_min(P) >= 1 - tol.

    Returns (ok, residual).
    """
    p = np.asarray(p, dtype=float)
    if not np.allclose(p, p.T, atol=1e-12):
        raise ValueError("P must be symmetric")
    a = np.atleast_2d(np.asarray(a, dtype=float))
    residual = float(_sym_eigvals(p @ a + a.T @ p + alpha * p)[-1])
    ok = residual <= tol and float(_sym_eigvals(p)[0]) >= 1.0 - tol
    return ok, residual


@dataclass(frozen=True)
class ParametricFamily:
    """Smooth family (A, B, C)(theta) over an axis-aligned box with base point theta0.

    ``b`` is the jump loading and ``c`` the Wiener loading, matching the
    constant-system convention. One-dimensional families may carry
    ``scalar_forms`` = (a, b, c) as plain float functions of theta, which
    lets the path integrator stay off the ndarray machinery in its hot loop.
    """

    a: Callable[[np.ndarray], np.ndarray]
    b: Callable[[np.ndarray], np.ndarray]
    c: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    theta0: np.ndarray
    scalar_forms: tuple[Callable, Callable, Callable] | None = None

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        theta0 = np.atleast_1d(np.asarray(self.theta0, dtype=float))
        if lower.shape != upper.shape or lower.shape != theta0.shape:
            raise ValueError("box bounds and theta0 must share one shape")
        if np.any(lower >= upper):
            raise ValueError("box must have positive volume")
        if np.any(theta0 < lower) or np.any(theta0 > upper):
            raise ValueError("theta0 must lie inside the box")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "theta0", theta0)

    @property
    def dim(self) -> int:
        return self.theta0.size

    def contains(self, theta: np.ndarray) -> bool:
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def project(self, theta: np.ndarray) -> np.ndarray:
        return np.clip(theta, self.lower, self.upper)

    def grid(self, points_per_dim: int) -> list[np.ndarray]:
        axes = [
            np.linspace(lo, hi, points_per_dim) for lo, hi in zip(self.lower, self.upper)
        ]
        return [np.array(pt) for pt in itertools.product(*axes)]


def _inv_sqrt(p: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (p + p.T))
    w = np.clip(w, _EIG_CLIP, None)
    return (v / np.sqrt(w)) @ v.T


class ParametricCertificate:
    """Pointwise certificate evaluator with the ordering P(theta) >= P(theta0).

    The raw pointwise solve P_hat(theta) is inflated by
    s(theta) = max(1, lam_max(P_hat^{-1/2} P(theta0) P_hat^{-1/2})), which is
    the smallest scaling that dominates the base matrix; at theta0 the scale
    is exactly one. Per-theta solves are memoized behind a lock, so concurrent
    evaluation is safe.
    """

    def __init__(self, family: ParametricFamily, alpha: float, grid_points: int):
        self.family = family
        self.alpha = float(alpha)
        self.grid_points = int(grid_points)
        self.base = certify(family.a(family.theta0))
        self._memo: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def base_p(self) -> np.ndarray:
        return self.base.p

    def scale_factor(self, theta) -> float:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if np.array_equal(theta, self.family.theta0):
            return 1.0
        p_hat = certify(self.family.a(theta)).p
        m = _inv_sqrt(p_hat) @ self.base.p @ _inv_sqrt(p_hat)
        return max(1.0, float(_sym_eigvals(m)[-1]))

    def evaluate(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        key = tuple(theta.tolist())
        with self._lock:
            cached = self._memo.get(key)
        if cached is not None:
            return cached
        if np.array_equal(theta, self.family.theta0):
            p = self.base.p
        else:
            p_hat = certify(self.family.a(theta)).p
            s = _inv_sqrt(p_hat)
            scale = max(1.0, float(_sym_eigvals(s @ self.base.p @ s)[-1]))
            p = scale * p_hat
        with self._lock:
            self._memo[key] = p
        return p


def parametric_certificate(
    family: ParametricFamily,
    alpha_floor: float = 0.0,
    grid_points: int = 11,
) -> ParametricCertificate:
    """Certify a family over its box: grid-verified Hurwitz check, uniform alpha.

    The uniform decay rate is the minimum per-point alpha over the
    verification grid; it must exceed ``alpha_floor``.
    """
    alphas = []
    for theta in family.grid(grid_points):
        try:
            alphas.append(certify(family.a(theta)).alpha)
        except InstabilityError as exc:
            raise InstabilityError(f"A(theta) unstable at theta={theta}: {exc}") from exc
    alpha = min(alphas)
    if alpha <= alpha_floor:
        raise AlphaFloorError(
            f"uniform decay rate {alpha:.6g} does not exceed the floor {alpha_floor:.6g}"
        )
    cert = ParametricCertificate(family, alpha, grid_points)
    if family.a(family.theta0).shape[0] == 1:
        # scalar solves normalize to P = [[1]] everywhere; the scalar path
        # integrator relies on this, so pin it down at construction
        probe = cert.evaluate(family.lower)
        assert abs(float(probe[0, 0]) - 1.0) <= 1e-12
    return cert
