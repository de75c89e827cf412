"""Hybrid dynamics: slowly-varying parameters, parameter resets, state resets.

The state follows dX = A(theta) X dt + B(theta) dL + C(theta) dW with theta
itself a slowly varying diffusion-with-jumps confined to a compact box.
Between events X is advanced by the exact frozen-theta transition over
substeps of at most ``step``; theta is advanced by Euler-Maruyama on the same
substeps, with its own jump noise applied atomically and resets snapping it
back to theta0 exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .certificates import ParametricCertificate, ParametricFamily, spectral_abscissa
from .drift import ResetJumpRecord, reset_jump_xi
from .engine import ExactTransitionEngine, psd_factor, van_loan_gramian
from .errors import ContainmentError
from .measures import LevyMeasureSpec
from .sampling import (
    SeedSpec,
    merge_events,
    sample_compound_poisson_from,
    sample_jump_paths,
    sample_reset_times_from,
)
from .sde import SystemMatrices, TrajEvent, Trajectory, run_event_driven_path, simulate_ti

_CLIP_SAFETY = 1.0 - 1e-12

# timeline ranks: grid samples first, then substep boundaries, state jumps,
# theta jumps, and resets last (a reset coinciding with a jump acts on the
# post-jump value, the left-limit convention).
_R_GRID, _R_STEP, _R_XJUMP, _R_TJUMP, _R_RESET = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class AffineThetaProfile:
    """Scalar mean-reverting coefficients: drift kappa*(center - theta),
    constant diffusion and jump gain. Lets the stepper run on plain floats."""

    kappa: float
    center: float
    sigma: float
    rho: float


@dataclass(frozen=True)
class ThetaProcessSpec:
    """Slowly varying parameter process with bound delta.

    ``drift``, ``diffusion`` and ``jump_gain`` are bounded evaluators of
    (t, theta); before every step the triple is jointly rescaled so that
    |drift|^2 + ||diffusion||^2 + ||jump_gain||^2 stays strictly below
    ``delta`` (when ``clip_jump_gain`` is off, the jump gain is excluded from
    the bound, matching the unit-loading reset dynamics). ``noise`` is the
    parameter's own jump measure; containment in the box is enforced by
    Euclidean projection or by hard failure.
    """

    drift: Callable[[float, np.ndarray], np.ndarray]
    diffusion: Callable[[float, np.ndarray], np.ndarray]
    jump_gain: Callable[[float, np.ndarray], np.ndarray]
    delta: float
    wiener_dim: int = 1
    noise: LevyMeasureSpec | None = None
    containment: str = "project"
    clip_jump_gain: bool = True
    affine_profile: AffineThetaProfile | None = None

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.containment not in ("project", "fail"):
            raise ValueError("containment must be 'project' or 'fail'")
        if self.wiener_dim < 1:
            raise ValueError("wiener_dim must be positive")

    @property
    def has_jumps(self) -> bool:
        return self.noise is not None and self.noise.rate > 0

    @property
    def is_degenerate(self) -> bool:
        """True when delta = 0 freezes theta entirely (no unclipped jumps)."""
        return self.delta == 0.0 and (self.clip_jump_gain or not self.has_jumps)

    def coefficients(self, t: float, theta: np.ndarray):
        """Evaluate and jointly clip (drift, diffusion, jump_gain) at (t, theta).

        Returns the clipped triple and the post-clip squared norm.
        """
        p = theta.size
        beta = np.asarray(self.drift(t, theta), dtype=float).reshape(p)
        sig = np.asarray(self.diffusion(t, theta), dtype=float).reshape(p, self.wiener_dim)
        if self.has_jumps:
            rho = np.asarray(self.jump_gain(t, theta), dtype=float).reshape(p)
        else:
            rho = np.zeros(p)
        s2 = float(beta @ beta) + float(np.sum(sig * sig))
        if self.clip_jump_gain:
            s2 += float(rho @ rho)
        if s2 >= self.delta:
            factor = math.sqrt(self.delta * _CLIP_SAFETY / s2) if s2 > 0 else 0.0
            beta = beta * factor
            sig = sig * factor
            if self.clip_jump_gain:
                rho = rho * factor
            s2 = s2 * factor * factor
        return beta, sig, rho, s2


def mean_reverting_theta(
    family: ParametricFamily,
    delta: float,
    kappa: float = 1.0,
    sigma_scale: float = 0.0,
    jump_scale: float = 0.0,
    noise: LevyMeasureSpec | None = None,
    containment: str = "project",
    clip_jump_gain: bool = True,
) -> ThetaProcessSpec:
    """Default theta process: drift toward the box center, constant loadings."""
    center = 0.5 * (family.lower + family.upper)
    p = family.dim
    profile = (
        AffineThetaProfile(kappa, float(center[0]), sigma_scale, jump_scale)
        if p == 1
        else None
    )
    return ThetaProcessSpec(
        drift=lambda t, th: kappa * (center - th),
        diffusion=lambda t, th: sigma_scale * np.eye(p),
        jump_gain=lambda t, th: jump_scale * np.ones(p),
        delta=delta,
        wiener_dim=p,
        noise=noise,
        containment=containment,
        clip_jump_gain=clip_jump_gain,
        affine_profile=profile,
    )


@dataclass(frozen=True)
class ResetSpec:
    """Reset intervention: mode, and either a Poisson rate or a schedule."""

    mode: str  # "parameter" | "state" | "none"
    rate: float | None = None
    schedule: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("parameter", "state", "none"):
            raise ValueError("mode must be 'parameter', 'state' or 'none'")
        if self.mode != "none" and self.rate is None and self.schedule is None:
            raise ValueError("a reset needs a rate or an explicit schedule")

    def times(self, horizon: float, rng: np.random.Generator | None) -> np.ndarray:
        if self.mode == "none":
            return np.empty(0)
        source = self.schedule if self.schedule is not None else self.rate
        return sample_reset_times_from(rng, source, horizon)


@dataclass
class ThetaPath:
    times: np.ndarray
    values: np.ndarray  # (len(times), p)


@dataclass
class HybridStreams:
    """Generators for each independent noise source of one or more paths."""

    jumps: list[np.random.Generator]
    wiener: np.random.Generator
    theta_wiener: np.random.Generator
    theta_jumps: np.random.Generator
    resets: np.random.Generator

    @classmethod
    def from_seed(cls, seed: SeedSpec, n_jump_components: int) -> "HybridStreams":
        return cls(
            jumps=[
                seed.child(stream=f"jumps:{i}").generator() for i in range(n_jump_components)
            ],
            wiener=seed.child(stream="wiener").generator(),
            theta_wiener=seed.child(stream="theta_wiener").generator(),
            theta_jumps=seed.child(stream="theta_jumps").generator(),
            resets=seed.child(stream="resets").generator(),
        )


@dataclass
class HybridPathResult:
    grid_states: np.ndarray  # (G, n)
    theta_states: np.ndarray  # (G, p)
    events: list[TrajEvent]
    resets: list[ResetJumpRecord]
    state_resets: list[tuple[float, np.ndarray]]
    slow_sq_max: float


def system_at(family: ParametricFamily, theta) -> SystemMatrices:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return SystemMatrices(family.a(theta), family.b(theta), family.c(theta))


def family_has_wiener(family: ParametricFamily) -> bool:
    center = 0.5 * (family.lower + family.upper)
    return bool(
        np.any(np.asarray(family.c(family.theta0)) != 0.0)
        or np.any(np.asarray(family.c(center)) != 0.0)
    )


def _timeline(
    theta_spec: ThetaProcessSpec,
    noise: Sequence[LevyMeasureSpec],
    horizon: float,
    grid: np.ndarray,
    step: float,
    streams: HybridStreams,
    reset: ResetSpec | None,
):
    """Sample all event times in a fixed stream order and merge them.

    Returns the sorted entry list (time, rank, component, size) and the
    count of positive-length intervals between distinct event times.
    """
    entries = [(float(t), _R_GRID, -1, 0.0) for t in grid]
    n_bound = int(math.ceil(horizon / step - 1e-12))
    entries.extend(
        (min(k * step, horizon), _R_STEP, -1, 0.0) for k in range(1, n_bound + 1)
    )
    for comp, spec in enumerate(noise):
        times, sizes = sample_compound_poisson_from(streams.jumps[comp], spec, horizon)
        entries.extend((float(t), _R_XJUMP, comp, float(s)) for t, s in zip(times, sizes))
    if theta_spec.has_jumps:
        times, sizes = sample_compound_poisson_from(
            streams.theta_jumps, theta_spec.noise, horizon
        )
        entries.extend((float(t), _R_TJUMP, 0, float(s)) for t, s in zip(times, sizes))
    if reset is not None:
        entries.extend(
            (float(t), _R_RESET, -1, 0.0)
            for t in reset.times(horizon, streams.resets)
        )
    entries.sort()
    n_int = len({t for t, _, _, _ in entries if t > 0.0})
    return entries, n_int


def run_hybrid_path(
    family: ParametricFamily,
    theta_spec: ThetaProcessSpec,
    noise: Sequence[LevyMeasureSpec],
    x0,
    horizon: float,
    grid,
    step: float,
    streams: HybridStreams,
    *,
    reset: ResetSpec | None = None,
    certificate: ParametricCertificate | None = None,
    q: float = 2.0,
    record_events: bool = False,
) -> HybridPathResult:
    """Advance one path of the coupled (X, theta) dynamics event by event.

    All randomness is drawn from ``streams`` in a fixed order (state jumps
    per component, theta jumps, reset times, then the Gaussian blocks), so a
    given stream state determines the path bit for bit.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    grid = np.asarray(grid, dtype=float)
    if (
        family.scalar_forms is not None
        and family.dim == 1
        and theta_spec.affine_profile is not None
        and theta_spec.wiener_dim == 1
        and len(noise) == 1
        and np.size(x0) == 1
    ):
        return _run_scalar_hybrid_path(
            family,
            theta_spec,
            noise,
            float(np.ravel(x0)[0]),
            horizon,
            grid,
            step,
            streams,
            reset=reset,
            certificate=certificate,
            q=q,
            record_events=record_events,
        )
    theta0 = family.theta0
    p_dim = family.dim
    x = np.asarray(x0, dtype=float).ravel().copy()
    n = x.size
    th = theta0.copy()
    has_x_wiener = family_has_wiener(family)
    scalar = n == 1 and p_dim == 1

    entries, n_int = _timeline(theta_spec, noise, horizon, grid, step, streams, reset)
    zx = streams.wiener.standard_normal((n_int, n)) if has_x_wiener else None
    zt = streams.theta_wiener.standard_normal((n_int, theta_spec.wiener_dim))

    # -- march ---------------------------------------------------------------
    a_fn, b_fn, c_fn = family.a, family.b, family.c
    contain_fail = theta_spec.containment == "fail"
    lower, upper = family.lower, family.upper
    grid_states = np.empty((grid.size, n))
    theta_states = np.empty((grid.size, p_dim))
    grid_pos = 0
    events_log: list[TrajEvent] = []
    reset_records: list[ResetJumpRecord] = []
    state_resets: list[tuple[float, np.ndarray]] = []
    slow_sq_max = 0.0
    base_p = certificate.base_p if certificate is not None else None

    def _contain(th_new, t):
        if contain_fail:
            if np.any(th_new < lower) or np.any(th_new > upper):
                raise ContainmentError(f"theta left the box at t={t}: {th_new}")
            return th_new
        return np.clip(th_new, lower, upper)

    t_cur = 0.0
    it = 0
    for te, rank, comp, size in entries:
        if te > t_cur:
            d = te - t_cur
            beta, sig, _, s2 = theta_spec.coefficients(t_cur, th)
            if s2 > slow_sq_max:
                slow_sq_max = s2
            a_mat = a_fn(th)
            if scalar:
                a = float(a_mat[0, 0])
                mean = math.exp(a * d) * x[0]
                if has_x_wiener:
                    cval = float(np.asarray(c_fn(th)).reshape(-1)[0])
                    if a != 0.0:
                        var = cval * cval * math.expm1(2.0 * a * d) / (2.0 * a)
                    else:
                        var = cval * cval * d
                    mean += math.sqrt(max(var, 0.0)) * zx[it, 0]
                x[0] = mean
            else:
                x = expm(np.atleast_2d(a_mat) * d) @ x
                if has_x_wiener:
                    cm = np.asarray(c_fn(th), dtype=float).reshape(n, -1)
                    g = van_loan_gramian(np.atleast_2d(a_mat), cm @ cm.T, d)
                    x = x + psd_factor(g) @ zx[it]
            th = _contain(th + beta * d + sig @ (math.sqrt(d) * zt[it]), te)
            it += 1
            t_cur = te
            if not np.all(np.isfinite(x)):
                raise FloatingPointError(f"state became non-finite at t={te}")
        if rank == _R_GRID:
            grid_states[grid_pos] = x
            theta_states[grid_pos] = th
            grid_pos += 1
        elif rank == _R_XJUMP:
            x_before = x.copy() if record_events else None
            x = x + np.asarray(b_fn(th), dtype=float).reshape(n, -1)[:, comp] * size
            if record_events:
                events_log.append(TrajEvent(te, "jump", comp, size, x_before, x.copy()))
        elif rank == _R_TJUMP:
            _, _, rho, s2 = theta_spec.coefficients(te, th)
            if s2 > slow_sq_max:
                slow_sq_max = s2
            th = _contain(th + rho * size, te)
        elif rank == _R_RESET:
            if reset.mode == "parameter":
                xi = (
                    reset_jump_xi(x, certificate.evaluate(th), base_p, q)
                    if certificate is not None
                    else float("nan")
                )
                reset_records.append(ResetJumpRecord(te, th.copy(), x.copy(), xi))
                th = theta0.copy()
            else:  # state reset
                state_resets.append((te, x.copy()))
                x_before = x.copy() if record_events else None
                x = np.asarray(x0, dtype=float).ravel().copy()
                if record_events:
                    events_log.append(TrajEvent(te, "reset", None, 0.0, x_before, x.copy()))
    return HybridPathResult(
        grid_states, theta_states, events_log, reset_records, state_resets, slow_sq_max
    )


def _run_scalar_hybrid_path(
    family: ParametricFamily,
    theta_spec: ThetaProcessSpec,
    noise: Sequence[LevyMeasureSpec],
    x0: float,
    horizon: float,
    grid: np.ndarray,
    step: float,
    streams: HybridStreams,
    *,
    reset: ResetSpec | None,
    certificate: ParametricCertificate | None,
    q: float,
    record_events: bool,
) -> HybridPathResult:
    """Float-only stepper for one-dimensional state and parameter.

    Semantics match :func:`run_hybrid_path` exactly (same stream order, same
    event ranking, same clipping and containment rules); only the arithmetic
    representation differs. Every scalar Lyapunov solve normalizes to
    P = [[1]], so the certificate matrix is the constant 1 here and reset
    jumps of V vanish identically (asserted at certificate construction).
    """
    a_s, b_s, c_s = family.scalar_forms
    prof = theta_spec.affine_profile
    lo = float(family.lower[0])
    hi = float(family.upper[0])
    th0 = float(family.theta0[0])
    delta_bound = theta_spec.delta
    clip_rho = theta_spec.clip_jump_gain
    rho_raw = prof.rho if theta_spec.has_jumps else 0.0
    contain_fail = theta_spec.containment == "fail"
    has_x_wiener = family_has_wiener(family)

    entries, n_int = _timeline(theta_spec, noise, horizon, grid, step, streams, reset)
    zx = streams.wiener.standard_normal((n_int, 1)) if has_x_wiener else None
    zt = streams.theta_wiener.standard_normal((n_int, 1))

    def clipped(th_val: float):
        beta = prof.kappa * (prof.center - th_val)
        sig = prof.sigma
        rho = rho_raw
        s2 = beta * beta + sig * sig + (rho * rho if clip_rho else 0.0)
        if s2 >= delta_bound:
            factor = math.sqrt(delta_bound * _CLIP_SAFETY / s2) if s2 > 0 else 0.0
            beta *= factor
            sig *= factor
            if clip_rho:
                rho *= factor
            s2 *= factor * factor
        return beta, sig, rho, s2

    grid_states = np.empty((grid.size, 1))
    theta_states = np.empty((grid.size, 1))
    grid_pos = 0
    events_log: list[TrajEvent] = []
    reset_records: list[ResetJumpRecord] = []
    state_resets: list[tuple[float, np.ndarray]] = []
    slow_sq_max = 0.0
    x = x0
    th = th0
    t_cur = 0.0
    it = 0
    exp = math.exp
    sqrt = math.sqrt
    for te, rank, comp, size in entries:
        if te > t_cur:
            d = te - t_cur
            beta, sig, _, s2 = clipped(th)
            if s2 > slow_sq_max:
                slow_sq_max = s2
            a = a_s(th)
            mean = exp(a * d) * x
            if has_x_wiener:
                cv = c_s(th)
                var = cv * cv * (math.expm1(2.0 * a * d) / (2.0 * a) if a != 0.0 else d)
                mean += sqrt(var if var > 0.0 else 0.0) * zx[it, 0]
            x = mean
            th = th + beta * d + sig * sqrt(d) * zt[it, 0]
            if th < lo or th > hi:
                if contain_fail:
                    raise ContainmentError(f"theta left the box at t={te}: {th}")
                th = lo if th < lo else hi
            it += 1
            t_cur = te
            if not math.isfinite(x):
                raise FloatingPointError(f"state became non-finite at t={te}")
        if rank == _R_GRID:
            grid_states[grid_pos, 0] = x
            theta_states[grid_pos, 0] = th
            grid_pos += 1
        elif rank == _R_XJUMP:
            x_new = x + b_s(th) * size
            if record_events:
                events_log.append(
                    TrajEvent(te, "jump", comp, size, np.array([x]), np.array([x_new]))
                )
            x = x_new
        elif rank == _R_TJUMP:
            _, _, rho, s2 = clipped(th)
            if s2 > slow_sq_max:
                slow_sq_max = s2
            th = th + rho * size
            if th < lo or th > hi:
                if contain_fail:
                    raise ContainmentError(f"theta left the box at t={te}: {th}")
                th = lo if th < lo else hi
        elif rank == _R_RESET:
            if reset.mode == "parameter":
                xi = 0.0 if certificate is not None else float("nan")
                reset_records.append(
                    ResetJumpRecord(te, np.array([th]), np.array([x]), xi)
                )
                th = th0
            else:
                state_resets.append((te, np.array([x])))
                if record_events:
                    events_log.append(
                        TrajEvent(te, "reset", None, 0.0, np.array([x]), np.array([x0]))
                    )
                x = x0
    return HybridPathResult(
        grid_states, theta_states, events_log, reset_records, state_resets, slow_sq_max
    )


def simulate_parameter_varying(
    family: ParametricFamily,
    theta_spec: ThetaProcessSpec,
    noise: Sequence[LevyMeasureSpec],
    x0,
    horizon: float,
    grid,
    step: float,
    seed: SeedSpec,
) -> tuple[Trajectory, ThetaPath]:
    """Simulate the slowly-varying system; delta = 0 reproduces the frozen
    time-invariant law exactly (same seed, same bits)."""
    grid = np.asarray(grid, dtype=float)
    if theta_spec.is_degenerate:
        traj = simulate_ti(system_at(family, family.theta0), list(noise), x0, horizon, grid, seed)
        theta = np.tile(family.theta0, (grid.size, 1))
        return traj, ThetaPath(grid, theta)
    streams = HybridStreams.from_seed(seed, len(noise))
    res = run_hybrid_path(
        family, theta_spec, noise, x0, horizon, grid, step, streams, record_events=True
    )
    traj = Trajectory(grid=grid, states=res.grid_states, events=res.events, system=None)
    return traj, ThetaPath(grid, res.theta_states)


def simulate_parameter_reset(
    family: ParametricFamily,
    theta_spec: ThetaProcessSpec,
    reset: ResetSpec,
    noise: Sequence[LevyMeasureSpec],
    x0,
    horizon: float,
    grid,
    step: float,
    seed: SeedSpec,
    certificate: ParametricCertificate,
    q: float = 2.0,
) -> tuple[Trajectory, ThetaPath, list[ResetJumpRecord]]:
    """Parameter resetting: theta snaps to theta0 at reset times; each reset
    logs (time, theta-, xi) with xi from the certified Lyapunov pair."""
    if reset.mode != "parameter":
        raise ValueError("reset mode must be 'parameter'")
    grid = np.asarray(grid, dtype=float)
    streams = HybridStreams.from_seed(seed, len(noise))
    res = run_hybrid_path(
        family,
        theta_spec,
        noise,
        x0,
        horizon,
        grid,
        step,
        streams,
        reset=reset,
        certificate=certificate,
        q=q,
        record_events=True,
    )
    traj = Trajectory(grid=grid, states=res.grid_states, events=res.events, system=None)
    return traj, ThetaPath(grid, res.theta_states), res.resets


def simulate_state_reset(
    system: SystemMatrices,
    reset: ResetSpec,
    noise: Sequence[LevyMeasureSpec],
    x0,
    horizon: float,
    grid,
    seed: SeedSpec,
) -> tuple[Trajectory, list[tuple[float, np.ndarray]]]:
    """State resetting: exact event-driven integration with X snapped to X0.

    The boundedness claim for this dynamics is an open conjecture; runs in
    the unstable-A regime are allowed but flagged with a warning.
    """
    if reset.mode != "state":
        raise ValueError("reset mode must be 'state'")
    if spectral_abscissa(system.a) >= 0:
        warnings.warn(
            "state-reset run with a non-Hurwitz A: exploratory regime", stacklevel=2
        )
    grid = np.asarray(grid, dtype=float)
    jumps = sample_jump_paths(noise, horizon, seed)
    rtimes = reset.times(horizon, seed.child(stream="resets").generator())
    events = merge_events(jumps, rtimes, grid)
    engine = ExactTransitionEngine(system.a, system.c)
    rng_w = seed.child(stream="wiener").generator() if engine.has_noise else None
    states, elog, rlog = run_event_driven_path(
        engine, system, events, x0, grid, rng_w, reset_target=x0, record_events=True
    )
    return Trajectory(grid=grid, states=states, events=elog, system=system), rlog
