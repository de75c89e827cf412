"""Event-driven exact integration of dX = A X dt + B dL + C dW.

Between events the transition is the exact Gaussian map (matrix exponential
mean, Van Loan Gramian covariance); jumps are applied atomically, so the only
randomness discretization anywhere is the reporting grid density.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .engine import ExactTransitionEngine, psd_factor, van_loan_gramian
from .measures import LevyMeasureSpec
from .sampling import Event, JumpPath, SeedSpec, merge_events, sample_jump_paths


@dataclass(frozen=True)
class SystemMatrices:
    """Constant system (A, B, C): drift, jump loading (n x l), Wiener loading (n x k)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("A must be square")
        b = np.asarray(self.b, dtype=float).reshape(n, -1) if np.size(self.b) else np.zeros((n, 0))
        c = np.asarray(self.c, dtype=float).reshape(n, -1) if np.size(self.c) else np.zeros((n, 0))
        for name, m in (("A", a), ("B", b), ("C", c)):
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def l(self) -> int:
        return self.b.shape[1]

    @property
    def k(self) -> int:
        return self.c.shape[1]

    @property
    def has_wiener(self) -> bool:
        return bool(np.any(self.c != 0.0))


@dataclass(frozen=True)
class TrajEvent:
    """One applied jump or reset with the surrounding left/right states."""

    time: float
    kind: str
    component: int | None
    size: float
    x_before: np.ndarray
    x_after: np.ndarray


@dataclass
class Trajectory:
    """Grid samples plus the event log of one simulated path."""

    grid: np.ndarray
    states: np.ndarray  # (len(grid), n)
    events: list[TrajEvent] = field(default_factory=list)
    system: SystemMatrices | None = None

    @property
    def n(self) -> int:
        return self.states.shape[1]


def propagate_exact(a, c, x, delta: float, rng: np.random.Generator | None = None):
    """One exact transition over an interval of length ``delta``.

    Returns a draw with mean exp(A delta) x and covariance equal to the Van
    Loan Gramian of (A, C); with C = 0 (or rng None and C = 0) the map is
    deterministic.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    a = np.atleast_2d(np.asarray(a, dtype=float))
    x = np.asarray(x, dtype=float).reshape(a.shape[0])
    if not np.all(np.isfinite(a)):
        raise ValueError("A contains non-finite entries")
    mean = expm(a * delta) @ x
    if c is None or not np.any(np.asarray(c) != 0.0):
        return mean
    if rng is None:
        raise ValueError("a generator is required when C is nonzero")
    c = np.asarray(c, dtype=float).reshape(a.shape[0], -1)
    g = van_loan_gramian(a, c @ c.T, delta)
    return mean + psd_factor(g) @ rng.standard_normal(a.shape[0])


def apply_jump(x, b, dl):
    """State update x + B dL for one jump vector."""
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float).reshape(x.size, -1)
    return x + b @ np.asarray(dl, dtype=float)


def run_event_driven_path(
    engine: ExactTransitionEngine,
    system: SystemMatrices,
    events: list[Event],
    x0: np.ndarray,
    grid: np.ndarray,
    rng_wiener: np.random.Generator | None,
    *,
    reset_target: np.ndarray | None = None,
    record_events: bool = False,
):
    """March the exact transition through a merged event timeline.

    Returns (grid_states, event_log, reset_log); reset events restore the
    state to ``reset_target`` exactly and log the pre-reset state.
    """
    n = system.n
    x = np.asarray(x0, dtype=float).reshape(n).copy()
    deltas = []
    t_prev = 0.0
    for ev in events:
        if ev.time > t_prev:
            deltas.append(ev.time - t_prev)
            t_prev = ev.time
    deltas = np.asarray(deltas)
    phis = engine.propagators(deltas) if deltas.size else np.empty((0, n, n))
    if engine.has_noise and deltas.size:
        if rng_wiener is None:
            raise ValueError("a Wiener generator is required when C is nonzero")
        factors = engine.noise_factors(deltas)
        zs = rng_wiener.standard_normal((deltas.size, n))
    grid_states = np.empty((len(grid), n))
    grid_pos = 0
    event_log: list[TrajEvent] = []
    reset_log: list[tuple[float, np.ndarray]] = []
    t_cur = 0.0
    step = 0
    for ev in events:
        if ev.time > t_cur:
            x = phis[step] @ x
            if engine.has_noise:
                x = x + factors[step] @ zs[step]
            step += 1
            t_cur = ev.time
        if ev.kind == "grid":
            grid_states[grid_pos] = x
            grid_pos += 1
        elif ev.kind == "jump":
            x_before = x.copy() if record_events else None
            x = x + system.b[:, ev.component] * ev.size
            if record_events:
                event_log.append(
                    TrajEvent(ev.time, "jump", ev.component, ev.size, x_before, x.copy())
                )
        elif ev.kind == "reset":
            reset_log.append((ev.time, x.copy()))
            x_before = x.copy() if record_events else None
            x = np.asarray(reset_target, dtype=float).reshape(n).copy()
            if record_events:
                event_log.append(TrajEvent(ev.time, "reset", None, 0.0, x_before, x.copy()))
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"state became non-finite at t={ev.time}")
    return grid_states, event_log, reset_log


def simulate_ti(
    system: SystemMatrices,
    noise: list[LevyMeasureSpec],
    x0,
    horizon: float,
    grid,
    seed: SeedSpec,
    *,
    jumps: JumpPath | None = None,
) -> Trajectory:
    """Simulate the time-invariant system exactly on [0, horizon].

    ``noise`` supplies one measure per jump component (length must match
    B's column count); ``jumps`` overrides sampling with an explicit path,
    which is how deterministic jump injections are expressed. Callers that
    go on to report order-Q moments are expected to have gated the noise
    through the moment condition at order Q.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(grid < 0) or np.any(grid > horizon):
        raise ValueError("grid must lie within [0, horizon]")
    if jumps is None:
        if len(noise) != system.l:
            raise ValueError(f"need {system.l} noise components, got {len(noise)}")
        jumps = sample_jump_paths(noise, horizon, seed)
    elif jumps.n_components != system.l:
        raise ValueError("jump path component count must match B")
    events = merge_events(jumps, [], grid)
    engine = ExactTransitionEngine(system.a, system.c)
    rng_w = seed.child(stream="wiener").generator() if engine.has_noise else None
    states, event_log, _ = run_event_driven_path(
        engine, system, events, x0, grid, rng_w, record_events=True
    )
    return Trajectory(grid=grid, states=states, events=event_log, system=system)
