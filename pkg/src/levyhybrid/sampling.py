"""Reproducible sampling of jump paths, Wiener increments and reset times.

Streams are counter-based: a (master, path, stream) triple pins down an
independent Philox generator, so replications can be produced in any order
or in parallel and still be bit-identical run to run.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .measures import LevyMeasureSpec

_EVENT_RANK = {"grid": 0, "jump": 1, "reset": 2}


@dataclass(frozen=True)
class SeedSpec:
    """Addressable random stream: (master seed, replication index, label)."""

    master: int
    path: int = 0
    stream: str = ""

    def __post_init__(self):
        if self.master < 0 or self.path < 0:
            raise ValueError("master and path must be nonnegative integers")

    def child(self, *, path: int | None = None, stream: str | None = None) -> "SeedSpec":
        out = self
        if path is not None:
            out = replace(out, path=path)
        if stream is not None:
            out = replace(out, stream=stream)
        return out

    def generator(self) -> np.random.Generator:
        label = zlib.crc32(self.stream.encode("utf-8"))
        seq = np.random.SeedSequence([self.master, self.path, label])
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class JumpPath:
    """Per-component jump events on (0, horizon]: sorted times and sizes."""

    times: tuple[np.ndarray, ...]
    sizes: tuple[np.ndarray, ...]
    horizon: float

    def __post_init__(self):
        if len(self.times) != len(self.sizes):
            raise ValueError("times and sizes must align per component")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        for t, s in zip(self.times, self.sizes):
            if t.shape != s.shape:
                raise ValueError("per-component times and sizes must align")
            if t.size and (t[0] <= 0 or t[-1] > self.horizon):
                raise ValueError("jump times must lie in (0, horizon]")
            if t.size > 1 and not np.all(np.diff(t) > 0):
                raise ValueError("jump times must be strictly increasing")

    @property
    def n_components(self) -> int:
        return len(self.times)

    @property
    def total_jumps(self) -> int:
        return int(sum(t.size for t in self.times))


@dataclass(frozen=True)
class Event:
    """Tagged point on the unified simulation timeline."""

    time: float
    kind: str  # "grid" | "jump" | "reset"
    component: int | None = None
    size: float = 0.0


def _sorted_uniform_times(rng: np.random.Generator, count: int, horizon: float) -> np.ndarray:
    # 1 - U keeps times in (0, horizon]; redraw on the measure-zero tie event
    # so JumpPath's strict-monotonicity invariant is unconditional.
    while True:
        times = np.sort(horizon * (1.0 - rng.random(count)))
        if count < 2 or np.all(np.diff(times) > 0):
            return times


def sample_compound_poisson_from(
    rng: np.random.Generator, spec: LevyMeasureSpec, horizon: float
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one component's jumps from an existing generator.

    Conditioned on the Poisson(rate*horizon) count, jump times are i.i.d.
    uniform and sizes i.i.d. from the jump law.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if spec.rate == 0.0:
        return np.empty(0), np.empty(0)
    count = int(rng.poisson(spec.rate * horizon))
    times = _sorted_uniform_times(rng, count, horizon)
    sizes = spec.jump_law.sample(rng, count)
    return times, sizes


def sample_compound_poisson(spec: LevyMeasureSpec, horizon: float, seed: SeedSpec) -> JumpPath:
    """Sample a single-component compound-Poisson jump path."""
    times, sizes = sample_compound_poisson_from(seed.generator(), spec, horizon)
    return JumpPath((times,), (sizes,), horizon)


def sample_jump_paths(
    specs: Sequence[LevyMeasureSpec], horizon: float, seed: SeedSpec
) -> JumpPath:
    """Sample independent components, one stream per component index."""
    times, sizes = [], []
    for i, spec in enumerate(specs):
        t, s = sample_compound_poisson_from(
            seed.child(stream=f"jumps:{i}").generator(), spec, horizon
        )
        times.append(t)
        sizes.append(s)
    return JumpPath(tuple(times), tuple(sizes), horizon)


def sample_reset_times_from(
    rng: np.random.Generator | None, rate_or_schedule, horizon: float
) -> np.ndarray:
    """As :func:`sample_reset_times`, drawing from an existing generator.

    Explicit schedules consume no randomness.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if np.ndim(rate_or_schedule) > 0:
        sched = np.unique(np.asarray(rate_or_schedule, dtype=float))
        return sched[(sched > 0) & (sched <= horizon)]
    rate = float(rate_or_schedule)
    if rate < 0:
        raise ValueError("reset rate must be nonnegative")
    if rate == 0.0:
        return np.empty(0)
    count = int(rng.poisson(rate * horizon))
    return _sorted_uniform_times(rng, count, horizon)


def sample_reset_times(rate_or_schedule, horizon: float, seed: SeedSpec) -> np.ndarray:
    """Poisson reset times at a given rate, or an explicit schedule.

    Schedules are sorted, deduplicated and clipped to (0, horizon].
    """
    rng = seed.generator() if np.ndim(rate_or_schedule) == 0 else None
    return sample_reset_times_from(rng, rate_or_schedule, horizon)


def wiener_increments(grid, dim: int, seed: SeedSpec) -> np.ndarray:
    """Independent N(0, dt) increments per interval of a strictly increasing grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must contain at least two time points")
    dt = np.diff(grid)
    if np.any(dt <= 0):
        raise ValueError("grid must be strictly increasing (no zero-length intervals)")
    if dim < 1:
        raise ValueError("dim must be positive")
    z = seed.generator().standard_normal((dt.size, dim))
    return z * np.sqrt(dt)[:, None]


def merge_events(
    jumps: JumpPath | None, resets: Iterable[float], grid ) -> list[Event]:
    """Merge jumps, resets and grid samples into one sorted timeline.

    Ties are broken deterministically: grid-sample < jump (by component
    index) < reset, so a reset that coincides with a jump acts on the
    post-jump value, matching the left-limit convention.
    """
    events: list[Event] = [Event(float(t), "grid") for t in np.asarray(grid, dtype=float)]
    if jumps is not None:
        for comp, (times, sizes) in enumerate(zip(jumps.times, jumps.sizes)):
            events.extend(
                Event(float(t), "jump", component=comp, size=float(s))
                for t, s in zip(times, sizes)
            )
    events.extend(Event(float(t), "reset") for t in resets)
    events.sort(
        key=lambda e: (e.time, _EVENT_RANK[e.kind], e.component if e.component is not None else -1)
    )
    return events
