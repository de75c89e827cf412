"""Moment reports, the statistical boundedness verdict, and file writers.

``sup over all t`` of a moment curve is not computable from a finite run;
the operational surrogate compares the mean of a late window against the
mean of a middle window with a 3-sigma margin, and reports say so.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

BOUNDED = "bounded-consistent"
GROWTH = "growth-detected"
INCONCLUSIVE = "inconclusive"

MOMENTS_HEADER = "t,q,v_moment,v_se,x_moment,x_se"


@dataclass(frozen=True)
class BoundednessVerdict:
    verdict: str
    middle_mean: float
    last_mean: float
    pooled_se: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "middle_window_mean": self.middle_mean,
            "last_window_mean": self.last_mean,
            "pooled_se": self.pooled_se,
        }


def boundedness_test(
    times,
    estimates,
    ses,
    *,
    window_fraction: float = 0.25,
    burn_in: float = 0.2,
) -> BoundednessVerdict:
    """Trend surrogate for sup-boundedness of a time-indexed moment curve.

    After dropping the burn-in fraction of the horizon, the mean over the
    last window is compared with the mean over a same-sized middle window:
    growth is declared when it exceeds the middle mean by more than three
    pooled standard errors; the verdict is inconclusive when the pooled
    standard error swamps the middle mean (no information either way).
    """
    times = np.asarray(times, dtype=float)
    estimates = np.asarray(estimates, dtype=float)
    ses = np.asarray(ses, dtype=float)
    if not 0 < window_fraction < 0.5:
        raise ValueError("window_fraction must lie in (0, 0.5)")
    keep = times >= burn_in * times[-1]
    if int(np.sum(keep)) < 10:
        raise ValueError("need at least 10 grid points beyond the burn-in fraction")
    est = estimates[keep]
    se = ses[keep]
    k = est.size
    w = max(2, int(window_fraction * k))
    last = slice(k - w, k)
    mid_start = max(0, (k - w) // 2)
    mid = slice(mid_start, mid_start + w)

    if not (np.all(np.isfinite(est)) and np.all(np.isfinite(se))):
        return BoundednessVerdict(GROWTH, float("nan"), float("nan"), float("nan"))
    mid_mean = float(np.mean(est[mid]))
    last_mean = float(np.mean(est[last]))
    se_mid = float(np.sqrt(np.sum(se[mid] ** 2))) / w
    se_last = float(np.sqrt(np.sum(se[last] ** 2))) / w
    pooled = float(np.hypot(se_mid, se_last))
    if last_mean > mid_mean + 3.0 * pooled:
        verdict = GROWTH
    elif pooled > 0.5 * abs(mid_mean):
        verdict = INCONCLUSIVE
    else:
        verdict = BOUNDED
    return BoundednessVerdict(verdict, mid_mean, last_mean, pooled)


@dataclass
class MomentReport:
    """Per (t, q) Monte Carlo estimates of E[V_t^q] and E[|X_t|^q] with SEs."""

    times: np.ndarray
    q_orders: list[int]
    v_mean: np.ndarray  # (len(q_orders), len(times))
    v_se: np.ndarray
    x_mean: np.ndarray
    x_se: np.ndarray
    n_paths: int
    verdicts: dict[int, BoundednessVerdict] = field(default_factory=dict)
    reset_count: int = 0
    reset_max_xi: float | None = None
    slow_sq_max: float | None = None

    def run_verdicts(self, window_fraction: float = 0.25, burn_in: float = 0.2) -> None:
        for i, q in enumerate(self.q_orders):
            self.verdicts[q] = boundedness_test(
                self.times,
                self.v_mean[i],
                self.v_se[i],
                window_fraction=window_fraction,
                burn_in=burn_in,
            )


def format_float(x: float) -> str:
    return repr(float(x))


def write_moments_csv(path, report: MomentReport) -> None:
    lines = [MOMENTS_HEADER]
    for gi, t in enumerate(report.times):
        for qi, q in enumerate(report.q_orders):
            lines.append(
                ",".join(
                    [
                        format_float(t),
                        str(q),
                        format_float(report.v_mean[qi, gi]),
                        format_float(report.v_se[qi, gi]),
                        format_float(report.x_mean[qi, gi]),
                        format_float(report.x_se[qi, gi]),
                    ]
                )
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_trajectory_csv(path, rows: list[tuple[float, np.ndarray, str]], n: int) -> None:
    """Rows are (t, state vector, event tag); grid samples carry an empty tag."""
    header = "t," + ",".join(f"X_{i + 1}" for i in range(n)) + ",event"
    lines = [header]
    for t, x, tag in rows:
        lines.append(
            ",".join([format_float(t)] + [format_float(v) for v in np.ravel(x)] + [tag])
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_drift_csv(path, drift_report) -> None:
    """Per-interval margin summary of a pathwise drift-inequality report."""
    lines = ["t_start,t_end,margin,passed"]
    for r in drift_report.intervals:
        lines.append(
            f"{format_float(r.t_start)},{format_float(r.t_end)},"
            f"{format_float(r.margin)},{int(r.passed)}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
