"""Scenario execution: chunked Monte Carlo pipelines, assertions, reports.

Replications are processed in fixed-size chunks whose streams derive from
(master seed, chunk index), and chunk results are reduced in chunk order, so
output files are byte-identical across reruns and worker counts. Worker
processes rebuild the scenario from the config JSON in an initializer; no
callables ever cross process boundaries.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import certify, parametric_certificate, spectral_abscissa
from .drift import lyapunov_values
from .engine import ExactTransitionEngine
from .errors import DivergentMomentError, InstabilityError, PreconditionError
from .hybrid import HybridStreams, run_hybrid_path, system_at
from .measures import moment_condition_check, polynomial_jump_integral
from .oracles import discounted_jump_sum_expectation, prod_exp_expectation
from .reporting import (
    BOUNDED,
    MomentReport,
    write_moments_csv,
    write_report_json,
    write_trajectory_csv,
)
from .sampling import JumpPath, SeedSpec, merge_events, sample_compound_poisson_from
from .scenarios import HybridScenario, build_scenario, load_config
from .sde import run_event_driven_path

CHUNK_SIZE = 250
WORKERS_ENV = "LEVYHYBRID_WORKERS"

TRAJECTORY_CSV = "trajectory_sample.csv"
MOMENTS_CSV = "moments.csv"
REPORT_JSON = "report.json"

_CLAIM_STATUS = {
    "ti": "statistical surrogate for a proved moment-boundedness theorem",
    "desoer": "statistical surrogate for a proved moment-boundedness theorem",
    "param_reset": "statistical surrogate for a proved moment-boundedness theorem",
    "state_reset": (
        "empirical evidence only: boundedness under state resetting is an open "
        "conjecture and no proof is claimed"
    ),
    "oracle_prodexp": "Monte Carlo check of an exact expectation identity",
    "oracle_discounted": "Monte Carlo check of an exact expectation identity",
}


@dataclass
class RunResult:
    exit_code: int
    report: dict
    out_dir: Path


def _worker_count(explicit: int | None) -> int:
    if explicit is not None:
        return max(1, explicit)
    env = os.environ.get(WORKERS_ENV, "").strip()
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Pipeline setup (per process) and per-chunk work
# ---------------------------------------------------------------------------


def _pipeline_setup(scn: HybridScenario) -> dict:
    """Deterministic heavy objects shared by every chunk of one scenario."""
    setup: dict = {"mode": scn.mode}
    if scn.mode == "desoer" and scn.theta_spec.is_degenerate:
        # delta = 0 freezes theta: the run *is* the time-invariant system at
        # theta0, bit for bit, so reuse that pipeline wholesale.
        setup["mode"] = "ti"
        scn = _frozen_scenario(scn)
        setup["scenario"] = scn
    if setup["mode"] in ("ti", "state_reset"):
        setup["engine"] = ExactTransitionEngine(scn.system.a, scn.system.c)
        try:
            cert = certify(scn.system.a)
            setup["p"] = cert.p
            setup["certificate"] = {"alpha": cert.alpha, "residual": cert.residual}
        except InstabilityError:
            if scn.mode != "state_reset":
                raise
            setup["p"] = np.eye(scn.system.n)
            setup["certificate"] = {"alpha": None, "residual": None, "uncertified": True}
    elif setup["mode"] in ("desoer", "param_reset"):
        cert = parametric_certificate(
            scn.family, alpha_floor=scn.cert_alpha_floor, grid_points=scn.cert_grid_points
        )
        setup["cert"] = cert
        setup["certificate"] = {
            "uniform_alpha": cert.alpha,
            "base_residual": cert.base.residual,
            "grid_points": cert.grid_points,
        }
        # scalar systems rescale every pointwise solve to P = [[1]], so the
        # evaluator is constant and the moment loop can skip it
        n = scn.family.a(scn.family.theta0).shape[0]
        setup["p_const"] = np.array([[1.0]]) if n == 1 else None
    elif setup["mode"] == "oracle_prodexp":
        oracle = prod_exp_expectation(scn.noise[0], scn.oracle_poly, scn.horizon)
        setup["oracle_curve"] = np.array(
            [prod_exp_expectation(scn.noise[0], scn.oracle_poly, t).value for t in scn.grid]
        )
        setup["oracle"] = oracle
    elif setup["mode"] == "oracle_discounted":
        oracle = discounted_jump_sum_expectation(
            scn.noise[0], scn.oracle_poly, scn.oracle_alpha, scn.horizon
        )
        setup["oracle_curve"] = np.array(
            [
                discounted_jump_sum_expectation(
                    scn.noise[0], scn.oracle_poly, scn.oracle_alpha, t
                ).value
                for t in scn.grid
            ]
        )
        setup["oracle"] = oracle
    return setup


def _frozen_scenario(scn: HybridScenario) -> HybridScenario:
    import copy

    frozen = copy.copy(scn)
    frozen.system = system_at(scn.family, scn.family.theta0)
    frozen.x0 = scn.x0
    return frozen


def _chunk_streams(scn: HybridScenario, chunk_index: int) -> HybridStreams:
    base = SeedSpec(scn.master_seed, path=chunk_index)
    return HybridStreams.from_seed(base, len(scn.noise))


def _sample_jumps(streams: HybridStreams, scn: HybridScenario) -> JumpPath:
    times, sizes = [], []
    for i, spec in enumerate(scn.noise):
        t, s = sample_compound_poisson_from(streams.jumps[i], spec, scn.horizon)
        times.append(t)
        sizes.append(s)
    return JumpPath(tuple(times), tuple(sizes), scn.horizon)


def _trajectory_rows(grid, states, events) -> list:
    rows = [(float(t), np.asarray(x), "") for t, x in zip(grid, states)]
    for ev in events:
        tag = f"jump:{ev.component}" if ev.kind == "jump" else ev.kind
        rows.append((ev.time, np.asarray(ev.x_after), tag))
    rows.sort(key=lambda r: r[0])
    return rows


def _new_accumulator(scn: HybridScenario) -> dict:
    nq, ng = len(scn.q_orders), scn.grid.size
    return {
        "v_sum": np.zeros((nq, ng)),
        "v_sq": np.zeros((nq, ng)),
        "x_sum": np.zeros((nq, ng)),
        "x_sq": np.zeros((nq, ng)),
        "n": 0,
        "reset_count": 0,
        "xi_max": None,
        "slow_sq_max": 0.0,
        "exemplar": None,
    }


def _accumulate_moments(acc: dict, scn: HybridScenario, states: np.ndarray, p_grid) -> None:
    """Add one path's V^q and |X|^q grid values into the running sums.

    ``p_grid`` is either a constant P matrix or a per-grid-point list.
    """
    norms = np.linalg.norm(states, axis=1)
    if isinstance(p_grid, np.ndarray):
        u = 1.0 + np.einsum("gi,ij,gj->g", states, p_grid, states)
    else:
        u = np.array([1.0 + x @ p @ x for x, p in zip(states, p_grid)])
    for qi, q in enumerate(scn.q_orders):
        v = u ** (q / 2.0)
        xq = norms**q
        acc["v_sum"][qi] += v
        acc["v_sq"][qi] += v * v
        acc["x_sum"][qi] += xq
        acc["x_sq"][qi] += xq * xq


def _run_chunk(scn: HybridScenario, setup: dict, chunk_index: int, count: int) -> dict:
    mode = setup["mode"]
    scn = setup.get("scenario", scn)
    acc = _new_accumulator(scn)
    streams = _chunk_streams(scn, chunk_index)
    want_exemplar = chunk_index == 0
    if mode in ("ti", "state_reset"):
        engine = setup["engine"]
        rng_w = streams.wiener if engine.has_noise else None
        reset_target = scn.x0 if mode == "state_reset" else None
        for i in range(count):
            jumps = _sample_jumps(streams, scn)
            resets = (
                scn.reset.times(scn.horizon, streams.resets) if mode == "state_reset" else ()
            )
            events = merge_events(jumps, resets, scn.grid)
            record = want_exemplar and i == 0
            states, elog, rlog = run_event_driven_path(
                engine,
                scn.system,
                events,
                scn.x0,
                scn.grid,
                rng_w,
                reset_target=reset_target,
                record_events=record,
            )
            _accumulate_moments(acc, scn, states, setup["p"])
            acc["reset_count"] += len(rlog)
            if record:
                acc["exemplar"] = _trajectory_rows(scn.grid, states, elog)
        acc["n"] = count
    elif mode in ("desoer", "param_reset"):
        cert = setup["cert"]
        p_const = setup["p_const"]
        for i in range(count):
            record = want_exemplar and i == 0
            res = run_hybrid_path(
                scn.family,
                scn.theta_spec,
                scn.noise,
                scn.x0,
                scn.horizon,
                scn.grid,
                scn.step,
                streams,
                reset=scn.reset if mode == "param_reset" else None,
                certificate=cert,
                q=2.0,
                record_events=record,
            )
            if p_const is not None:
                p_grid = p_const
            else:
                p_grid = [cert.evaluate(th) for th in res.theta_states]
            _accumulate_moments(acc, scn, res.grid_states, p_grid)
            acc["slow_sq_max"] = max(acc["slow_sq_max"], res.slow_sq_max)
            if res.resets:
                acc["reset_count"] += len(res.resets)
                worst = max(r.xi for r in res.resets)
                acc["xi_max"] = worst if acc["xi_max"] is None else max(acc["xi_max"], worst)
            if record:
                acc["exemplar"] = _trajectory_rows(scn.grid, res.grid_states, res.events)
        acc["n"] = count
    else:  # oracle modes
        grid = scn.grid
        f = scn.oracle_poly
        for i in range(count):
            times, sizes = sample_compound_poisson_from(streams.jumps[0], scn.noise[0], scn.horizon)
            fv = np.asarray(f.evaluate(sizes), dtype=float)
            if mode == "oracle_prodexp":
                cum = np.concatenate([[1.0], np.cumprod(1.0 + fv)])
                vals = cum[np.searchsorted(times, grid, side="right")]
            else:
                alpha = scn.oracle_alpha
                mask = times[None, :] <= grid[:, None]
                vals = np.sum(
                    np.exp(-alpha * (grid[:, None] - times[None, :])) * fv[None, :] * mask,
                    axis=1,
                )
            acc["v_sum"][0] += vals
            acc["v_sq"][0] += vals * vals
            if want_exemplar and i == 0:
                rows = [(float(t), np.array([v]), "") for t, v in zip(grid, vals)]
                rows += [
                    (float(t), np.array([float("nan")]), "jump:0") for t in times
                ]
                rows.sort(key=lambda r: r[0])
                acc["exemplar"] = rows
        acc["n"] = count
    return acc


_WORKER_STATE: dict = {}


def _init_worker(config_json: str) -> None:
    scn = build_scenario(json.loads(config_json))
    _WORKER_STATE["scn"] = scn
    _WORKER_STATE["setup"] = _pipeline_setup(scn)


def _worker_chunk(args: tuple[int, int]) -> dict:
    chunk_index, count = args
    return _run_chunk(_WORKER_STATE["scn"], _WORKER_STATE["setup"], chunk_index, count)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def _reduce_chunks(scn: HybridScenario, chunks: list[dict]) -> dict:
    total = _new_accumulator(scn)
    for acc in chunks:  # fixed chunk order
        for key in ("v_sum", "v_sq", "x_sum", "x_sq"):
            total[key] += acc[key]
        total["n"] += acc["n"]
        total["reset_count"] += acc["reset_count"]
        if acc["xi_max"] is not None:
            total["xi_max"] = (
                acc["xi_max"] if total["xi_max"] is None else max(total["xi_max"], acc["xi_max"])
            )
        total["slow_sq_max"] = max(total["slow_sq_max"], acc["slow_sq_max"])
        if total["exemplar"] is None and acc["exemplar"] is not None:
            total["exemplar"] = acc["exemplar"]
    return total


def _moment_report(scn: HybridScenario, total: dict) -> MomentReport:
    n = total["n"]
    mean = total["v_sum"] / n
    var = np.maximum(total["v_sq"] - n * mean * mean, 0.0) / (n - 1)
    v_se = np.sqrt(var / n)
    x_mean = total["x_sum"] / n
    x_var = np.maximum(total["x_sq"] - n * x_mean * x_mean, 0.0) / (n - 1)
    x_se = np.sqrt(x_var / n)
    return MomentReport(
        times=scn.grid,
        q_orders=list(scn.q_orders),
        v_mean=mean,
        v_se=v_se,
        x_mean=x_mean,
        x_se=x_se,
        n_paths=n,
        reset_count=total["reset_count"],
        reset_max_xi=total["xi_max"],
        slow_sq_max=total["slow_sq_max"],
    )


def _required_moment_order(scn: HybridScenario) -> int:
    if scn.mode.startswith("oracle_"):
        return 2 * scn.oracle_poly.degree
    return 2 * scn.max_q


def check_preconditions(scn: HybridScenario) -> dict:
    """Machine-checked theorem hypotheses; failures carry the failing order."""
    order = _required_moment_order(scn)
    for i, spec in enumerate(scn.noise):
        cond = moment_condition_check(spec, order)
        if not cond.satisfied:
            raise PreconditionError(
                f"noise[{i}] violates the moment condition at order "
                f"{cond.failing_order} (orders up to {order} are required)"
            )
    if scn.mode.startswith("oracle_"):
        try:
            polynomial_jump_integral(scn.noise[0], scn.oracle_poly)
        except DivergentMomentError as exc:
            raise PreconditionError(f"oracle integrand not integrable: {exc}") from exc
    return {"moment_condition_order": order, "ok": True}


def _evaluate_assertions(scn: HybridScenario, setup: dict, report: MomentReport) -> list[dict]:
    out = []
    for name in scn.assertions:
        passed, detail = False, ""
        if name == "bounded":
            if report.verdicts:
                verdicts = {q: v.verdict for q, v in report.verdicts.items()}
                passed = all(v == BOUNDED for v in verdicts.values())
                detail = json.dumps(verdicts, sort_keys=True)
            else:
                detail = "no moment curve in this mode"
        elif name == "reset_xi_nonpositive":
            if report.reset_max_xi is None:
                detail = "no parameter resets were logged"
            else:
                passed = report.reset_max_xi <= scn.xi_tol
                detail = f"max xi {report.reset_max_xi:.3e} vs tol {scn.xi_tol:.1e} over {report.reset_count} resets"
        elif name == "oracle_within_3se":
            oracle = setup.get("oracle")
            if oracle is None:
                detail = "no oracle in this mode"
            else:
                mc = float(report.v_mean[0, -1])
                se = float(report.v_se[0, -1])
                delta = abs(mc - oracle.value)
                passed = delta <= 3.0 * se
                detail = f"|{mc:.6f} - {oracle.value:.6f}| = {delta:.2e} vs 3*SE = {3 * se:.2e}"
        elif name == "stationary_within_3se":
            from .oracles import stationary_covariance

            if scn.system is None or 2 not in scn.q_orders:
                detail = "requires a constant system and q=2"
            else:
                sigma = stationary_covariance(
                    scn.system.a, scn.system.b, scn.system.c, scn.noise
                )
                target = float(np.trace(sigma))
                mc = float(report.x_mean[scn.q_orders.index(2), -1])
                se = float(report.x_se[scn.q_orders.index(2), -1])
                delta = abs(mc - target)
                passed = delta <= 3.0 * se
                detail = f"|E|X|^2 - tr(Sigma)| = {delta:.2e} vs 3*SE = {3 * se:.2e}"
        out.append({"name": name, "passed": bool(passed), "detail": detail})
    return out


def run_scenario(
    config,
    out_dir,
    *,
    seed: int | None = None,
    paths: int | None = None,
    workers: int | None = None,
    quiet: bool = False,
) -> RunResult:
    """Execute a scenario config and write the report triple into ``out_dir``.

    Returns exit code 0 when every enabled assertion passes, 1 otherwise;
    config and precondition failures raise ConfigError / PreconditionError
    (the CLI maps those to exit codes 2 and 3).
    """
    if not isinstance(config, dict):
        config = load_config(config)
    config = dict(config)
    if seed is not None:
        config["seed"] = int(seed)
    if paths is not None:
        config["paths"] = int(paths)
    scn = build_scenario(config)
    preconditions = check_preconditions(scn)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    setup = _pipeline_setup(scn)
    eff_scn = setup.get("scenario", scn)

    chunks = [
        (ci, min(CHUNK_SIZE, scn.n_paths - ci * CHUNK_SIZE))
        for ci in range((scn.n_paths + CHUNK_SIZE - 1) // CHUNK_SIZE)
    ]
    n_workers = _worker_count(workers)
    if n_workers > 1 and len(chunks) > 1:
        config_json = json.dumps(config)
        with ProcessPoolExecutor(
            max_workers=n_workers, initializer=_init_worker, initargs=(config_json,)
        ) as pool:
            results = list(pool.map(_worker_chunk, chunks, chunksize=1))
    else:
        results = [_run_chunk(scn, setup, ci, cnt) for ci, cnt in chunks]
    total = _reduce_chunks(eff_scn, results)

    report = _moment_report(eff_scn, total)
    if not scn.mode.startswith("oracle_"):
        report.run_verdicts(scn.window_fraction, scn.burn_in)
    else:
        report.q_orders = [scn.oracle_poly.degree]
        report.x_mean = setup["oracle_curve"][None, :]
        report.x_se = np.zeros_like(report.x_mean)

    assertions = _evaluate_assertions(scn, setup, report)
    exit_code = 0 if all(a["passed"] for a in assertions) else 1

    n_state = total["exemplar"][0][1].size if total["exemplar"] else (eff_scn.x0.size if eff_scn.x0 is not None else 1)
    write_trajectory_csv(out_dir / TRAJECTORY_CSV, total["exemplar"] or [], n_state)
    write_moments_csv(out_dir / MOMENTS_CSV, report)

    payload = {
        "mode": scn.mode,
        "claim_status": _CLAIM_STATUS[scn.mode],
        "config_digest": scn.digest,
        "master_seed": scn.master_seed,
        "paths": scn.n_paths,
        "package_version": __version__,
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "preconditions": preconditions,
        "certificate": setup.get("certificate"),
        "moments": {
            str(q): v.to_dict() for q, v in report.verdicts.items()
        },
        "resets": {
            "count": report.reset_count,
            "max_xi": report.reset_max_xi,
        },
        "slow_variation_sq_max": report.slow_sq_max,
        "oracles": (
            [
                {
                    "formula": setup["oracle"].formula,
                    "input_digest": setup["oracle"].input_digest,
                    "value": setup["oracle"].value,
                    "mc_estimate": float(report.v_mean[0, -1]),
                    "mc_se": float(report.v_se[0, -1]),
                }
            ]
            if "oracle" in setup
            else []
        ),
        "assertions": assertions,
        "exit_code": exit_code,
    }
    write_report_json(out_dir / REPORT_JSON, payload)
    if not quiet:
        for a in assertions:
            status = "PASS" if a["passed"] else "FAIL"
            print(f"[{status}] {a['name']}: {a['detail']}")
    return RunResult(exit_code=exit_code, report=payload, out_dir=out_dir)
