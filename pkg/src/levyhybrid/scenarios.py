"""Declarative scenario configs: validation, typed construction, templates.

Configs are plain JSON objects (diffable, hashable); every mode has a
committed example under ``configs/``. Validation errors carry the offending
key path so the CLI can point at the exact field.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .certificates import ParametricFamily
from .errors import ConfigError
from .hybrid import ResetSpec, ThetaProcessSpec, mean_reverting_theta
from .measures import (
    AtomLaw,
    CauchyLaw,
    ContinuousDensity,
    LevyMeasureSpec,
    NormalLaw,
    PolynomialSpec,
    truncate,
    two_point,
)
from .sde import SystemMatrices

MODES = {
    "ti": "time-invariant linear system driven by compound-Poisson + Wiener noise",
    "desoer": "slowly varying parameters (stochastic Desoer regime)",
    "param_reset": "slowly varying parameters with resets to theta0",
    "state_reset": "constant system with state resets to X0 (conjecture evidence)",
    "oracle_prodexp": "multiplicative jump functional vs. its closed-form expectation",
    "oracle_discounted": "discounted jump sum vs. its closed-form expectation",
}

_STATE_MODES = ("ti", "desoer", "param_reset", "state_reset")
_DEFAULT_ASSERTIONS = {
    "ti": ["bounded"],
    "desoer": ["bounded"],
    "param_reset": ["bounded", "reset_xi_nonpositive"],
    "state_reset": ["bounded"],
    "oracle_prodexp": ["oracle_within_3se"],
    "oracle_discounted": ["oracle_within_3se"],
}
_KNOWN_ASSERTIONS = {
    "bounded",
    "reset_xi_nonpositive",
    "oracle_within_3se",
    "stationary_within_3se",
}


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    return config


def _req(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"missing required key '{path}.{key}'" if path else f"missing required key '{key}'")
    return d[key]


def _number(value, path: str, *, positive=False, nonnegative=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{path}' must be a number")
    out = float(value)
    if not math.isfinite(out):
        raise ConfigError(f"'{path}' must be finite")
    if positive and out <= 0:
        raise ConfigError(f"'{path}' must be positive")
    if nonnegative and out < 0:
        raise ConfigError(f"'{path}' must be nonnegative")
    return out


def _int(value, path: str, *, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{path}' must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"'{path}' must be >= {minimum}")
    return value


def _matrix(value, path: str) -> np.ndarray:
    try:
        out = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{path}' must be a numeric matrix: {exc}") from exc
    if out.ndim != 2 or not np.all(np.isfinite(out)):
        raise ConfigError(f"'{path}' must be a finite 2-d matrix")
    return out


def _vector(value, path: str) -> np.ndarray:
    try:
        out = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{path}' must be a numeric vector: {exc}") from exc
    if out.ndim != 1 or not np.all(np.isfinite(out)):
        raise ConfigError(f"'{path}' must be a finite 1-d vector")
    return out


# -- noise ------------------------------------------------------------------

_DENSITIES = ("uniform", "gaussian", "cauchy")


def _density_from_config(d: dict, path: str) -> ContinuousDensity:
    name = _req(d, "name", path)
    if name == "uniform":
        height = _number(d.get("height", 1.0), f"{path}.height", positive=True)
        radius = _number(_req(d, "radius", path), f"{path}.radius", positive=True)
        return ContinuousDensity(
            fn=lambda x, h=height: h, support=(-radius, radius), label="uniform"
        )
    if name == "gaussian":
        mass = _number(d.get("mass", 1.0), f"{path}.mass", positive=True)
        std = _number(d.get("std", 1.0), f"{path}.std", positive=True)
        norm = mass / (std * math.sqrt(2.0 * math.pi))
        return ContinuousDensity(
            fn=lambda x, n=norm, s=std: n * math.exp(-0.5 * (x / s) ** 2),
            support=(-math.inf, math.inf),
            tail_power=None,
            label="gaussian",
        )
    if name == "cauchy":
        mass = _number(d.get("mass", 1.0), f"{path}.mass", positive=True)
        scale = _number(d.get("scale", 1.0), f"{path}.scale", positive=True)
        return ContinuousDensity(
            fn=lambda x, m=mass, s=scale: m * s / (math.pi * (s * s + x * x)),
            support=(-math.inf, math.inf),
            tail_power=2.0,
            label="cauchy",
        )
    raise ConfigError(f"'{path}.name' must be one of {_DENSITIES}")


def noise_spec_from_config(d: Any, path: str) -> LevyMeasureSpec:
    if not isinstance(d, dict):
        raise ConfigError(f"'{path}' must be an object")
    kind = _req(d, "kind", path)
    if kind == "truncated_density":
        eps = _number(_req(d, "epsilon", path), f"{path}.epsilon", positive=True)
        density = _density_from_config(_req(d, "density", path), f"{path}.density")
        return truncate(density, eps)
    rate = _number(_req(d, "rate", path), f"{path}.rate", nonnegative=True)
    try:
        if kind == "atoms":
            law = AtomLaw(
                tuple(_vector(_req(d, "locations", path), f"{path}.locations")),
                tuple(_vector(_req(d, "weights", path), f"{path}.weights")),
            )
        elif kind == "normal":
            law = NormalLaw(_number(_req(d, "variance", path), f"{path}.variance", positive=True))
        elif kind == "two_point":
            law = two_point(_number(_req(d, "a", path), f"{path}.a", positive=True))
        elif kind == "cauchy":
            law = CauchyLaw(_number(d.get("scale", 1.0), f"{path}.scale", positive=True))
        else:
            raise ConfigError(
                f"'{path}.kind' must be one of atoms|normal|two_point|cauchy|truncated_density"
            )
    except ValueError as exc:
        raise ConfigError(f"invalid jump law at '{path}': {exc}") from exc
    return LevyMeasureSpec(rate, law)


# -- families ---------------------------------------------------------------


def _scalar_gain_family(domain, theta0, b, c) -> ParametricFamily:
    scalar_forms = None
    if b.shape[1] == 1 and c.shape[1] <= 1:
        bv = float(b[0, 0])
        cv = float(c[0, 0]) if c.size else 0.0
        scalar_forms = (
            lambda th: -th,
            lambda th, v=bv: v,
            lambda th, v=cv: v,
        )
    return ParametricFamily(
        a=lambda th: np.array([[-th[0]]]),
        b=lambda th, m=b: m,
        c=lambda th, m=c: m,
        lower=domain[:, 0],
        upper=domain[:, 1],
        theta0=theta0,
        scalar_forms=scalar_forms,
    )


def _companion_family(domain, theta0, b, c) -> ParametricFamily:
    p = theta0.size

    def a_fn(th):
        a = np.zeros((p, p))
        a[:-1, 1:] = np.eye(p - 1)
        a[-1, :] = -th[::-1]
        return a

    return ParametricFamily(
        a=a_fn,
        b=lambda th, m=b: m,
        c=lambda th, m=c: m,
        lower=domain[:, 0],
        upper=domain[:, 1],
        theta0=theta0,
    )


_FAMILY_TEMPLATES = ("scalar_gain", "companion")


def family_from_config(d: dict, path: str) -> ParametricFamily:
    template = _req(d, "template", path)
    domain = _matrix(_req(d, "domain", path), f"{path}.domain")
    if domain.shape[1] != 2:
        raise ConfigError(f"'{path}.domain' must be a list of [lo, hi] pairs")
    theta0 = _vector(_req(d, "theta0", path), f"{path}.theta0")
    b = _matrix(_req(d, "b", path), f"{path}.b")
    c = _matrix(_req(d, "c", path), f"{path}.c")
    try:
        if template == "scalar_gain":
            if theta0.size != 1 or b.shape[0] != 1 or c.shape[0] != 1:
                raise ConfigError(f"'{path}': scalar_gain is one-dimensional in theta and state")
            return _scalar_gain_family(domain, theta0, b, c)
        if template == "companion":
            p = theta0.size
            if domain.shape[0] != p or b.shape[0] != p or c.shape[0] != p:
                raise ConfigError(f"'{path}': companion family needs n = p = {p} rows in b, c")
            return _companion_family(domain, theta0, b, c)
    except ValueError as exc:
        raise ConfigError(f"invalid family at '{path}': {exc}") from exc
    raise ConfigError(f"'{path}.template' must be one of {_FAMILY_TEMPLATES}")


# -- scenario ---------------------------------------------------------------


@dataclass
class HybridScenario:
    """Fully built experiment description, ready for the runner."""

    mode: str
    raw: dict
    digest: str
    master_seed: int
    n_paths: int
    horizon: float
    grid: np.ndarray
    q_orders: list[int]
    step: float
    burn_in: float
    window_fraction: float
    assertions: list[str]
    xi_tol: float
    noise: list[LevyMeasureSpec] = field(default_factory=list)
    system: SystemMatrices | None = None
    x0: np.ndarray | None = None
    family: ParametricFamily | None = None
    theta_spec: ThetaProcessSpec | None = None
    reset: ResetSpec | None = None
    cert_grid_points: int = 11
    cert_alpha_floor: float = 0.0
    oracle_poly: PolynomialSpec | None = None
    oracle_alpha: float | None = None

    @property
    def max_q(self) -> int:
        return max(self.q_orders) if self.q_orders else 2


def build_scenario(config: dict) -> HybridScenario:
    """Validate a config dict and build every typed object it describes."""
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    mode = _req(config, "mode", "")
    if mode not in MODES:
        raise ConfigError(f"'mode' must be one of {sorted(MODES)}")
    seed = _int(_req(config, "seed", ""), "seed", minimum=0)
    paths = _int(_req(config, "paths", ""), "paths", minimum=2)
    horizon = _number(_req(config, "horizon", ""), "horizon", positive=True)

    if "grid_times" in config:
        grid = _vector(config["grid_times"], "grid_times")
        if np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > horizon:
            raise ConfigError("'grid_times' must be increasing within [0, horizon]")
    else:
        points = _int(config.get("grid_points", 26), "grid_points", minimum=2)
        grid = np.linspace(0.0, horizon, points)

    q_orders = config.get("q_orders", [1, 2])
    if not isinstance(q_orders, list) or not q_orders:
        raise ConfigError("'q_orders' must be a non-empty list of integers")
    q_orders = [_int(q, "q_orders[*]", minimum=1) for q in q_orders]

    step = _number(config.get("step", 1e-3), "step", positive=True)
    burn_in = _number(config.get("burn_in", 0.2), "burn_in", nonnegative=True)
    window_fraction = _number(config.get("window_fraction", 0.25), "window_fraction", positive=True)
    assertions = config.get("assertions", _DEFAULT_ASSERTIONS[mode])
    if not isinstance(assertions, list) or any(a not in _KNOWN_ASSERTIONS for a in assertions):
        raise ConfigError(f"'assertions' entries must come from {sorted(_KNOWN_ASSERTIONS)}")
    tolerances = config.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ConfigError("'tolerances' must be an object")
    xi_tol = _number(tolerances.get("xi", 1e-12), "tolerances.xi", positive=True)

    scn = HybridScenario(
        mode=mode,
        raw=config,
        digest=config_digest(config),
        master_seed=seed,
        n_paths=paths,
        horizon=horizon,
        grid=grid,
        q_orders=q_orders,
        step=step,
        burn_in=burn_in,
        window_fraction=window_fraction,
        assertions=list(assertions),
        xi_tol=xi_tol,
    )

    noise_cfg = config.get("noise", [])
    if not isinstance(noise_cfg, list):
        raise ConfigError("'noise' must be a list of jump-noise objects")
    scn.noise = [noise_spec_from_config(d, f"noise[{i}]") for i, d in enumerate(noise_cfg)]

    if mode in ("ti", "state_reset"):
        sys_cfg = _req(config, "system", "")
        a = _matrix(_req(sys_cfg, "a", "system"), "system.a")
        b = _matrix(sys_cfg.get("b", np.zeros((a.shape[0], 0))), "system.b")
        c = _matrix(sys_cfg.get("c", np.zeros((a.shape[0], 0))), "system.c")
        try:
            scn.system = SystemMatrices(a, b, c)
        except ValueError as exc:
            raise ConfigError(f"invalid 'system': {exc}") from exc
        scn.x0 = _vector(_req(sys_cfg, "x0", "system"), "system.x0")
        if scn.x0.size != scn.system.n:
            raise ConfigError("'system.x0' dimension must match A")
        if len(scn.noise) != scn.system.l:
            raise ConfigError(
                f"'noise' must list {scn.system.l} components to match system.b"
            )

    if mode in ("desoer", "param_reset"):
        scn.family = family_from_config(_req(config, "family", ""), "family")
        fam_cfg = config["family"]
        scn.x0 = _vector(_req(fam_cfg, "x0", "family"), "family.x0")
        n = scn.family.a(scn.family.theta0).shape[0]
        if scn.x0.size != n:
            raise ConfigError("'family.x0' dimension must match A(theta)")
        if len(scn.noise) != np.asarray(scn.family.b(scn.family.theta0)).shape[1]:
            raise ConfigError("'noise' must match the family's jump-loading width")
        tp = config.get("theta_process", {})
        if not isinstance(tp, dict):
            raise ConfigError("'theta_process' must be an object")
        theta_noise = (
            noise_spec_from_config(tp["noise"], "theta_process.noise")
            if tp.get("noise") is not None
            else None
        )
        containment = tp.get("containment", "project")
        if containment not in ("project", "fail"):
            raise ConfigError("'theta_process.containment' must be 'project' or 'fail'")
        scn.theta_spec = mean_reverting_theta(
            scn.family,
            delta=_number(tp.get("delta", 0.0), "theta_process.delta", nonnegative=True),
            kappa=_number(tp.get("kappa", 1.0), "theta_process.kappa", nonnegative=True),
            sigma_scale=_number(
                tp.get("sigma_scale", 0.0), "theta_process.sigma_scale", nonnegative=True
            ),
            jump_scale=_number(
                tp.get("jump_scale", 0.0), "theta_process.jump_scale", nonnegative=True
            ),
            noise=theta_noise,
            containment=containment,
            clip_jump_gain=bool(tp.get("clip_jump_gain", True)),
        )

    if mode in ("param_reset", "state_reset"):
        reset_cfg = _req(config, "reset", "")
        if not isinstance(reset_cfg, dict):
            raise ConfigError("'reset' must be an object")
        rate = reset_cfg.get("rate")
        schedule = reset_cfg.get("schedule")
        if rate is None and schedule is None:
            raise ConfigError("'reset' needs a 'rate' or a 'schedule'")
        try:
            scn.reset = ResetSpec(
                mode="parameter" if mode == "param_reset" else "state",
                rate=None if rate is None else _number(rate, "reset.rate", nonnegative=True),
                schedule=None if schedule is None else _vector(schedule, "reset.schedule"),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid 'reset': {exc}") from exc

    cert_cfg = config.get("certificate", {})
    if not isinstance(cert_cfg, dict):
        raise ConfigError("'certificate' must be an object")
    scn.cert_grid_points = _int(cert_cfg.get("grid_points", 11), "certificate.grid_points", minimum=2)
    scn.cert_alpha_floor = _number(
        cert_cfg.get("alpha_floor", 0.0), "certificate.alpha_floor", nonnegative=True
    )

    if mode.startswith("oracle_"):
        oracle_cfg = _req(config, "oracle", "")
        f_cfg = _req(oracle_cfg, "f", "oracle")
        if not isinstance(f_cfg, dict) or not f_cfg:
            raise ConfigError("'oracle.f' must map powers to coefficients")
        try:
            powers = {int(k): _number(v, f"oracle.f[{k}]") for k, v in f_cfg.items()}
            scn.oracle_poly = PolynomialSpec.univariate(powers)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"invalid 'oracle.f': {exc}") from exc
        if mode == "oracle_discounted":
            scn.oracle_alpha = _number(
                _req(oracle_cfg, "alpha", "oracle"), "oracle.alpha", positive=True
            )
        if len(scn.noise) != 1:
            raise ConfigError("oracle modes use exactly one noise component")

    return scn
