import math

import numpy as np
import pytest

from levyhybrid.certificates import ParametricFamily, parametric_certificate
from levyhybrid.errors import ContainmentError
from levyhybrid.hybrid import (
    ResetSpec,
    ThetaProcessSpec,
    mean_reverting_theta,
    simulate_parameter_reset,
    simulate_parameter_varying,
    simulate_state_reset,
    system_at,
)
from levyhybrid.measures import AtomLaw, LevyMeasureSpec, NormalLaw
from levyhybrid.sampling import SeedSpec
from levyhybrid.sde import SystemMatrices, simulate_ti

NORMAL_NOISE = [LevyMeasureSpec(1.0, NormalLaw(1.0))]
NO_NOISE = [LevyMeasureSpec(0.0, AtomLaw((1.0,), (1.0,)))]


def scalar_family(b=1.0, c=0.0):
    return ParametricFamily(
        a=lambda th: np.array([[-th[0]]]),
        b=lambda th: np.array([[b]]),
        c=lambda th: np.array([[c]]),
        lower=[1.0],
        upper=[2.0],
        theta0=[2.0],
        scalar_forms=(lambda t: -t, lambda t, v=b: v, lambda t, v=c: v),
    )


def companion_family():
    def a_fn(th):
        return np.array([[0.0, 1.0], [-th[1], -th[0]]])

    return ParametricFamily(
        a=a_fn,
        b=lambda th: np.array([[0.0], [1.0]]),
        c=lambda th: np.zeros((2, 1)),
        lower=[2.0, 1.0],
        upper=[4.0, 3.0],
        theta0=[3.0, 2.0],
    )


def test_degenerate_delta_reproduces_time_invariant_bits():
    fam = scalar_family()
    tspec = mean_reverting_theta(fam, delta=0.0)
    grid = np.linspace(0.0, 5.0, 11)
    traj, theta = simulate_parameter_varying(
        fam, tspec, NORMAL_NOISE, [1.0], 5.0, grid, 0.05, SeedSpec(7)
    )
    ti = simulate_ti(system_at(fam, fam.theta0), NORMAL_NOISE, [1.0], 5.0, grid, SeedSpec(7))
    assert np.array_equal(traj.states, ti.states)
    assert np.all(theta.values == 2.0)


def test_theta_stays_in_box_and_slow_bound_holds():
    fam = scalar_family()
    tspec = mean_reverting_theta(fam, delta=0.01, kappa=2.0, sigma_scale=0.5)
    grid = np.linspace(0.0, 10.0, 21)
    from levyhybrid.hybrid import HybridStreams, run_hybrid_path

    for path in range(5):
        streams = HybridStreams.from_seed(SeedSpec(12, path), 1)
        res = run_hybrid_path(
            fam, tspec, NORMAL_NOISE, [1.0], 10.0, grid, 0.02, streams
        )
        assert np.all(res.theta_states >= 1.0) and np.all(res.theta_states <= 2.0)
        assert res.slow_sq_max < 0.01


def test_scalar_and_generic_paths_agree():
    # the float fast path and the ndarray path must implement one law
    fam_fast = scalar_family(b=1.0, c=0.5)
    fam_slow = ParametricFamily(
        a=fam_fast.a, b=fam_fast.b, c=fam_fast.c,
        lower=fam_fast.lower, upper=fam_fast.upper, theta0=fam_fast.theta0,
        scalar_forms=None,
    )
    grid = np.linspace(0.0, 3.0, 7)
    out = []
    for fam in (fam_fast, fam_slow):
        tspec = mean_reverting_theta(fam, delta=0.02, kappa=1.0, sigma_scale=0.05)
        traj, theta = simulate_parameter_varying(
            fam, tspec, NORMAL_NOISE, [1.0], 3.0, grid, 0.05, SeedSpec(31)
        )
        out.append((traj.states.copy(), theta.values.copy()))
    np.testing.assert_allclose(out[0][0], out[1][0], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(out[0][1], out[1][1], rtol=1e-12, atol=1e-12)


def test_decay_envelope_worst_case_theta():
    # A(theta) = -theta <= -1 on the box, no noise: |X_t| <= |X_0| e^{-t}
    fam = scalar_family()
    tspec = mean_reverting_theta(fam, delta=1e-4, kappa=1.0)
    grid = np.linspace(0.0, 5.0, 11)
    traj, _ = simulate_parameter_varying(fam, tspec, NO_NOISE, [1.0], 5.0, grid, 0.01, SeedSpec(3))
    envelope = np.exp(-grid) * (1.0 + 1e-8)
    assert np.all(np.abs(traj.states.ravel()) <= envelope)


def test_step_halving_self_convergence():
    # deterministic theta drift, no noise anywhere: global stepping error O(h)
    fam = companion_family()
    tspec = ThetaProcessSpec(
        drift=lambda t, th: 0.09 * np.array([math.sin(t), math.cos(t)]),
        diffusion=lambda t, th: np.zeros((2, 2)),
        jump_gain=lambda t, th: np.zeros(2),
        delta=0.01,
        wiener_dim=2,
    )
    grid = np.array([0.0, 1.0, 2.0])
    states = {}
    for h in (0.2, 0.1, 0.05):
        traj, _ = simulate_parameter_varying(
            fam, tspec, [LevyMeasureSpec(0.0, NormalLaw(1.0))], [1.0, 0.0], 2.0, grid, h, SeedSpec(1)
        )
        states[h] = traj.states
    e1 = np.max(np.abs(states[0.2] - states[0.1]))
    e2 = np.max(np.abs(states[0.1] - states[0.05]))
    assert e2 < e1
    assert 1.3 <= e1 / e2 <= 3.5  # first-order self-convergence


def test_containment_fail_mode_raises():
    fam = scalar_family()
    tspec = ThetaProcessSpec(
        drift=lambda t, th: np.array([-10.0]),  # pushes theta below the box
        diffusion=lambda t, th: np.zeros((1, 1)),
        jump_gain=lambda t, th: np.zeros(1),
        delta=1e6,
        containment="fail",
    )
    with pytest.raises(ContainmentError):
        simulate_parameter_varying(
            fam, tspec, NO_NOISE, [1.0], 5.0, np.array([0.0, 5.0]), 0.1, SeedSpec(2)
        )


def test_parameter_reset_rate_zero_matches_varying():
    fam = scalar_family()
    cert = parametric_certificate(fam)
    tspec = mean_reverting_theta(fam, delta=0.01, kappa=1.0, sigma_scale=0.05)
    grid = np.linspace(0.0, 5.0, 11)
    reset = ResetSpec("parameter", rate=0.0)
    traj_r, theta_r, log = simulate_parameter_reset(
        fam, tspec, reset, NORMAL_NOISE, [1.0], 5.0, grid, 0.05, SeedSpec(21), cert
    )
    traj_v, theta_v = simulate_parameter_varying(
        fam, tspec, NORMAL_NOISE, [1.0], 5.0, grid, 0.05, SeedSpec(21)
    )
    assert not log
    np.testing.assert_array_equal(traj_r.states, traj_v.states)
    np.testing.assert_array_equal(theta_r.values, theta_v.values)


def test_parameter_reset_schedule_snaps_theta_to_base():
    fam = scalar_family()
    cert = parametric_certificate(fam)
    tspec = mean_reverting_theta(fam, delta=0.05, kappa=3.0)  # drifts toward center 1.5
    grid = np.array([0.0, 1.0, 1.0005, 2.0])
    reset = ResetSpec("parameter", schedule=np.array([1.0]))
    _, theta, log = simulate_parameter_reset(
        fam, tspec, reset, NO_NOISE, [1.0], 2.0, grid, 0.01, SeedSpec(5), cert
    )
    assert len(log) == 1 and log[0].time == 1.0
    assert log[0].theta_minus[0] < 2.0  # had drifted away before the reset
    assert theta.values[1, 0] == log[0].theta_minus[0]  # grid sees the left limit
    assert theta.values[2, 0] == pytest.approx(2.0, abs=1e-3)


def test_parameter_reset_xi_nonpositive_companion():
    fam = companion_family()
    cert = parametric_certificate(fam, grid_points=5)
    tspec = mean_reverting_theta(fam, delta=0.02, kappa=0.5, sigma_scale=0.05)
    reset = ResetSpec("parameter", rate=5.0)
    noise = [LevyMeasureSpec(1.0, NormalLaw(1.0))]
    records = []
    for path in range(10):
        _, _, log = simulate_parameter_reset(
            fam, tspec, reset, noise, [1.0, 0.0], 25.0, np.array([0.0, 25.0]), 0.05,
            SeedSpec(1001, path), cert, q=2.0,
        )
        records.extend(log)
    assert len(records) >= 1000
    assert max(r.xi for r in records) <= 1e-12
    assert min(r.xi for r in records) < 0.0  # the ordering is not vacuous here


def test_state_reset_noop_when_state_at_target():
    system = SystemMatrices([[-1.0]], [[1.0]], [[0.0]])
    reset = ResetSpec("state", schedule=np.array([0.5]))
    traj, log = simulate_state_reset(
        system, reset, NO_NOISE, [0.0], 1.0, np.array([0.0, 1.0]), SeedSpec(3)
    )
    assert len(log) == 1
    assert log[0][1][0] == 0.0
    assert np.all(traj.states == 0.0)


def test_state_reset_rapid_schedule_growth_bound():
    system = SystemMatrices([[-1.0]], [[1.0]], [[0.0]])
    schedule = np.arange(0.01, 1.0, 0.01)
    reset = ResetSpec("state", schedule=schedule)
    traj, _ = simulate_state_reset(
        system, reset, NO_NOISE, [1.0], 1.0, np.linspace(0, 1, 101), SeedSpec(4)
    )
    factor = math.exp(1.0 * 0.01)  # ||A|| times the reset spacing
    assert np.all(traj.states >= 1.0 / factor - 1e-12)
    assert np.all(traj.states <= 1.0 + 1e-12)


def test_state_reset_warns_on_unstable_system():
    system = SystemMatrices([[0.5]], [[1.0]], [[0.0]])
    reset = ResetSpec("state", rate=4.0)
    with pytest.warns(UserWarning, match="non-Hurwitz"):
        simulate_state_reset(
            system, reset, NO_NOISE, [1.0], 1.0, np.array([0.0, 1.0]), SeedSpec(5)
        )


def test_reset_spec_validation():
    with pytest.raises(ValueError):
        ResetSpec("parameter")
    with pytest.raises(ValueError):
        ResetSpec("bogus", rate=1.0)
    with pytest.raises(ValueError):
        simulate_state_reset(
            SystemMatrices([[-1.0]], [[1.0]], [[0.0]]),
            ResetSpec("parameter", rate=1.0),
            NO_NOISE,
            [1.0],
            1.0,
            np.array([1.0]),
            SeedSpec(1),
        )
