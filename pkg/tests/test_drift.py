import math

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import random_spd, random_stable_matrix
from levyhybrid.certificates import certify
from levyhybrid.drift import (
    DriftConditionParams,
    doleans_exponential,
    jump_term_decomposition,
    lyapunov_value,
    lyapunov_values,
    reset_jump_xi,
    verify_drift_inequality,
    wiener_qv_rate,
)
from levyhybrid.measures import AtomLaw, LevyMeasureSpec, NormalLaw
from levyhybrid.sampling import SeedSpec
from levyhybrid.sde import SystemMatrices, simulate_ti

NO_NOISE = [LevyMeasureSpec(0.0, AtomLaw((1.0,), (1.0,)))]


def test_drift_condition_params_validation():
    DriftConditionParams(alpha=1.0)
    with pytest.raises(ValueError):
        DriftConditionParams(alpha=0.0)
    with pytest.raises(ValueError):
        DriftConditionParams(alpha=1.0, epsilon=1.5)


def test_lyapunov_value_examples():
    assert lyapunov_value([0.0, 0.0], np.eye(2), 2) == 1.0
    assert lyapunov_value([1.0, 1.0], np.eye(2), 2) == pytest.approx(3.0)
    assert lyapunov_value([1.0, 0.0], 2 * np.eye(2), 4) == pytest.approx(9.0)


def test_lyapunov_value_monotone_in_p(rng):
    for _ in range(200):
        n = int(rng.integers(1, 5))
        p2 = random_spd(rng, n)
        w = rng.standard_normal((n, n))
        p1 = p2 + w @ w.T  # p1 >= p2
        x = rng.standard_normal(n)
        q = float(rng.choice([1, 2, 4]))
        assert lyapunov_value(x, p1, q) >= lyapunov_value(x, p2, q) - 1e-12
        assert lyapunov_value(x, p2, q) >= 1.0


def test_lyapunov_values_vectorized_matches_scalar(rng):
    p = random_spd(rng, 3)
    states = rng.standard_normal((8, 3))
    vec = lyapunov_values(states, p, 4)
    ref = [lyapunov_value(x, p, 4) for x in states]
    np.testing.assert_allclose(vec, ref, rtol=1e-14)


def test_reset_jump_xi_examples(rng):
    p = random_spd(rng, 2)
    assert reset_jump_xi([1.0, 2.0], p, p, 2) == 0.0
    assert reset_jump_xi([1.0, 0.0], 2 * np.eye(2), np.eye(2), 2) == pytest.approx(-1.0)
    for _ in range(10_000 // 50):
        n = int(rng.integers(1, 4))
        p_zero = random_spd(rng, n)
        w = rng.standard_normal((n, n))
        p_minus = p_zero + w @ w.T
        for _ in range(50):
            x = rng.standard_normal(n) * rng.uniform(0.1, 3.0)
            assert reset_jump_xi(x, p_minus, p_zero, 2) <= 1e-14


# -- Doleans-Dade -----------------------------------------------------------------


def test_doleans_no_jumps_is_exponential():
    times = np.linspace(0.0, 2.0, 9)
    path = doleans_exponential(times, 1.5 * times, [])
    np.testing.assert_allclose(path.values, np.exp(1.5 * times), rtol=1e-14)
    assert path.positive


def test_doleans_single_jump_doubles():
    times = np.linspace(0.0, 1.0, 5)
    path = doleans_exponential(times, np.zeros_like(times), [(0.5, 1.0)])
    np.testing.assert_allclose(path.values, np.where(times >= 0.5, 2.0, 1.0), rtol=1e-14)


def test_doleans_jump_identity_random(rng):
    for _ in range(200):
        times = np.linspace(0.0, 3.0, 31)
        slope = rng.uniform(-1.0, 1.0)
        zc = slope * times
        n_jumps = int(rng.integers(1, 6))
        jumps = [
            (float(rng.uniform(0.05, 2.95)), float(rng.uniform(-0.5, 2.0)))
            for _ in range(n_jumps)
        ]
        path = doleans_exponential(times, zc, jumps)
        for t, v_minus, v_plus, dz in path.jumps:
            assert abs((v_plus - v_minus) - v_minus * dz) <= 1e-12 * max(1.0, abs(v_minus))


def test_doleans_flags_nonpositive_factor():
    times = np.linspace(0.0, 1.0, 3)
    path = doleans_exponential(times, np.zeros_like(times), [(0.5, -1.0)])
    assert not path.positive


def test_doleans_multiplicative_over_concatenation(rng):
    times = np.linspace(0.0, 2.0, 21)
    zc = 0.3 * times
    jumps = [(0.4, 0.5), (1.6, 0.25)]
    full = doleans_exponential(times, zc, jumps)
    first = doleans_exponential(times[:11], zc[:11], [jumps[0]])
    # restart from the first half's terminal value
    second = doleans_exponential(times[10:], zc[10:], [jumps[1]])
    np.testing.assert_allclose(full.values[10:], first.values[-1] * second.values, rtol=1e-12)


# -- drift inequality ---------------------------------------------------------------


def test_drift_inequality_scalar_closed_form():
    # dV/dt = -2(V-1) exactly for A=-1, P=1, q=2
    system = SystemMatrices([[-1.0]], [[1.0]], [[0.0]])
    traj = simulate_ti(system, NO_NOISE, [1.0], 2.0, np.linspace(0, 2, 5), SeedSpec(1))
    report = verify_drift_inequality(traj, np.eye(1), alpha=2.0, q=2, tol=1e-10)
    assert report.passed
    assert abs(report.worst_margin) <= 1e-10


def test_drift_inequality_certified_random_systems(rng):
    noise = [LevyMeasureSpec(1.5, NormalLaw(1.0))]
    for n in (2, 3, 4):
        a = random_stable_matrix(rng, n)
        cert = certify(a)
        system = SystemMatrices(a, rng.standard_normal((n, 1)), np.zeros((n, 1)))
        traj = simulate_ti(
            system, noise, rng.standard_normal(n), 5.0, np.linspace(0, 5, 11), SeedSpec(7, n)
        )
        report = verify_drift_inequality(traj, cert.p, cert.alpha, q=2, tol=1e-8)
        assert report.passed, report.worst_margin


def test_drift_inequality_sharpness_probe(rng):
    a = random_stable_matrix(rng, 3)
    cert = certify(a)
    system = SystemMatrices(a, np.zeros((3, 1)), np.zeros((3, 1)))
    # start along the worst direction of the inflated-alpha residual matrix
    r = cert.p @ a + a.T @ cert.p + 1.5 * cert.alpha * cert.p
    w, v = np.linalg.eigh(0.5 * (r + r.T))
    x0 = v[:, -1] * 2.0
    traj = simulate_ti(system, NO_NOISE, x0, 2.0, np.linspace(0, 2, 5), SeedSpec(2))
    good = verify_drift_inequality(traj, cert.p, cert.alpha, q=2, tol=1e-8)
    assert good.passed
    probe = verify_drift_inequality(traj, cert.p, 1.5 * cert.alpha, q=2, tol=1e-8)
    assert not probe.passed


def test_drift_margin_matches_finite_difference_oracle(rng):
    # independent route: numerically differentiate V along the matrix
    # exponential flow and compare with the reported quadratic-form margin
    a = random_stable_matrix(rng, 2)
    cert = certify(a)
    system = SystemMatrices(a, np.zeros((2, 1)), np.zeros((2, 1)))
    x0 = rng.standard_normal(2)
    traj = simulate_ti(system, NO_NOISE, x0, 1.0, np.array([0.0, 1.0]), SeedSpec(3))
    report = verify_drift_inequality(
        traj, cert.p, cert.alpha, q=2, tol=1e-8, samples_per_interval=2
    )
    h = 1e-6
    v = lambda t: lyapunov_value(expm(a * t) @ x0, cert.p, 2)

    def fd_margin(t):
        dvdt = (v(t + h) - v(t)) / h if t == 0.0 else (v(t) - v(t - h)) / h
        u = v(t)
        return (dvdt + cert.alpha * (u - 1.0)) / u

    worst_fd = max(fd_margin(0.0), fd_margin(1.0))
    assert abs(worst_fd - report.worst_margin) <= 1e-4


def test_drift_inequality_requires_wiener_free():
    system = SystemMatrices([[-1.0]], [[1.0]], [[1.0]])
    traj = simulate_ti(
        system,
        [LevyMeasureSpec(0.0, AtomLaw((1.0,), (1.0,)))],
        [1.0],
        1.0,
        np.array([0.0, 1.0]),
        SeedSpec(5),
    )
    with pytest.raises(ValueError):
        verify_drift_inequality(traj, np.eye(1), 2.0)


def test_wiener_qv_rate_bounded_by_gamma(rng):
    # scalar sanity value, then the general uniform bound q^2 lam_max(C'PC)
    assert wiener_qv_rate([1.0], np.eye(1), np.eye(1), q=2) == pytest.approx(1.0)
    p = random_spd(rng, 3)
    c = rng.standard_normal((3, 2))
    # gamma bound: q^2 * lam_max(P^{1/2} C C' P^{1/2}) since x'PCC'Px <= lam * U
    w, v = np.linalg.eigh(p)
    ph = (v * np.sqrt(w)) @ v.T
    gamma = 4.0 * np.linalg.eigvalsh(ph @ c @ c.T @ ph)[-1]
    for _ in range(100):
        x = rng.standard_normal(3) * rng.uniform(0.0, 5.0)
        assert wiener_qv_rate(x, p, c, q=2) <= gamma + 1e-10


# -- jump decomposition ----------------------------------------------------------------


def test_jump_decomposition_zero_jump(rng):
    p = random_spd(rng, 2)
    rec = jump_term_decomposition([1.0, -1.0], p, np.eye(2), [0.0, 0.0], q=2)
    assert rec.direct == 0.0 and rec.expanded == 0.0


def test_jump_decomposition_scalar_binomial():
    rec = jump_term_decomposition([1.0], np.eye(1), np.eye(1), [1.0], q=2)
    assert rec.direct == pytest.approx(3.0)
    assert rec.expanded == pytest.approx(3.0)


def test_jump_decomposition_two_routes_agree(rng):
    for _ in range(300):
        n = int(rng.integers(1, 4))
        l = int(rng.integers(1, 4))
        p = random_spd(rng, n)
        b = rng.standard_normal((n, l))
        x = rng.standard_normal(n) * rng.uniform(0.1, 3.0)
        dl = rng.standard_normal(l)
        q = int(rng.choice([2, 4, 6]))
        rec = jump_term_decomposition(x, p, b, dl, q=q)
        scale = max(1.0, abs(rec.direct))
        assert abs(rec.difference) <= 1e-9 * scale
        assert rec.linear_coeff_norm <= rec.linear_coeff_bound + 1e-12
        assert rec.quad_coeff_norm <= rec.quad_coeff_bound + 1e-12


def test_jump_decomposition_rejects_odd_q():
    with pytest.raises(ValueError):
        jump_term_decomposition([1.0], np.eye(1), np.eye(1), [1.0], q=3)
