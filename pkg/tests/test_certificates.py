import numpy as np
import pytest

from conftest import random_stable_matrix
from levyhybrid.certificates import (
    ParametricFamily,
    certify,
    parametric_certificate,
    spectral_abscissa,
    verify_certificate,
)
from levyhybrid.errors import AlphaFloorError, InstabilityError


def scalar_gain_family(lo=1.0, hi=2.0, theta0=2.0):
    return ParametricFamily(
        a=lambda th: np.array([[-th[0]]]),
        b=lambda th: np.array([[1.0]]),
        c=lambda th: np.array([[0.0]]),
        lower=[lo],
        upper=[hi],
        theta0=[theta0],
    )


def test_certify_negative_identity():
    cert = certify(-np.eye(2))
    np.testing.assert_allclose(cert.p, np.eye(2), atol=1e-12)
    assert cert.alpha == pytest.approx(2.0, abs=1e-12)
    assert cert.residual <= 1e-12


def test_certify_against_hand_solved_lyapunov():
    # P0 solves P0 A + A' P0 = -I; for this A the 3-unknown symmetric system
    # is solved independently below and the certificate must match after the
    # documented rescaling.
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    # unknowns (p11, p12, p22): rows from (PA + A'P)_{11,12,22} = -(I)_{..}
    coeffs = np.array(
        [
            [0.0, -4.0, 0.0],  # 2*(p11*0 + p12*(-2)) = -1
            [1.0, -3.0, -2.0],  # p11 - 3 p12 - 2 p22 = 0
            [0.0, 2.0, -6.0],  # 2*(p12 - 3 p22) = -1
        ]
    )
    p11, p12, p22 = np.linalg.solve(coeffs, [-1.0, 0.0, -1.0])
    p0 = np.array([[p11, p12], [p12, p22]])
    eigs = np.linalg.eigvalsh(p0)
    cert = certify(a)
    np.testing.assert_allclose(cert.p, p0 / eigs[0], atol=1e-10)
    assert cert.alpha == pytest.approx(1.0 / eigs[-1], abs=1e-12)
    assert cert.residual <= 1e-8
    ok, _ = verify_certificate(cert.p, cert.alpha, a)
    assert ok


def test_certify_rejects_unstable():
    with pytest.raises(InstabilityError):
        certify([[1.0]])
    with pytest.raises(InstabilityError):
        certify([[0.0, 1.0], [-1.0, 0.0]])  # purely imaginary spectrum


def test_certify_verify_roundtrip_random(rng):
    for _ in range(30):
        n = int(rng.integers(2, 7))
        a = random_stable_matrix(rng, n)
        cert = certify(a)
        ok, residual = verify_certificate(cert.p, cert.alpha, a, tol=1e-8)
        assert ok, residual
        assert np.linalg.eigvalsh(cert.p)[0] >= 1.0 - 1e-10


def test_verify_certificate_examples():
    ok, res = verify_certificate(np.eye(2), 2.0, -np.eye(2), tol=1e-10)
    assert ok and abs(res) <= 1e-12
    ok, res = verify_certificate(np.eye(2), 3.0, -np.eye(2), tol=1e-10)
    assert not ok
    assert res == pytest.approx(1.0, abs=1e-12)


def test_scaling_invariance(rng):
    a = random_stable_matrix(rng, 3)
    cert = certify(a)
    for c in (1.0, 2.5, 10.0):
        ok, _ = verify_certificate(c * cert.p, cert.alpha, a, tol=1e-8)
        assert ok


def test_parametric_constant_family_is_theta_independent():
    fam = ParametricFamily(
        a=lambda th: -np.eye(2),
        b=lambda th: np.eye(2),
        c=lambda th: np.zeros((2, 1)),
        lower=[0.0],
        upper=[1.0],
        theta0=[0.5],
    )
    cert = parametric_certificate(fam)
    for theta in ([0.0], [0.3], [1.0]):
        np.testing.assert_allclose(cert.evaluate(theta), cert.base_p, atol=1e-12)
        assert cert.scale_factor(theta) == pytest.approx(1.0, abs=1e-12)


def test_parametric_scalar_family_minimality():
    fam = scalar_gain_family()
    cert = parametric_certificate(fam, grid_points=101)
    assert cert.alpha == pytest.approx(2.0, abs=1e-9)  # min over [1,2] of 2*theta
    assert cert.scale_factor(fam.theta0) == pytest.approx(1.0)
    for theta in np.linspace(1.0, 2.0, 101):
        diff = cert.evaluate([theta]) - cert.base_p
        assert np.linalg.eigvalsh(diff)[0] >= -1e-10


def test_parametric_companion_family_ordering(rng):
    def a_fn(th):
        return np.array([[0.0, 1.0], [-th[1], -th[0]]])

    fam = ParametricFamily(
        a=a_fn,
        b=lambda th: np.eye(2)[:, :1],
        c=lambda th: np.zeros((2, 1)),
        lower=[1.0, 2.0],
        upper=[3.0, 4.0],
        theta0=[2.0, 3.0],
    )
    cert = parametric_certificate(fam, grid_points=7)
    assert cert.alpha > 0
    for theta in fam.grid(7):
        diff = cert.evaluate(theta) - cert.base_p
        assert np.linalg.eigvalsh(diff)[0] >= -1e-10
        ok, _ = verify_certificate(
            cert.evaluate(theta), cert.alpha, a_fn(theta), tol=1e-8
        )
        assert ok


def test_parametric_detects_unstable_grid_point():
    fam = ParametricFamily(
        a=lambda th: np.array([[th[0]]]),  # unstable for positive theta
        b=lambda th: np.array([[1.0]]),
        c=lambda th: np.array([[0.0]]),
        lower=[-1.0],
        upper=[1.0],
        theta0=[-1.0],
    )
    with pytest.raises(InstabilityError):
        parametric_certificate(fam)


def test_parametric_alpha_floor():
    fam = scalar_gain_family()
    with pytest.raises(AlphaFloorError):
        parametric_certificate(fam, alpha_floor=10.0)


def test_family_validation():
    with pytest.raises(ValueError):
        ParametricFamily(
            a=lambda th: -np.eye(1),
            b=lambda th: np.eye(1),
            c=lambda th: np.eye(1),
            lower=[1.0],
            upper=[1.0],
            theta0=[1.0],
        )
    with pytest.raises(ValueError):
        ParametricFamily(
            a=lambda th: -np.eye(1),
            b=lambda th: np.eye(1),
            c=lambda th: np.eye(1),
            lower=[0.0],
            upper=[1.0],
            theta0=[2.0],
        )


def test_spectral_abscissa():
    assert spectral_abscissa(np.array([[-2.0, 0.0], [0.0, -0.5]])) == pytest.approx(-0.5)
