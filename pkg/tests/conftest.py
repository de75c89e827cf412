import numpy as np
import pytest

from levyhybrid.certificates import spectral_abscissa


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_stable_matrix(rng, n: int, margin: float = 0.1) -> np.ndarray:
    """Random matrix shifted so its spectral abscissa is <= -margin."""
    m = rng.standard_normal((n, n))
    shift = spectral_abscissa(m) + margin + rng.uniform(0.0, 0.9)
    return m - shift * np.eye(n)


def random_spd(rng, n: int) -> np.ndarray:
    w = rng.standard_normal((n, n))
    return w @ w.T + 0.1 * np.eye(n)
