"""Exact Gaussian transitions for dx = Ax dt + C dW between events.

Two routes to the same quantities:

* :func:`van_loan_gramian` computes the noise covariance
  ``G(d) = integral_0^d exp(As) C C' exp(A's) ds`` through the augmented
  block-matrix exponential (machine-precision reference), and
* :class:`ExactTransitionEngine` evaluates propagators and Gramians for many
  interval lengths at once through the eigendecomposition of A, falling back
  to the block-exponential route whenever a self-check at construction shows
  the eigenbasis is too ill-conditioned to be trusted.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

_EIG_SELF_CHECK_TOL = 1e-11


def van_loan_gramian(a: np.ndarray, q: np.ndarray, delta: float) -> np.ndarray:
    """Controllability-type Gramian over one interval via the augmented
    exponential of [[-A, Q], [0, A']] * delta."""
    n = a.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -a
    block[:n, n:] = q
    block[n:, n:] = a.T
    e = expm(block * delta)
    g = e[n:, n:].T @ e[:n, n:]
    return 0.5 * (g + g.T)


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z with the removable singularity filled by its series."""
    out = np.empty_like(z)
    small = np.abs(z) < 1e-6
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs * zs / 6.0
    zb = z[~small]
    out[~small] = (np.exp(zb) - 1.0) / zb
    return out


def psd_factor(g: np.ndarray) -> np.ndarray:
    """Matrix F with F F' = G for symmetric PSD G (eigenvalues clipped at 0)."""
    w, v = np.linalg.eigh(0.5 * (g + g.T))
    return v * np.sqrt(np.clip(w, 0.0, None))


class ExactTransitionEngine:
    """Batched exact transition maps for a fixed pair (A, C).

    ``propagators(deltas)`` returns exp(A*delta) for each delta and
    ``noise_factors(deltas)`` returns matrices F with F F' = G(delta), so one
    exact step is ``x_next = Phi @ x + F @ z`` with z standard normal.
    """

    def __init__(self, a: np.ndarray, c: np.ndarray | None = None):
        self.a = np.asarray(a, dtype=float)
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise ValueError("A must be square")
        self.n = n
        if c is None or np.asarray(c).size == 0:
            self.q = np.zeros((n, n))
        else:
            c = np.asarray(c, dtype=float).reshape(n, -1)
            self.q = c @ c.T
        self.has_noise = bool(np.any(self.q != 0.0))

        self._eigvals, self._u = np.linalg.eig(self.a)
        try:
            self._uinv = np.linalg.inv(self._u)
        except np.linalg.LinAlgError:
            self._uinv = None
        self._use_eig = self._uinv is not None and self._self_check()
        if self._use_eig:
            self._gram_r = self._uinv @ self.q @ self._uinv.T
            self._gram_s = self._eigvals[:, None] + self._eigvals[None, :]

    def _self_check(self) -> bool:
        scale = max(1.0, float(np.linalg.norm(self.a)))
        for probe in (0.1 / scale, 1.0 / scale):
            ref = expm(self.a * probe)
            test = self._eig_propagators(np.array([probe]))[0]
            if np.max(np.abs(ref - test)) > _EIG_SELF_CHECK_TOL * max(
                1.0, float(np.max(np.abs(ref)))
            ):
                return False
        return True

    # -- propagators --------------------------------------------------------

    def _eig_propagators(self, deltas: np.ndarray) -> np.ndarray:
        ew = np.exp(np.multiply.outer(deltas, self._eigvals))  # (m, n)
        return np.einsum("ij,mj,jk->mik", self._u, ew, self._uinv).real

    def propagators(self, deltas) -> np.ndarray:
        deltas = np.asarray(deltas, dtype=float)
        if self._use_eig:
            return self._eig_propagators(deltas)
        return np.stack([expm(self.a * d) for d in deltas])

    def propagator(self, delta: float) -> np.ndarray:
        return self.propagators(np.array([float(delta)]))[0]

    # -- Gramians -----------------------------------------------------------

    def gramians(self, deltas) -> np.ndarray:
        deltas = np.asarray(deltas, dtype=float)
        m = deltas.size
        if not self.has_noise:
            return np.zeros((m, self.n, self.n))
        if self._use_eig:
            z = np.multiply.outer(deltas, self._gram_s)  # (m, n, n)
            k = deltas[:, None, None] * _phi1(z)
            g = np.einsum("ij,mjk,lk->mil", self._u, self._gram_r[None, :, :] * k, self._u).real
            return 0.5 * (g + np.transpose(g, (0, 2, 1)))
        return np.stack([van_loan_gramian(self.a, self.q, d) for d in deltas])

    def noise_factors(self, deltas) -> np.ndarray:
        g = self.gramians(deltas)
        w, v = np.linalg.eigh(g)
        return v * np.sqrt(np.clip(w, 0.0, None))[..., None, :]
