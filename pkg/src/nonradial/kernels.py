"""Fundamental solution of the Laplacian and its second derivatives (n = 2, 3).

Sign convention: the 3-D kernel is ``|z|^{2-n} / (n(2-n) omega_n)``, negative
near the singularity; the 2-D kernel is ``ln|z| / 2pi``.
"""

from __future__ import annotations

import numpy as np

UNIT_BALL_VOLUME = {2: np.pi, 3: 4.0 * np.pi / 3.0}


class Kernel:
    """Pure-function evaluations of Gamma and its Hessian for a fixed dim."""

    def __init__(self, dim: int):
        if dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {dim}")
        self.dim = dim

    def gamma(self, z) -> np.ndarray:
        """Gamma(z); z may be a single vector or an (..., n) array."""
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)
        if np.any(r == 0.0):
            raise ZeroDivisionError("Gamma is singular at z = 0")
        if self.dim == 2:
            return np.log(r) / (2.0 * np.pi)
        return -1.0 / (4.0 * np.pi * r)

    def gamma_hess(self, z, i: int, j: int) -> np.ndarray:
        """Closed-form second partial d_i d_j Gamma(z)."""
        z = np.asarray(z, dtype=float)
        r2 = np.sum(z * z, axis=-1)
        if np.any(r2 == 0.0):
            raise ZeroDivisionError("Gamma Hessian is singular at z = 0")
        zi = z[..., i]
        zj = z[..., j]
        delta = 1.0 if i == j else 0.0
        if self.dim == 2:
            return (delta / r2 - 2.0 * zi * zj / r2**2) / (2.0 * np.pi)
        r = np.sqrt(r2)
        return (delta / r**3 - 3.0 * zi * zj / r**5) / (4.0 * np.pi)

    def gamma_hess_matrix(self, z) -> np.ndarray:
        """All second partials at once, shape (..., n, n)."""
        z = np.asarray(z, dtype=float)
        n = self.dim
        out = np.empty(z.shape[:-1] + (n, n))
        for i in range(n):
            for j in range(i, n):
                v = self.gamma_hess(z, i, j)
                out[..., i, j] = v
                out[..., j, i] = v
        return out


def gamma(z, dim: int) -> np.ndarray:
    return Kernel(dim).gamma(z)


def gamma_hess(z, i: int, j: int, dim: int) -> np.ndarray:
    return Kernel(dim).gamma_hess(z, i, j)


def gamma_hess_decay_check(samples, dim: int) -> float:
    """Empirical bound ``max |d_ij Gamma(z)| * |z|^n`` over the samples.

    This is the constant of the ``|d_ij Gamma| <= C |z|^{-n}`` decay estimate;
    it feeds reports, not the math.
    """
    kern = Kernel(dim)
    z = np.asarray(samples, dtype=float)
    rn = np.linalg.norm(z, axis=-1) ** dim
    best = 0.0
    for i in range(dim):
        for j in range(i, dim):
            best = max(best, float(np.max(np.abs(kern.gamma_hess(z, i, j)) * rn)))
    return best
