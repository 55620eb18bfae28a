"""Fixed-point solver: harmonic seeds, the corrected potential operator,
Picard iteration, and the non-radiality verdict.

The iteration solves Delta u = a(x, u, grad u, hess u) locally: starting
from a harmonic quadratic seed h, each step forms the Newtonian potential
of a along the iterate and subtracts its degree-one Taylor part plus the
off-diagonal quadratic part at the origin, so every iterate keeps the
seed's value, gradient, and off-diagonal Hessian at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certificate import ContractionCertificate
from .expr import NonlinearitySpec, eval_on_field
from .fields import (GridField, derivative, gradient_at_origin,
                     hessian_at_origin, norm2_value, sup_norm)
from .grid import QuadGrid
from .potential import newtonian

DEFAULT_MAX_ITER = 200


class CertificateRefused(RuntimeError):
    """Raised when solve() is called with a non-admissible certificate."""


class DivergenceError(RuntimeError):
    """The iteration increment doubled five times in a row."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class HarmonicSeed:
    """Seed h(x) = c0 + c1 x + sum_kl a_kl x_k x_l with trace-free a."""

    a_kl: np.ndarray               # (N, n, n), symmetric, trace-free
    c0: np.ndarray = None          # (N,)
    c1: np.ndarray = None          # (N, n)

    def __post_init__(self):
        self.a_kl = np.atleast_3d(np.asarray(self.a_kl, dtype=float))
        N, n, _ = self.a_kl.shape
        if self.c0 is None:
            self.c0 = np.zeros(N)
        if self.c1 is None:
            self.c1 = np.zeros((N, n))
        self.c0 = np.asarray(self.c0, dtype=float).reshape(N)
        self.c1 = np.asarray(self.c1, dtype=float).reshape(N, n)
        for j in range(N):
            if not np.allclose(self.a_kl[j], self.a_kl[j].T, atol=1e-12):
                raise ValueError(f"seed matrix of component {j+1} not symmetric")
            tr = float(np.trace(self.a_kl[j]))
            if abs(tr) > 1e-12:
                raise ValueError(f"seed matrix of component {j+1} has trace {tr}")

    @property
    def norm2(self) -> float:
        """The seed's second-order norm, 2 max |a_kl|."""
        return 2.0 * float(np.max(np.abs(self.a_kl)))


def make_seed(grid: QuadGrid, gamma0: float, a_kl, c0=None, c1=None,
              mode: str = "thm13", alpha: float = 0.5) -> GridField:
    """Sample the harmonic seed on the grid, enforcing its invariants.

    The quadratic coefficients must be symmetric and trace-free with
    2 max|a_kl| <= gamma0 / 2; the affine part (c0, c1) is only allowed in
    mode thm12 (prescribed value and gradient at the origin).
    """
    seed = HarmonicSeed(a_kl=a_kl, c0=c0, c1=c1)
    if seed.norm2 > gamma0 / 2.0 + 1e-12:
        raise ValueError(
            f"seed norm {seed.norm2} exceeds gamma0/2 = {gamma0 / 2.0}")
    if mode != "thm12" and (np.any(seed.c0 != 0.0) or np.any(seed.c1 != 0.0)):
        raise ValueError("affine seed coefficients require mode thm12")
    x = grid.nodes
    quad = np.einsum("mk,jkl,ml->mj", x, seed.a_kl, x)
    vals = seed.c0[None, :] + x @ seed.c1.T + quad
    return GridField(grid, vals, alpha)


def theta(u: GridField, spec: NonlinearitySpec) -> GridField:
    """One corrected-potential step.

    omega = N(a(. , u, grad u, hess u)); the returned field is omega minus
    its value and gradient at the origin and minus the off-diagonal part of
    its origin Hessian (taken from the potential's own Hessian, not finite
    differences).  The diagonal Hessian part is kept.
    """
    grid = u.grid
    n = grid.dim
    f = eval_on_field(spec, u)
    pot = newtonian(f)
    omega = pot.base
    o = grid.origin_index
    w0 = omega.values[o]                      # (N,)
    g0 = gradient_at_origin(omega)            # (N, n)
    h0 = pot.hess[o]                          # (N, n, n)
    x = grid.nodes
    vals = omega.values - w0[None, :] - x @ g0.T
    for k in range(n):
        for l in range(n):
            if k != l:
                vals -= 0.5 * np.outer(x[:, k] * x[:, l], h0[:, k, l])
    return GridField(grid, vals, u.alpha)


@dataclass
class SolveReport:
    """Everything observed during one Picard run."""

    converged: bool
    iterates: int
    history: list                     # rows: (iter, delta_norm, ratio)
    rho_hat: float                    # median successive ratio
    final_residual: float             # max-node |Delta u - a(...)|
    hessian_at_origin: np.ndarray     # (N, n, n)
    radiality: str                    # "non_radial" | "possibly_radial"
    radiality_witness: dict
    certificate: ContractionCertificate
    solution: GridField
    stencil_tol: float

    def history_csv(self) -> str:
        lines = ["iter,delta_norm2,ratio"]
        for it, dn, ratio in self.history:
            lines.append(f"{it},{dn:.17g},{ratio:.17g}")
        return "\n".join(lines) + "\n"


def radiality_check(hessians: np.ndarray, tol: float):
    """Non-radiality from the origin Hessians.

    A component whose Hessian differs from (tr H / n) I by more than tol in
    any entry certifies the solution is not radially symmetric about the
    origin.  The converse does not hold, so the fallback verdict is
    "possibly_radial".  Returns (verdict, witness dict).
    """
    H = np.atleast_3d(np.asarray(hessians, dtype=float))
    N, n, _ = H.shape
    worst = -1.0
    witness = {}
    for j in range(N):
        lam = np.trace(H[j]) / n
        dev = np.max(np.abs(H[j] - lam * np.eye(n)))
        if dev > worst:
            worst = dev
            witness = {"component": j + 1, "deviation": float(dev),
                       "trace_over_n": float(lam), "tol": float(tol)}
    verdict = "non_radial" if worst > tol else "possibly_radial"
    return verdict, witness


def _laplacian(u: GridField) -> np.ndarray:
    n = u.grid.dim
    out = np.zeros_like(u.values)
    for k in range(n):
        beta = [0] * n
        beta[k] = 2
        out += derivative(u, tuple(beta)).values
    return out


def pde_residual(u: GridField, spec: NonlinearitySpec) -> float:
    """max over interior nodes of |Delta u - a(x, u, grad u, hess u)|."""
    resid = _laplacian(u) - eval_on_field(spec, u).values
    mask = u.grid.interior_mask
    return float(np.max(np.abs(resid[mask]))) if np.any(mask) else 0.0


def solve(spec: NonlinearitySpec, mode: str, seed: GridField,
          certificate: ContractionCertificate, tol: float = None,
          max_iter: int = DEFAULT_MAX_ITER, force: bool = False) -> SolveReport:
    """Picard iteration u_{m+1} = seed + theta(u_m) from u_0 = seed.

    Stops when the second-order norm of the increment drops below tol
    (default 1e-8 gamma0); raises DivergenceError after five consecutive
    doublings, and CertificateRefused when the certificate is not
    admissible unless force=True.
    """
    if not certificate.admissible and not force:
        raise CertificateRefused(
            f"certificate verdict is {certificate.verdict} "
            f"(binding: {certificate.binding or 'hypothesis'})")
    gamma0 = certificate.gamma
    if tol is None:
        tol = 1e-8 * gamma0

    grid = seed.grid
    u = seed
    history = []
    prev_dn = None
    doublings = 0
    converged = False
    for it in range(1, max_iter + 1):
        step = theta(u, spec)
        u_next = GridField(grid, seed.values + step.values, seed.alpha)
        dn = norm2_value(GridField(grid, u_next.values - u.values, seed.alpha))
        ratio = dn / prev_dn if (prev_dn is not None and prev_dn > 0) else 0.0
        history.append((it, dn, ratio))
        u = u_next
        if dn <= tol:
            converged = True
            break
        if prev_dn is not None and dn > 2.0 * prev_dn:
            doublings += 1
            if doublings >= 5:
                raise DivergenceError(
                    f"increment doubled 5 times in a row (last {dn})", history)
        else:
            doublings = 0
        prev_dn = dn

    ratios = [r for _, _, r in history if r > 0]
    rho_hat = float(np.median(ratios)) if ratios else 0.0
    residual = pde_residual(u, spec)
    H = hessian_at_origin(u)
    R = grid.domain.radius
    # truncation scale of the origin stencils on a field of this size
    stencil = grid.spacing**2 * max(sup_norm(u), 1e-300) / R**4
    verdict, witness = radiality_check(H, 10.0 * stencil)
    return SolveReport(
        converged=converged, iterates=len(history), history=history,
        rho_hat=rho_hat, final_residual=residual, hessian_at_origin=H,
        radiality=verdict, radiality_witness=witness,
        certificate=certificate, solution=u, stencil_tol=stencil)


def elliptic_transform(A0: np.ndarray):
    """Linear change of variables normalizing a constant SPD principal part.

    Returns (P, P_inverse) with P^T A0 P = I, taking P = A0^(-1/2) (the
    symmetric inverse square root).  Solving sum a^ij(0) D_ij u = a then
    pulls back to Delta v = a on the image of the ball; the image ellipsoid
    is handled by working on its largest inscribed ball (the construction
    is local, so a smaller ball is admissible).
    """
    A0 = np.asarray(A0, dtype=float)
    if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
        raise ValueError("A0 must be a square matrix")
    if not np.allclose(A0, A0.T, atol=1e-12):
        raise ValueError("A0 must be symmetric")
    evals, Q = np.linalg.eigh(A0)
    if np.min(evals) <= 0:
        raise ValueError("A0 must be positive definite")
    P = Q @ np.diag(evals**-0.5) @ Q.T
    Pinv = Q @ np.diag(evals**0.5) @ Q.T
    return P, Pinv
