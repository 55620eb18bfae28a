"""Newtonian potential over the ball and its second derivatives.

All-pairs direct summation (O(M^2)); the loop over target nodes is chunked
and optionally spread over a thread pool.  Results are deterministic for any
thread count because each chunk writes disjoint output rows and the
within-row summation order is fixed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import itertools

import numpy as np
from scipy import sparse

from .fields import GridField, derivative, hoelder_norm
from .grid import QuadGrid, _cell_ball_fractions, source_set
from .kernels import Kernel

_CHUNK = 128

_num_threads = 1

# closed-form constants for the integral of Gamma over one full lattice cell
# centered at the singularity:
#   n=2: integral of ln|z| over [-h/2,h/2]^2 = h^2 (ln h + _SQUARE_LOG)
#   n=3: integral of 1/|z| over [-h/2,h/2]^3 = h^2 * _CUBE_INV
_SQUARE_LOG = -np.log(2.0) / 2.0 + np.pi / 4.0 - 1.5
_CUBE_INV = 2.380077363979554

# near-field refinement: partial cells within this lattice distance of a
# target are integrated on a subdivided template instead of one point
_NEAR_RANGE = 1
_NEAR_SUBDIV = 6


def set_threads(k: int) -> None:
    """Cap the worker pool used for the per-target-node parallel map."""
    global _num_threads
    _num_threads = max(1, int(k))


def singular_cell_integral(weight: float, dim: int) -> float:
    """Integral of Gamma over the ball of volume ``weight`` centered at 0.

    n=2: rho = sqrt(w/pi), integral = (rho^2/2)(ln rho - 1/2).
    n=3: rho = (3w/4pi)^(1/3), integral = -rho^2/2.
    Both verified against fine quadrature in the tests.
    """
    if dim == 2:
        rho = np.sqrt(weight / np.pi)
        return float(rho**2 / 2.0 * (np.log(rho) - 0.5))
    rho = (3.0 * weight / (4.0 * np.pi)) ** (1.0 / 3.0)
    return float(-(rho**2) / 2.0)


def full_cell_gamma_integral(spacing: float, dim: int) -> float:
    """Exact integral of Gamma over one full cell centered at the singularity."""
    h = float(spacing)
    if dim == 2:
        return h * h * (np.log(h) + _SQUARE_LOG) / (2.0 * np.pi)
    return -_CUBE_INV * h * h / (4.0 * np.pi)


def _gamma_of_r2(r2: np.ndarray, dim: int) -> np.ndarray:
    """Gamma as a function of squared distance; zeros map to zero."""
    zero = r2 <= 0.0
    safe = np.where(zero, 1.0, r2)
    if dim == 2:
        out = 0.25 * np.log(safe) / np.pi
    else:
        out = -1.0 / (4.0 * np.pi * np.sqrt(safe))
    return np.where(zero, 0.0, out)


def _base_correction(grid: QuadGrid) -> sparse.csr_matrix:
    """Sparse matrix C with ``(C @ f)[t]`` the near-field fix for node t.

    The dense far-field sum treats every source cell as one point mass.  For
    partial cells near the target that is too coarse, so their point terms
    are swapped for a subdivided quadrature of Gamma over cell ∩ D; full
    cells containing the target get the exact singular-cell integral.
    """
    cached = grid._aux.get("base_correction")
    if cached is not None:
        return cached
    n = grid.dim
    R = grid.domain.radius
    h = grid.spacing
    src = source_set(grid)
    nodes = grid.nodes
    M = grid.num_nodes

    q = _NEAR_SUBDIV
    off1 = ((np.arange(q) + 0.5) / q - 0.5) * h
    sub_off = np.array(list(itertools.product(off1, repeat=n)))  # (q^n, n)
    sub_half = h / (2.0 * q)
    sub_vol = h**n / q**n

    part = np.nonzero(~src.cell_full)[0]
    rows, cols, vals = [], [], []
    if part.size:
        sub_pts = src.cell_center[part][:, None, :] + sub_off[None, :, :]  # (P, q^n, n)
        sub_frac = _cell_ball_fractions(
            sub_pts.reshape(-1, n), sub_half, R, 2).reshape(len(part), -1)
        for o in itertools.product(range(-_NEAR_RANGE, _NEAR_RANGE + 1), repeat=n):
            targets = np.array([grid.node_at(ci + np.array(o))
                                for ci in src.cell_lattice[part]], dtype=np.int64)
            hit = targets >= 0
            if not np.any(hit):
                continue
            t = targets[hit]
            s = part[hit]
            d = nodes[t][:, None, :] - sub_pts[hit]
            refined = np.sum(_gamma_of_r2(np.sum(d * d, axis=2), n)
                             * sub_frac[hit], axis=1) * sub_vol
            plain_r2 = np.sum((nodes[t] - src.points[s]) ** 2, axis=1)
            plain = _gamma_of_r2(plain_r2, n) * src.weights[s]
            rows.append(t)
            cols.append(src.owner[s])
            vals.append(refined - plain)

    # target sitting in its own full cell: exact singular integral (the
    # dense sum masked that source)
    full_nodes = np.nonzero(src.cell_full[:M])[0]
    rows.append(full_nodes)
    cols.append(full_nodes)
    vals.append(np.full(len(full_nodes), full_cell_gamma_integral(h, n)))

    corr = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(M, M)).tocsr()
    grid._aux["base_correction"] = corr
    return corr


@dataclass
class PotentialField:
    """Potential values and second derivatives of N(f) on the grid."""

    base: GridField           # (M, N)
    hess: np.ndarray          # (M, N, n, n), symmetric in the last two axes

    def hess_component_field(self, i: int, j: int) -> GridField:
        return self.base.copy_with(self.hess[:, :, i, j])

    def hess_norm2(self) -> float:
        """``||N(f)||^(2)`` computed from the stored Hessian fields."""
        n = self.base.grid.dim
        best = 0.0
        for i in range(n):
            for j in range(i, n):
                best = max(best, hoelder_norm(self.hess_component_field(i, j)))
        return best


def _potential_chunk(grid, src_pts, src_fw, fvals, fw_and_w, lo, hi, base_out, hess_out):
    nodes = grid.nodes
    n = grid.dim
    N = fvals.shape[1]
    sel = slice(lo, hi)

    # base: far-field point-mass sum over the source set (centroids of
    # cell ∩ D); the singular and near-boundary terms are fixed afterwards
    # by the cached sparse correction
    dsrc = nodes[sel][:, None, :] - src_pts[None, :, :]
    base_out[sel] = _gamma_of_r2(np.sum(dsrc * dsrc, axis=2), n) @ src_fw
    if hess_out is None:
        return

    diff = nodes[sel][:, None, :] - nodes[None, :, :]
    r2 = np.sum(diff * diff, axis=2)
    self_mask = r2 == 0.0
    inv = 1.0 / np.where(self_mask, 1.0, r2)
    if n == 2:
        diag = inv / (2.0 * np.pi)
        cross = -2.0 * inv * diag
    else:
        ir = np.sqrt(inv)
        diag = inv * ir / (4.0 * np.pi)
        cross = -3.0 * inv * diag
    diag[self_mask] = 0.0
    cross[self_mask] = 0.0

    # Hessian by the subtraction formula; the singular cell gets weight 0.
    # fw_and_w stacks f*w with w so K @ fw and K @ w share one matmul.
    for i in range(n):
        for j in range(i, n):
            K = diff[:, :, i] * diff[:, :, j] * cross
            if i == j:
                K += diag
            both = K @ fw_and_w
            term = both[:, :N] - both[:, N:] * fvals[sel]
            if i == j:
                # +f/n, not -f/n: with Gamma normalized so Delta N(f) = f,
                # the sphere boundary term of the subtraction formula carries
                # a plus sign (checked against finite differences of base)
                term = term + fvals[sel] / n
            hess_out[sel, :, i, j] = term
            hess_out[sel, :, j, i] = term


def newtonian(f: GridField, hessian: bool = True) -> PotentialField:
    """Newtonian potential of ``f``, component-wise, with Hessians.

    Second derivatives at interior nodes come from the subtraction formula;
    nodes within 2h of the boundary are filled by finite differences of the
    base potential instead.  ``hessian=False`` skips the quadratic-cost
    second-derivative pass and leaves ``hess = None`` (base values only).
    """
    grid = f.grid
    M = grid.num_nodes
    N = f.components
    fvals = f.values
    fw_and_w = np.hstack([fvals * grid.weights[:, None],
                          grid.weights[:, None]])

    src = source_set(grid)
    src_fw = fvals[src.owner] * src.weights[:, None]
    corr = _base_correction(grid)

    base = np.zeros((M, N))
    hess = np.zeros((M, N, grid.dim, grid.dim)) if hessian else None

    ranges = [(lo, min(lo + _CHUNK, M)) for lo in range(0, M, _CHUNK)]
    if _num_threads > 1:
        with ThreadPoolExecutor(max_workers=_num_threads) as pool:
            futs = [pool.submit(_potential_chunk, grid, src.points, src_fw,
                                fvals, fw_and_w, lo, hi, base, hess)
                    for lo, hi in ranges]
            for fut in futs:
                fut.result()
    else:
        for lo, hi in ranges:
            _potential_chunk(grid, src.points, src_fw, fvals, fw_and_w,
                             lo, hi, base, hess)

    base += corr @ fvals
    base_field = GridField(grid, base, f.alpha)

    # boundary-adjacent nodes: finite differences of the base potential
    outer = ~grid.interior_mask
    if hess is not None and np.any(outer):
        n = grid.dim
        for i in range(n):
            for j in range(i, n):
                beta = [0] * n
                beta[i] += 1
                beta[j] += 1
                d = derivative(base_field, tuple(beta)).values
                hess[outer, :, i, j] = d[outer]
                hess[outer, :, j, i] = d[outer]
    return PotentialField(base=base_field, hess=hess)


def laplacian_identity_residual(f: GridField, pot: PotentialField) -> float:
    """Max over interior nodes of |trace of hess(N(f)) - f|."""
    if pot.base.grid is not f.grid:
        raise ValueError("grid mismatch between f and its potential")
    if pot.hess is None:
        raise ValueError("potential was computed without Hessians")
    trace = np.trace(pot.hess, axis1=2, axis2=3)
    resid = np.abs(trace - f.values)
    mask = f.grid.interior_mask
    return float(np.max(resid[mask])) if np.any(mask) else 0.0


def _random_trig_field(grid: QuadGrid, rng, alpha) -> GridField:
    """Random trig polynomial scaled to the domain radius (so that the probe
    is comparable across R, matching the R-independence it is probing)."""
    R = grid.domain.radius
    x = grid.nodes / R
    vals = np.zeros(grid.num_nodes)
    for _ in range(3):
        freq = rng.integers(1, 4, size=grid.dim).astype(float)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(-1.0, 1.0)
        vals += amp * np.cos(np.pi * (x @ freq) + phase)
    return GridField(grid, vals[:, None], alpha)


def operator_norm_probe(trials: int, grid: QuadGrid, alpha: float = 0.5,
                        seed: int = 0) -> float:
    """Empirical bound for ``||N(f)||^(2) / ||f||``.

    Always includes f = 1 (whose exact ratio is 1/n), plus ``trials`` random
    trig-polynomial fields from a fixed seed.  The returned constant is the
    working surrogate for the R-independent operator norm bound.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    fields = [GridField(grid, np.ones((grid.num_nodes, 1)), alpha)]
    fields += [_random_trig_field(grid, rng, alpha) for _ in range(trials)]
    best = 0.0
    for f in fields:
        pot = newtonian(f)
        ratio = pot.hess_norm2() / hoelder_norm(f)
        best = max(best, ratio)
    return best
