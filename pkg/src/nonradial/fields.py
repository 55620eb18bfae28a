"""Grid-sampled vector fields, finite differences, and Hoelder norms.

Norm conventions: ``|f|`` is the sup over nodes of the max over components,
``||f|| = |f| + (2R)^alpha * H_alpha[f]``, and ``||f||^(2)`` is the max of
``||d^beta f||`` over all second-order multi-indices and components.

The discrete Hoelder constant is a max over node pairs, so it
under-estimates the continuum sup; everything derived from it is empirical.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import QuadGrid

PAIR_SCAN_CUTOFF = 4096
PAIR_SCAN_SEED = 0x5EED
_PAIR_CHUNK = 256


@dataclass
class GridField:
    """Vector-valued function sampled at every grid node."""

    grid: QuadGrid
    values: np.ndarray  # (M, N)
    alpha: float = 0.5
    _deriv_cache: dict = dc_field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] != self.grid.num_nodes:
            raise ValueError("values must be defined at every node")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")

    @property
    def components(self) -> int:
        return self.values.shape[1]

    def copy_with(self, values) -> "GridField":
        return GridField(self.grid, values, self.alpha)


def from_function(grid: QuadGrid, func, alpha: float = 0.5) -> GridField:
    """Sample ``func(x) -> scalar or vector`` at every node."""
    vals = np.array([np.atleast_1d(func(x)) for x in grid.nodes], dtype=float)
    return GridField(grid, vals, alpha)


@dataclass
class HoelderReport:
    sup_norm: float
    hoelder_const: float
    norm: float
    derivative_norms: dict  # multi-index tuple -> ||d^beta f||
    norm2: float
    pairs_examined: int


# ---------------------------------------------------------------------------
# finite differences


def _inward_extrapolate(grid: QuadGrid, vals, out, missing):
    """Fill stencil-less nodes by linear extrapolation along the most-inward
    lattice axis.  Only a handful of extreme boundary nodes ever need this."""
    for i in np.nonzero(missing)[0]:
        idx = grid.lattice_index[i]
        ax = int(np.argmax(np.abs(idx)))
        step = -int(np.sign(idx[ax])) or 1
        j1 = grid.neighbor_table(ax, step)[i]
        j2 = grid.neighbor_table(ax, 2 * step)[i]
        if j1 >= 0 and j2 >= 0 and not missing[j1] and not missing[j2]:
            out[i] = 2.0 * out[j1] - out[j2]
        elif j1 >= 0 and not missing[j1]:
            out[i] = out[j1]
        else:
            out[i] = 0.0
    return out


def _first_diff(grid: QuadGrid, vals: np.ndarray, axis: int) -> np.ndarray:
    h = grid.spacing
    ip1 = grid.neighbor_table(axis, +1)
    im1 = grid.neighbor_table(axis, -1)
    ip2 = grid.neighbor_table(axis, +2)
    im2 = grid.neighbor_table(axis, -2)
    out = np.zeros_like(vals)
    done = np.zeros(vals.shape[0], dtype=bool)

    central = (ip1 >= 0) & (im1 >= 0)
    out[central] = (vals[ip1[central]] - vals[im1[central]]) / (2.0 * h)
    done |= central

    fwd2 = ~done & (ip1 >= 0) & (ip2 >= 0)
    out[fwd2] = (-3.0 * vals[fwd2] + 4.0 * vals[ip1[fwd2]] - vals[ip2[fwd2]]) / (2.0 * h)
    done |= fwd2
    bwd2 = ~done & (im1 >= 0) & (im2 >= 0)
    out[bwd2] = (3.0 * vals[bwd2] - 4.0 * vals[im1[bwd2]] + vals[im2[bwd2]]) / (2.0 * h)
    done |= bwd2

    fwd1 = ~done & (ip1 >= 0)
    out[fwd1] = (vals[ip1[fwd1]] - vals[fwd1]) / h
    done |= fwd1
    bwd1 = ~done & (im1 >= 0)
    out[bwd1] = (vals[bwd1] - vals[im1[bwd1]]) / h
    done |= bwd1

    return _inward_extrapolate(grid, vals, out, ~done)


def _second_diff(grid: QuadGrid, vals: np.ndarray, axis: int) -> np.ndarray:
    h = grid.spacing
    h2 = h * h
    ip = [grid.neighbor_table(axis, k) for k in (1, 2, 3)]
    im = [grid.neighbor_table(axis, -k) for k in (1, 2, 3)]
    out = np.zeros_like(vals)
    done = np.zeros(vals.shape[0], dtype=bool)

    central = (ip[0] >= 0) & (im[0] >= 0)
    out[central] = (vals[ip[0][central]] - 2.0 * vals[central] + vals[im[0][central]]) / h2
    done |= central

    fwd3 = ~done & (ip[0] >= 0) & (ip[1] >= 0) & (ip[2] >= 0)
    out[fwd3] = (2.0 * vals[fwd3] - 5.0 * vals[ip[0][fwd3]]
                 + 4.0 * vals[ip[1][fwd3]] - vals[ip[2][fwd3]]) / h2
    done |= fwd3
    bwd3 = ~done & (im[0] >= 0) & (im[1] >= 0) & (im[2] >= 0)
    out[bwd3] = (2.0 * vals[bwd3] - 5.0 * vals[im[0][bwd3]]
                 + 4.0 * vals[im[1][bwd3]] - vals[im[2][bwd3]]) / h2
    done |= bwd3

    fwd2 = ~done & (ip[0] >= 0) & (ip[1] >= 0)
    out[fwd2] = (vals[fwd2] - 2.0 * vals[ip[0][fwd2]] + vals[ip[1][fwd2]]) / h2
    done |= fwd2
    bwd2 = ~done & (im[0] >= 0) & (im[1] >= 0)
    out[bwd2] = (vals[bwd2] - 2.0 * vals[im[0][bwd2]] + vals[im[1][bwd2]]) / h2
    done |= bwd2

    return _inward_extrapolate(grid, vals, out, ~done)


def derivative(field: GridField, multi_index) -> GridField:
    """Finite-difference ``d^beta f`` for ``|beta| <= 2``.

    Central differences where both neighbors exist, one-sided second-order
    stencils near the boundary, mixed partials by nested first differences.
    """
    beta = tuple(int(b) for b in multi_index)
    n = field.grid.dim
    if len(beta) != n or any(b < 0 for b in beta) or sum(beta) > 2:
        raise ValueError(f"bad multi-index {beta} for dim {n}")
    cached = field._deriv_cache.get(beta)
    if cached is not None:
        return cached

    order = sum(beta)
    if order == 0:
        result = field
    elif order == 1:
        axis = beta.index(1)
        result = field.copy_with(_first_diff(field.grid, field.values, axis))
    elif 2 in beta:
        axis = beta.index(2)
        result = field.copy_with(_second_diff(field.grid, field.values, axis))
    else:
        ax1, ax2 = [i for i, b in enumerate(beta) if b == 1]
        inner = _first_diff(field.grid, field.values, ax2)
        result = field.copy_with(_first_diff(field.grid, inner, ax1))
    field._deriv_cache[beta] = result
    return result


# ---------------------------------------------------------------------------
# norms


def sup_norm(field: GridField) -> float:
    return float(np.max(np.abs(field.values))) if field.values.size else 0.0


def _pair_scan(nodes, values, alpha, rows):
    """Max of max-component |df| / |dx|^alpha over pairs (rows x all)."""
    best = 0.0
    count = 0
    for lo in range(0, len(rows), _PAIR_CHUNK):
        sel = rows[lo:lo + _PAIR_CHUNK]
        diff = nodes[sel][:, None, :] - nodes[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        df = np.max(np.abs(values[sel][:, None, :] - values[None, :, :]), axis=2)
        mask = dist > 0.0
        if np.any(mask):
            ratio = df[mask] / dist[mask] ** alpha
            best = max(best, float(np.max(ratio)))
        count += int(np.count_nonzero(mask))
    return best, count


def _short_range_rows(grid: QuadGrid):
    """Node pairs within 4h via lattice offsets (short range dominates H_alpha)."""
    n = grid.dim
    pairs_i = []
    pairs_j = []
    offsets = [o for o in itertools.product(range(-4, 5), repeat=n)
               if 0 < sum(c * c for c in o) <= 16]
    # keep one representative of each +-offset pair
    offsets = [o for o in offsets if o > tuple(-c for c in o)]
    for off in offsets:
        tab = np.array([grid.node_at(grid.lattice_index[i] + np.array(off))
                        for i in range(grid.num_nodes)], dtype=np.int64)
        ok = tab >= 0
        pairs_i.append(np.nonzero(ok)[0])
        pairs_j.append(tab[ok])
    return np.concatenate(pairs_i), np.concatenate(pairs_j)


def hoelder_const(field: GridField) -> float:
    value, _ = _hoelder_with_count(field)
    return value


def _hoelder_with_count(field: GridField):
    nodes = field.grid.nodes
    values = field.values
    M = nodes.shape[0]
    if M <= PAIR_SCAN_CUTOFF:
        return _pair_scan(nodes, values, field.alpha, np.arange(M))

    rng = np.random.default_rng(PAIR_SCAN_SEED)
    sample = np.sort(rng.permutation(M)[:PAIR_SCAN_CUTOFF])
    best, count = _pair_scan(nodes, values, field.alpha, sample)

    pi, pj = _short_range_rows(field.grid)
    diff = nodes[pi] - nodes[pj]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    df = np.max(np.abs(values[pi] - values[pj]), axis=1)
    if dist.size:
        best = max(best, float(np.max(df / dist**field.alpha)))
    return best, count + dist.size


def hoelder_norm(field: GridField) -> float:
    """``||f|| = |f| + (2R)^alpha H_alpha[f]``."""
    R = field.grid.domain.radius
    return sup_norm(field) + (2.0 * R) ** field.alpha * hoelder_const(field)


def _multi_indices(n, order):
    return [b for b in itertools.product(range(order + 1), repeat=n) if sum(b) == order]


def norm2(field: GridField) -> HoelderReport:
    """Full norm report including ``||f||^(2)`` over all second derivatives."""
    R = field.grid.domain.radius
    if round(2.0 * R / field.grid.spacing) < 16:
        raise ValueError("grid too coarse for second-derivative norms (need m >= 16)")
    scale = (2.0 * R) ** field.alpha
    pairs_total = 0
    deriv_norms = {}
    for order in (0, 1, 2):
        for beta in _multi_indices(field.grid.dim, order):
            df = derivative(field, beta)
            hc, cnt = _hoelder_with_count(df)
            pairs_total += cnt
            deriv_norms[beta] = sup_norm(df) + scale * hc
    zero = (0,) * field.grid.dim
    sup0 = sup_norm(field)
    h0 = (deriv_norms[zero] - sup0) / scale
    n2 = max(deriv_norms[b] for b in _multi_indices(field.grid.dim, 2))
    return HoelderReport(
        sup_norm=sup0,
        hoelder_const=h0,
        norm=deriv_norms[zero],
        derivative_norms=deriv_norms,
        norm2=n2,
        pairs_examined=pairs_total,
    )


def norm2_value(field: GridField) -> float:
    """Just ``||f||^(2)`` (cheaper than the full report)."""
    R = field.grid.domain.radius
    scale = (2.0 * R) ** field.alpha
    best = 0.0
    for beta in _multi_indices(field.grid.dim, 2):
        df = derivative(field, beta)
        best = max(best, sup_norm(df) + scale * hoelder_const(df))
    return best


# ---------------------------------------------------------------------------
# vanishing order and export


def value_at_origin(field: GridField) -> np.ndarray:
    return field.values[field.grid.origin_index].copy()


def gradient_at_origin(field: GridField) -> np.ndarray:
    """(N, n) gradient at the origin node by central stencils."""
    grid = field.grid
    i0 = grid.origin_index
    h = grid.spacing
    grad = np.empty((field.components, grid.dim))
    for ax in range(grid.dim):
        jp = grid.neighbor_table(ax, +1)[i0]
        jm = grid.neighbor_table(ax, -1)[i0]
        grad[:, ax] = (field.values[jp] - field.values[jm]) / (2.0 * h)
    return grad


def hessian_at_origin(field: GridField) -> np.ndarray:
    """(N, n, n) finite-difference Hessian at the origin node."""
    n = field.grid.dim
    hess = np.empty((field.components, n, n))
    for k in range(n):
        for l in range(k, n):
            beta = [0] * n
            beta[k] += 1
            beta[l] += 1
            d = derivative(field, tuple(beta))
            v = d.values[field.grid.origin_index]
            hess[:, k, l] = v
            hess[:, l, k] = v
    return hess


def vanishing_order_project(field: GridField) -> GridField:
    """Subtract the degree-1 Taylor polynomial at the origin (stencil-read)."""
    v0 = value_at_origin(field)
    g0 = gradient_at_origin(field)
    new = field.values - v0[None, :] - field.grid.nodes @ g0.T
    return field.copy_with(new)


def to_csv(field: GridField, path) -> None:
    """Write ``x1..xn,u1..uN`` rows in grid order, 17 significant digits."""
    n = field.grid.dim
    N = field.components
    header = ",".join([f"x{i+1}" for i in range(n)] + [f"u{j+1}" for j in range(N)])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for x, u in zip(field.grid.nodes, field.values):
            row = [f"{v:.17g}" for v in x] + [f"{v:.17g}" for v in u]
            fh.write(",".join(row) + "\n")
