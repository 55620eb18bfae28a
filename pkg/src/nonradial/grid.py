"""Closed-ball domains and their quadrature grids.

The ball ``D = {|x| <= R}`` is discretized by an axis-aligned lattice of
cell centers with the origin anchored on a node.  Boundary cells get
fractional weights from a fixed-depth recursive subdivision, so the grid
is fully deterministic: two builds with the same inputs are bit-identical.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

# Fixed subdivision depth for boundary-cell volume fractions.  Depth 4
# resolves a straight cut through a cell to about 1/16 of its width.
SUBDIVISION_DEPTH = 4

_UNIT_BALL_VOLUME = {2: np.pi, 3: 4.0 * np.pi / 3.0}


@dataclass(frozen=True)
class BallDomain:
    """The closed ball of radius ``radius`` in dimension ``dim``."""

    dim: int
    radius: float

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise ValueError(f"radius must be positive and finite, got {self.radius}")

    @property
    def volume(self) -> float:
        return _UNIT_BALL_VOLUME[self.dim] * self.radius**self.dim


def _cell_ball_fractions(centers, half, radius, depth):
    """Fractions of the cubes ``center +- half`` inside ``|x| <= radius``.

    Vectorized fixed-depth recursive subdivision; no randomness.
    ``centers`` is (K, n); returns (K,).
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    K, n = centers.shape
    frac = np.zeros(K)
    signs = np.array(list(itertools.product((-0.5, 0.5), repeat=n)))
    # work set: (cube centers, parent cell index, measure share of the cell)
    cur = centers
    owner = np.arange(K)
    share = np.ones(K)
    cur_half = half
    for level in range(depth + 1):
        a = np.abs(cur)
        far = np.linalg.norm(a + cur_half, axis=1)
        near = np.linalg.norm(np.maximum(a - cur_half, 0.0), axis=1)
        inside = far <= radius
        outside = near >= radius
        np.add.at(frac, owner[inside], share[inside])
        straddle = ~inside & ~outside
        if level == depth:
            # leaf rule: count the sub-cube iff its center is inside
            leaf_in = straddle & (np.linalg.norm(cur, axis=1) <= radius)
            np.add.at(frac, owner[leaf_in], share[leaf_in])
            break
        cur = (cur[straddle][:, None, :] + signs[None, :, :] * cur_half).reshape(-1, n)
        owner = np.repeat(owner[straddle], 2**n)
        share = np.repeat(share[straddle] / 2**n, 2**n)
        cur_half /= 2.0
    return frac


def _cell_ball_fraction(center, half, radius, depth):
    return float(_cell_ball_fractions(np.asarray(center)[None, :], half, radius, depth)[0])


def _cell_ball_moments(centers, half, radius, depth):
    """Like :func:`_cell_ball_fractions` but also returns the centroid of
    ``cell ∩ ball`` for each cell (the cell center where the fraction is 0)."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    K, n = centers.shape
    frac = np.zeros(K)
    mom = np.zeros((K, n))
    signs = np.array(list(itertools.product((-0.5, 0.5), repeat=n)))
    cur = centers
    owner = np.arange(K)
    share = np.ones(K)
    cur_half = half
    for level in range(depth + 1):
        a = np.abs(cur)
        far = np.linalg.norm(a + cur_half, axis=1)
        near = np.linalg.norm(np.maximum(a - cur_half, 0.0), axis=1)
        inside = far <= radius
        outside = near >= radius
        np.add.at(frac, owner[inside], share[inside])
        np.add.at(mom, owner[inside], share[inside, None] * cur[inside])
        straddle = ~inside & ~outside
        if level == depth:
            leaf_in = straddle & (np.linalg.norm(cur, axis=1) <= radius)
            np.add.at(frac, owner[leaf_in], share[leaf_in])
            np.add.at(mom, owner[leaf_in], share[leaf_in, None] * cur[leaf_in])
            break
        cur = (cur[straddle][:, None, :] + signs[None, :, :] * cur_half).reshape(-1, n)
        owner = np.repeat(owner[straddle], 2**n)
        share = np.repeat(share[straddle] / 2**n, 2**n)
        cur_half /= 2.0
    centroid = np.where(frac[:, None] > 0.0,
                        mom / np.maximum(frac, 1e-300)[:, None], centers)
    return frac, centroid


@dataclass
class QuadGrid:
    """Quadrature grid over a :class:`BallDomain`.

    nodes are cell centers ``index * h`` with ``|index * h| <= R``; weights
    account for the full measure of ``cell ∩ D`` including slivers of cells
    whose centers fall outside the ball (those are accreted onto the nearest
    kept node so the weights still sum to vol(D)).
    """

    domain: BallDomain
    spacing: float
    nodes: np.ndarray          # (M, n) float
    weights: np.ndarray        # (M,) float
    interior_mask: np.ndarray  # (M,) bool
    lattice_index: np.ndarray  # (M, n) int, node = lattice_index * spacing
    _index_of: dict = field(default_factory=dict, repr=False)
    _neighbor_cache: dict = field(default_factory=dict, repr=False)
    _aux: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def origin_index(self) -> int:
        return self._index_of[(0,) * self.dim]

    def node_at(self, lattice_idx) -> int:
        """Array position of the node with the given lattice index, or -1."""
        return self._index_of.get(tuple(int(i) for i in lattice_idx), -1)

    def neighbor_table(self, axis: int, offset: int) -> np.ndarray:
        """Array positions of each node's neighbor at ``lattice + offset*e_axis``.

        Missing neighbors are -1.  Cached per (axis, offset).
        """
        key = (axis, offset)
        tab = self._neighbor_cache.get(key)
        if tab is None:
            tab = np.empty(self.num_nodes, dtype=np.int64)
            for i in range(self.num_nodes):
                idx = self.lattice_index[i].copy()
                idx[axis] += offset
                tab[i] = self.node_at(idx)
            self._neighbor_cache[key] = tab
        return tab


def boundary_fraction(cell_center, grid: QuadGrid) -> float:
    """Estimate ``|cell ∩ D| / h^n`` for the cell centered at ``cell_center``.

    Deterministic fixed-depth subdivision (see ``SUBDIVISION_DEPTH``).
    """
    h = grid.spacing
    return _cell_ball_fraction(cell_center, h / 2.0, grid.domain.radius, SUBDIVISION_DEPTH)


def build_grid(domain: BallDomain, resolution: int) -> QuadGrid:
    """Build the quadrature grid with ``resolution`` cells per axis.

    ``resolution`` must be even and >= 8 so a lattice point lands on the
    origin and the grid resolves the ball.
    """
    m = int(resolution)
    if m < 8:
        raise ValueError(f"resolution must be >= 8, got {m}")
    if m % 2 != 0:
        raise ValueError(f"resolution must be even (origin anchoring), got {m}")
    n = domain.dim
    R = domain.radius
    h = 2.0 * R / m
    k = m // 2

    rng = range(-k, k + 1)
    kept = []
    kept_idx = []
    for idx in itertools.product(rng, repeat=n):
        x = np.array(idx, dtype=float) * h
        if np.dot(x, x) <= R * R + 1e-12 * R * R:
            kept.append(x)
            kept_idx.append(idx)
    nodes = np.array(kept)
    lattice_index = np.array(kept_idx, dtype=np.int64)
    order = np.lexsort(lattice_index.T[::-1])  # lexicographic in lattice index
    nodes = nodes[order]
    lattice_index = lattice_index[order]
    index_of = {tuple(li): i for i, li in enumerate(lattice_index.tolist())}

    # per-cell weights; cells entirely inside D keep the exact h^n
    M = nodes.shape[0]
    half = h / 2.0
    cell_vol = h**n
    weights = cell_vol * _cell_ball_fractions(nodes, half, R, SUBDIVISION_DEPTH)
    full = np.linalg.norm(np.abs(nodes) + half, axis=1) <= R
    weights[full] = cell_vol

    # accrete slivers of boundary cells whose centers lie outside D onto the
    # nearest kept node, so sum(weights) still approximates vol(D)
    all_idx = np.array(list(itertools.product(rng, repeat=n)), dtype=np.int64)
    all_x = all_idx * h
    dropped = np.sum(all_x * all_x, axis=1) > R * R + 1e-12 * R * R
    cand = all_x[dropped]
    touching = np.linalg.norm(np.maximum(np.abs(cand) - half, 0.0), axis=1) < R
    cand = cand[touching]
    if cand.size:
        fracs = _cell_ball_fractions(cand, half, R, SUBDIVISION_DEPTH)
        for x, frac in zip(cand, fracs):
            if frac <= 0.0:
                continue
            d2 = np.sum((nodes - x) ** 2, axis=1)
            weights[int(np.argmin(d2))] += cell_vol * frac

    radii = np.linalg.norm(nodes, axis=1)
    interior_mask = (R - radii) > 2.0 * h

    grid = QuadGrid(
        domain=domain,
        spacing=h,
        nodes=nodes,
        weights=weights,
        interior_mask=interior_mask,
        lattice_index=lattice_index,
    )
    grid._index_of = index_of
    return grid

# depth used for source-set centroids and fractions; finer than the weight
# subdivision because potential quadrature is the accuracy-critical consumer
SOURCE_DEPTH = 5


@dataclass
class SourceSet:
    """Quadrature sources for volume integrals over ``D``.

    One source per lattice cell that meets the ball: the kept cells first (in
    node order), then the "sliver" cells whose centers fall outside ``D``.
    Partial cells are represented by the centroid of ``cell ∩ D``; each
    source carries the index of the node that donates integrand values.
    """

    points: np.ndarray        # (S, n) quadrature points (centroids)
    weights: np.ndarray       # (S,) measure of cell ∩ D
    owner: np.ndarray         # (S,) int, node index whose f-value the source uses
    cell_center: np.ndarray   # (S, n) center of the owning lattice cell
    cell_lattice: np.ndarray  # (S, n) int lattice index of the cell
    cell_full: np.ndarray     # (S,) bool, cell entirely inside D


def source_set(grid: QuadGrid) -> SourceSet:
    """Build (and cache) the quadrature source set of a grid."""
    cached = grid._aux.get("source_set")
    if cached is not None:
        return cached
    n = grid.dim
    R = grid.domain.radius
    h = grid.spacing
    half = h / 2.0
    cell_vol = h**n
    nodes = grid.nodes
    M = grid.num_nodes

    full = np.linalg.norm(np.abs(nodes) + half, axis=1) <= R
    frac, cen = _cell_ball_moments(nodes, half, R, SOURCE_DEPTH)
    pts = np.where(full[:, None], nodes, cen)
    w = np.where(full, cell_vol, cell_vol * frac)

    # sliver cells: centers outside D but the cell still meets the ball
    k = int(round(R / h))
    rng = range(-k, k + 1)
    all_idx = np.array(list(itertools.product(rng, repeat=n)), dtype=np.int64)
    all_x = all_idx * h
    dropped = np.sum(all_x * all_x, axis=1) > R * R * (1.0 + 1e-12)
    touch = np.linalg.norm(np.maximum(np.abs(all_x[dropped]) - half, 0.0), axis=1) < R
    sl_idx = all_idx[dropped][touch]
    sl_x = all_x[dropped][touch]
    sfrac, scen = _cell_ball_moments(sl_x, half, R, SOURCE_DEPTH)
    keep = sfrac > 1e-12
    sl_idx, sl_x, sfrac, scen = sl_idx[keep], sl_x[keep], sfrac[keep], scen[keep]
    sl_owner = np.empty(len(sl_x), dtype=np.int64)
    for i, x in enumerate(sl_x):
        sl_owner[i] = int(np.argmin(np.sum((nodes - x) ** 2, axis=1)))

    src = SourceSet(
        points=np.vstack([pts, scen]) if len(sl_x) else pts,
        weights=np.concatenate([w, cell_vol * sfrac]) if len(sl_x) else w,
        owner=np.concatenate([np.arange(M, dtype=np.int64), sl_owner]),
        cell_center=np.vstack([nodes, sl_x]) if len(sl_x) else nodes.copy(),
        cell_lattice=np.vstack([grid.lattice_index, sl_idx]),
        cell_full=np.concatenate([full, np.zeros(len(sl_x), dtype=bool)]),
    )
    grid._aux["source_set"] = src
    return src
