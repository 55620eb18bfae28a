"""Built-in problem presets: the classical obstructions (Osserman,
eigenvalue), the critical-exponent equation, prescribed mean curvature,
harmonic coordinates, and local harmonic maps.

Geometry enters through MetricSpec (a symmetric matrix of expression trees
in x) from which Christoffel symbols and inverse metrics are assembled
symbolically, so the certificate machinery can differentiate them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr
from .expr import (Const, Var, NonlinearitySpec, add, div, mul, power, sub,
                   parse_expression, Func)
from .fields import GridField, derivative
from .solver import elliptic_transform


def _x(k):
    return Var(f"x{k}")


def _q(j, k):
    return Var(f"q{j}_{k}")


def _r(j, k, l):
    if k > l:
        k, l = l, k
    return Var(f"r{j}_{k}{l}")


@dataclass
class MetricSpec:
    """Symmetric matrix of expression trees in x1..x_dim."""

    dim: int
    g: list                      # dim x dim nested list of ASTs
    name: str = ""
    require_spd: bool = True     # opt out for degenerate textbook examples

    def __post_init__(self):
        d = self.dim
        if len(self.g) != d or any(len(row) != d for row in self.g):
            raise ValueError("metric matrix shape does not match dim")
        # canonicalize symmetry: the upper triangle wins
        for i in range(d):
            for j in range(i + 1, d):
                self.g[j][i] = self.g[i][j]
        if self.require_spd:
            g0 = self.at_zero()
            if np.min(np.linalg.eigvalsh(g0)) <= 0:
                raise ValueError(f"metric {self.name or ''} not SPD at 0: {g0}")

    def at_zero(self) -> np.ndarray:
        env = {f"x{k}": 0.0 for k in range(1, self.dim + 1)}
        return np.array([[float(self.g[i][j].eval(env)) for j in range(self.dim)]
                         for i in range(self.dim)])

    def eval_at(self, x: np.ndarray) -> np.ndarray:
        """Metric matrices at a batch of points, shape (M, dim, dim)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        env = {f"x{k}": x[:, k - 1] for k in range(1, self.dim + 1)}
        M = x.shape[0]
        out = np.empty((M, self.dim, self.dim))
        for i in range(self.dim):
            for j in range(self.dim):
                v = self.g[i][j].eval(env)
                out[:, i, j] = v
        return out


def euclidean_metric(dim: int, name: str = "euclidean") -> MetricSpec:
    g = [[Const(1.0) if i == j else Const(0.0) for j in range(dim)]
         for i in range(dim)]
    return MetricSpec(dim, g, name)


def metric_from_entries(dim: int, entries: dict, name: str = "",
                        require_spd: bool = True) -> MetricSpec:
    """Metric from `gij` -> expression-text entries (upper triangle enough);
    missing diagonal defaults to 1, missing off-diagonal to 0."""
    g = [[None] * dim for _ in range(dim)]
    for key, text in entries.items():
        if not (len(key) == 3 and key[0] == "g" and key[1:].isdigit()):
            raise ValueError(f"bad metric entry name {key!r} (expected gij)")
        i, j = int(key[1]), int(key[2])
        if not (1 <= i <= dim and 1 <= j <= dim):
            raise ValueError(f"metric index out of range in {key!r}")
        ast = text if isinstance(text, expr.Node) else parse_expression(text, dim, 0)
        g[i - 1][j - 1] = ast
        g[j - 1][i - 1] = ast
    for i in range(dim):
        for j in range(dim):
            if g[i][j] is None:
                g[i][j] = Const(1.0) if i == j else Const(0.0)
    return MetricSpec(dim, g, name, require_spd)


def _det(metric: MetricSpec):
    g = metric.g
    d = metric.dim
    if d == 1:
        return g[0][0]
    if d == 2:
        return sub(mul(g[0][0], g[1][1]), mul(g[0][1], g[1][0]))
    terms = Const(0.0)
    for j in range(3):
        minor = sub(mul(g[1][(j + 1) % 3], g[2][(j + 2) % 3]),
                    mul(g[1][(j + 2) % 3], g[2][(j + 1) % 3]))
        terms = add(terms, mul(g[0][j], minor))
    return terms


def inverse_metric(metric: MetricSpec):
    """g^{ij} as expression trees via adjugate / determinant (dim <= 3)."""
    d = metric.dim
    g = metric.g
    det = _det(metric)
    if d == 1:
        return [[div(Const(1.0), g[0][0])]], det
    if d == 2:
        adj = [[g[1][1], mul(Const(-1.0), g[0][1])],
               [mul(Const(-1.0), g[1][0]), g[0][0]]]
        return [[div(adj[i][j], det) for j in range(2)] for i in range(2)], det
    inv = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            # cofactor C_ji / det (adjugate transpose); metric symmetry makes
            # the transpose cosmetic but keep the general formula
            rows = [r for r in range(3) if r != j]
            cols = [c for c in range(3) if c != i]
            minor = sub(mul(g[rows[0]][cols[0]], g[rows[1]][cols[1]]),
                        mul(g[rows[0]][cols[1]], g[rows[1]][cols[0]]))
            sign = -1.0 if (i + j) % 2 else 1.0
            inv[i][j] = div(mul(Const(sign), minor), det)
    return inv, det


def christoffel(metric: MetricSpec):
    """Christoffel symbols of the metric as trees: result[i][j][k] = Γ^i_jk."""
    d = metric.dim
    g = metric.g
    ginv, _ = inverse_metric(metric)
    out = [[[Const(0.0) for _ in range(d)] for _ in range(d)] for _ in range(d)]
    for i in range(d):
        for j in range(d):
            for k in range(j, d):
                s = Const(0.0)
                for l in range(d):
                    bracket = sub(add(g[k][l].diff(f"x{j + 1}"),
                                      g[j][l].diff(f"x{k + 1}")),
                                  g[j][k].diff(f"x{l + 1}"))
                    s = add(s, mul(ginv[i][l], bracket))
                gamma = mul(Const(0.5), s)
                out[i][j][k] = gamma
                out[i][k][j] = gamma
    return out


@dataclass
class ProblemPreset:
    """A ready-to-run problem: nonlinearity, mode, and initial values."""

    name: str
    spec: NonlinearitySpec
    mode: str
    dim: int
    components: int
    c0: np.ndarray = None
    c1: np.ndarray = None
    metric: MetricSpec = None
    transform: np.ndarray = None       # coordinate map used to normalize g(0)
    expected: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.c0 is None:
            self.c0 = np.zeros(self.components)
        if self.c1 is None:
            self.c1 = np.zeros((self.components, self.dim))
        self.c0 = np.asarray(self.c0, dtype=float).reshape(self.components)
        self.c1 = np.asarray(self.c1, dtype=float).reshape(
            self.components, self.dim)


def harmonic_map_system(domain_dim: int, target_metric: MetricSpec, c1,
                        domain_metric: MetricSpec = None) -> ProblemPreset:
    """The harmonic-map system from a Euclidean ball into (R^N, g).

    a^i = -sum_alpha Γ^i_jk(u) ∂_alpha u^j ∂_alpha u^k; mode thm12 with
    u(0) = 0 (normal coordinates at the target point) and ∇u(0) = c1, the
    prescribed tangent map.  Curved domain metrics are not supported.
    """
    if domain_metric is not None:
        for i in range(domain_metric.dim):
            for j in range(domain_metric.dim):
                want = 1.0 if i == j else 0.0
                entry = domain_metric.g[i][j]
                if not (isinstance(entry, Const) and entry.value == want):
                    raise ValueError("only the Euclidean domain metric is supported")
    n = domain_dim
    N = target_metric.dim
    c1 = np.asarray(c1, dtype=float).reshape(N, n)
    to_p = {f"x{l}": Var(f"p{l}") for l in range(1, N + 1)}
    gamma = christoffel(target_metric)
    asts = []
    for i in range(N):
        s = Const(0.0)
        for alpha in range(1, n + 1):
            for j in range(N):
                for k in range(N):
                    s = add(s, mul(gamma[i][j][k].subst(to_p),
                                   mul(_q(j + 1, alpha), _q(k + 1, alpha))))
        asts.append(Const(0.0) if isinstance(s, Const) and s.value == 0.0
                    else mul(Const(-1.0), s))
    spec = NonlinearitySpec(n, N, asts)
    return ProblemPreset(
        name=f"harmonic_map[{target_metric.name or 'target'}]",
        spec=spec, mode="thm12", dim=n, components=N,
        c0=np.zeros(N), c1=c1, metric=target_metric,
        expected={"gradient_at_origin": "c1"})


def harmonic_coordinates_system(metric: MetricSpec) -> ProblemPreset:
    """Harmonic coordinates of a metric: Δ_g x^k = 0 for k = 1..n.

    Written as Δ u^k = (δ^{ij} - g^{ij}(x)) D_ij u^k - b^j(x) ∂_j u^k with
    b^j = (1/√g) ∂_i(√g g^{ij}); mode thm12 with u(0) = 0, ∇u(0) = I.  When
    g(0) ≠ I the coordinates are first normalized by the linear map P with
    Pᵗ g(0) P = I (recorded in the preset's transform field).
    """
    n = metric.dim
    g0 = metric.at_zero()
    transform = None
    if not np.allclose(g0, np.eye(n), atol=1e-12):
        P, _ = elliptic_transform(g0)
        subst = {}
        for i in range(1, n + 1):
            s = Const(0.0)
            for j in range(1, n + 1):
                s = add(s, mul(Const(P[i - 1, j - 1]), _x(j)))
            subst[f"x{i}"] = s
        pulled = [[Const(0.0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                s = Const(0.0)
                for k in range(n):
                    for l in range(n):
                        s = add(s, mul(Const(P[k, i] * P[l, j]),
                                       metric.g[k][l].subst(subst)))
                pulled[i][j] = s
        metric = MetricSpec(n, pulled, name=(metric.name or "g") + "_normalized")
        transform = P

    ginv, det = inverse_metric(metric)
    sq = Func("sqrt", det)
    b_num = []
    for j in range(n):
        s = Const(0.0)
        for i in range(n):
            s = add(s, mul(sq, ginv[i][j]).diff(f"x{i + 1}"))
        b_num.append(s)
    asts = []
    for k in range(1, n + 1):
        s = Const(0.0)
        for i in range(n):
            for j in range(i, n):
                if i == j:
                    coef = sub(Const(1.0), ginv[i][i])
                else:
                    coef = mul(Const(-2.0), ginv[i][j])
                s = add(s, mul(coef, _r(k, i + 1, j + 1)))
        for j in range(n):
            s = sub(s, mul(div(b_num[j], sq), _q(k, j + 1)))
        asts.append(s)
    spec = NonlinearitySpec(n, n, asts)
    return ProblemPreset(
        name=f"harmonic_coordinates[{metric.name or 'g'}]",
        spec=spec, mode="thm12", dim=n, components=n,
        c0=np.zeros(n), c1=np.eye(n), metric=metric, transform=transform,
        expected={"gradient_at_origin": "identity"})


def divergence_form_residual(metric: MetricSpec, u: GridField) -> float:
    """max over interior nodes of |∂_i(√g g^{ij} ∂_j u^k)| for all k."""
    grid = u.grid
    n = grid.dim
    if metric.dim != n:
        raise ValueError("metric dimension does not match the grid")
    ginv, det = inverse_metric(metric)
    sq = Func("sqrt", det)
    env = {f"x{k}": grid.nodes[:, k - 1] for k in range(1, n + 1)}
    M = grid.num_nodes

    def ev(ast):
        return np.broadcast_to(np.asarray(ast.eval(env), dtype=float), (M,))

    resid = np.zeros_like(u.values)
    for i in range(n):
        for j in range(n):
            coef = ev(mul(sq, ginv[i][j]))
            beta = [0] * n
            beta[i] += 1
            beta[j] += 1
            resid += coef[:, None] * derivative(u, tuple(beta)).values
            dcoef = ev(mul(sq, ginv[i][j]).diff(f"x{i + 1}"))
            beta1 = [0] * n
            beta1[j] = 1
            resid += dcoef[:, None] * derivative(u, tuple(beta1)).values
    mask = grid.interior_mask
    return float(np.max(np.abs(resid[mask]))) if np.any(mask) else 0.0


def mean_curvature_system(H, dim: int) -> ProblemPreset:
    """Prescribed mean curvature of a graph over an n-ball.

    (1+|Du|²)Δu - D_i u D_j u D_ij u = n H(x)(1+|Du|²)^{3/2} divided through
    by (1+|Du|²) gives Δu = a(x, q, r) with a = (Σ q_i q_j r_ij)/(1+|q|²)
    + n H (1+|q|²)^{1/2}.  Mode thm11 (needs H(0) = 0 for the hypothesis;
    nonzero H(0) is recorded in expected and requires a forced run).
    """
    n = dim
    Hast = H if isinstance(H, expr.Node) else parse_expression(str(H), n, 0)
    q2 = Const(0.0)
    for i in range(1, n + 1):
        q2 = add(q2, mul(_q(1, i), _q(1, i)))
    one_q2 = add(Const(1.0), q2)
    num = Const(0.0)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            num = add(num, mul(mul(_q(1, i), _q(1, j)), _r(1, i, j)))
    a = add(div(num, one_q2),
            mul(mul(Const(float(n)), Hast), power(one_q2, 0.5)))
    spec = NonlinearitySpec(n, 1, [a])
    H0 = float(Hast.eval({f"x{k}": 0.0 for k in range(1, n + 1)}))
    expected = {}
    if H0 != 0.0:
        expected["a0_nonzero"] = n * H0
        expected["note"] = ("a(0) != 0: outside the thm11 hypothesis; "
                            "run with force and watch the eta margin")
    return ProblemPreset(name="mean_curvature", spec=spec, mode="thm11",
                         dim=n, components=1, expected=expected)


def preset_catalog(n: int = 2) -> list:
    """The named presets the CLI exposes.  n selects the dimension where a
    preset is dimension-generic; fixed-dimension presets ignore it."""
    presets = [
        ProblemPreset(name="zero", spec=expr.parse("a1 = 0", n, 1),
                      mode="thm13", dim=n, components=1,
                      expected={"admissible": True}),
        ProblemPreset(name="quadratic", spec=expr.parse("a1 = p1^2", n, 1),
                      mode="thm13", dim=n, components=1,
                      expected={"admissible": True}),
        ProblemPreset(name="osserman", spec=expr.parse("a1 = exp(2*p1)", n, 1),
                      mode="thm12", dim=n, components=1,
                      expected={"radius_shrinks_with_c0": True}),
        ProblemPreset(name="eigenvalue", spec=expr.parse("a1 = p1", n, 1),
                      mode="thm13", dim=n, components=1,
                      expected={"hypothesis_fails": "grad a(0) != 0"}),
        ProblemPreset(name="critical_exponent",
                      spec=expr.parse("a1 = p1^5", 3, 1),
                      mode="thm13", dim=3, components=1,
                      expected={"admissible": True, "sign_change": True}),
        mean_curvature_system("0", n),
        harmonic_map_system(2, euclidean_metric(2, "flat"), np.eye(2)),
        harmonic_map_system(
            2, metric_from_entries(
                2, {"g11": "exp(2*x1)", "g22": "exp(2*x1)"}, "conformal"),
            np.eye(2)),
        harmonic_coordinates_system(
            metric_from_entries(2, {"g11": "1 + x1^2"}, "bump")),
    ]
    return presets


def preset_by_name(name: str, n: int = 2) -> ProblemPreset:
    for p in preset_catalog(n):
        if p.name == name or p.name.split("[")[0] == name:
            return p
    raise KeyError(f"unknown preset {name!r}")
