"""Contraction certificates for the fixed-point construction.

For a nonlinearity a(x, p, q, r) the iterates live in a compact box
E(R, gamma) determined by the norm bound gamma and the domain radius R.
This module bounds the sup/Hoelder/Lipschitz constants of a and its first
partials over that box by deterministic sampling, aggregates them into the
contraction number delta(R, gamma) and the displacement number eta(R, gamma),
and sweeps (R, gamma) for an admissible pair (delta < 1 and eta < gamma/2).

The constants are sampled lower bounds of the true sups (labeled empirical
throughout); the verdict is necessary evidence for contraction, not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import itertools

import numpy as np
from scipy.stats import qmc

from .expr import (NonlinearitySpec, all_variables, diff, hypothesis_check,
                   zero_env, HypothesisReport)

# growth factors of the iterate box: along the iteration u stays within
# ||u|| <= 3 gamma R^2, ||grad u|| <= 3n gamma R, ||hess u|| <= 2 gamma,
# and the p-range gets one more factor 3n/2 * R from the vanishing order
P_FACTOR = lambda n: (3 * n) ** 2 / 2.0
Q_FACTOR = lambda n: 3 * n
R_FACTOR = 2.0

# sweep control
SWEEP_FACTOR = 0.5
SWEEP_MAX_STEPS = 40

# cap on the number of active variables for which exact box corners are
# added to the sample set (2^c corner points)
_CORNER_CAP = 13


@dataclass(frozen=True)
class EBox:
    """The compact box E(R, gamma) in (x, p, q, r) space."""

    R: float
    gamma: float
    dim: int
    components: int

    def __post_init__(self):
        if not (self.R > 0 and self.gamma > 0):
            raise ValueError("R and gamma must be positive")

    @property
    def p_bound(self) -> float:
        return P_FACTOR(self.dim) * self.R**2 * self.gamma

    @property
    def q_bound(self) -> float:
        return Q_FACTOR(self.dim) * self.R * self.gamma

    @property
    def r_bound(self) -> float:
        return R_FACTOR * self.gamma

    def variable_ranges(self) -> dict:
        """Half-width of the sampling interval for every variable."""
        xs, ps, qs, rs = all_variables(self.dim, self.components)
        out = {name: self.R for name in xs}
        out.update({name: self.p_bound for name in ps})
        out.update({name: self.q_bound for name in qs})
        out.update({name: self.r_bound for name in rs})
        return out


@dataclass
class ConstantTable:
    """Empirical sup/Hoelder/Lipschitz constants of a over an EBox.

    A, B, C are the sups of |grad_p a|, |grad_q a|, |grad_r a|; D is sup|a|.
    Ha_* are alpha-Hoelder constants of the same quantities over the box
    (bounded per variable by sup of the second partials), H1_* the Lipschitz
    constants in the r variables.  All entries are lower-bound-empirical:
    sampled maxima, not certified enclosures.
    """

    A: float
    B: float
    C: float
    D: float
    Ha_A: float
    Ha_B: float
    Ha_C: float
    Ha_D: float
    H1_A: float
    H1_B: float
    H1_C: float
    H1_D: float
    a0: float          # max component |a(0, ..., 0)|
    alpha: float
    dim: int
    components: int

    def as_dict(self) -> dict:
        keys = ["A", "B", "C", "D", "Ha_A", "Ha_B", "Ha_C", "Ha_D",
                "H1_A", "H1_B", "H1_C", "H1_D", "a0", "alpha"]
        return {k: getattr(self, k) for k in keys}


def aggregation_constant(n: int, N: int) -> float:
    """The counting constant K(n, N) of the delta/eta aggregation.

    Composing a with (u, grad u, hess u) multiplies each derivative family
    by the number of its terms times the box growth factor: N p-terms with
    factor (3n)^2/2, nN q-terms with factor 3n, n^2 N r-terms with factor 2.
    The largest product, N (3n)^2 / 2, is used for every family, which is
    conservative but keeps a single documented constant.
    """
    return N * (3 * n) ** 2 / 2.0


# ---------------------------------------------------------------------------
# sampling machinery

_sobol_cache: dict = {}


def _unit_samples(d: int, count: int) -> np.ndarray:
    """Fixed low-discrepancy points in [0, 1]^d (cached, deterministic)."""
    key = (d, count)
    pts = _sobol_cache.get(key)
    if pts is None:
        eng = qmc.Sobol(d, scramble=False)
        pts = eng.random(count)
        _sobol_cache[key] = pts
    return pts


def _sample_count(samples_per_axis: int, d: int) -> int:
    raw = samples_per_axis ** min(d, 5)
    raw = min(max(raw, 512), 8192)
    return 1 << int(np.ceil(np.log2(raw)))


def _project_x_to_ball(env: dict, box: EBox) -> None:
    """Clip the x-coordinates of a sample batch onto the closed ball."""
    xs = [f"x{k}" for k in range(1, box.dim + 1)]
    cols = [env[v] for v in xs if isinstance(env[v], np.ndarray)]
    if len(cols) != box.dim:
        return  # some x held at 0: stays inside the ball after clipping
    norm = np.sqrt(sum(c * c for c in cols))
    scale = np.where(norm > box.R, box.R / np.maximum(norm, 1e-300), 1.0)
    for v in xs:
        env[v] = env[v] * scale


def _sample_envs(active: list, box: EBox, samples_per_axis: int) -> list:
    """Evaluation environments covering the box: low-discrepancy points,
    plus the exact corners when the active dimension is small."""
    ranges = box.variable_ranges()
    base = zero_env(box.dim, box.components)
    envs = []
    d = len(active)
    if d == 0:
        return [dict(base)]
    pts = _unit_samples(d, _sample_count(samples_per_axis, d))
    env = dict(base)
    for k, v in enumerate(active):
        env[v] = (2.0 * pts[:, k] - 1.0) * ranges[v]
    _project_x_to_ball(env, box)
    envs.append(env)
    if d <= _CORNER_CAP:
        corners = np.array(list(itertools.product((-1.0, 1.0), repeat=d)))
        env = dict(base)
        for k, v in enumerate(active):
            env[v] = corners[:, k] * ranges[v]
        _project_x_to_ball(env, box)
        envs.append(env)
    return envs


def _sup_abs(ast, box: EBox, samples_per_axis: int) -> float:
    active = sorted(ast.variables())
    best = 0.0
    for env in _sample_envs(active, box, samples_per_axis):
        # an overflowing sup is a meaningful answer (the box is too big),
        # so let inf through instead of warning
        with np.errstate(over="ignore"):
            v = np.abs(np.asarray(ast.eval(env), dtype=float))
        best = max(best, float(np.max(v)) if v.ndim else float(v))
    return best


def _partials(spec: NonlinearitySpec):
    """First partials of every component by family, cached on the spec."""
    cached = getattr(spec, "_partial_cache", None)
    if cached is not None:
        return cached
    xs, ps, qs, rs = all_variables(spec.dim, spec.components)
    fams = {
        "A": [a.diff(v) for a in spec.asts for v in ps],
        "B": [a.diff(v) for a in spec.asts for v in qs],
        "C": [a.diff(v) for a in spec.asts for v in rs],
        "D": list(spec.asts),
    }
    spec._partial_cache = fams
    return fams


def _family_constants(asts, box: EBox, alpha: float, samples_per_axis: int):
    """(sup, Hoelder, Lipschitz-in-r) of a family of expressions over the box.

    The Hoelder constant is bounded variable by variable:
    H_alpha[g] <= sum_v sup|dg/dv| (range_v)^(1-alpha); the Lipschitz-in-r
    constant is sum over r-variables of sup|dg/dr|.
    """
    ranges = box.variable_ranges()
    _, _, _, rs = all_variables(box.dim, box.components)
    rset = frozenset(rs)
    sup = 0.0
    hoeld = 0.0
    lip_r = 0.0
    for g in asts:
        sup = max(sup, _sup_abs(g, box, samples_per_axis))
        h = 0.0
        lr = 0.0
        for v in sorted(g.variables()):
            s = _sup_abs(g.diff(v), box, samples_per_axis)
            h += s * (2.0 * ranges[v]) ** (1.0 - alpha)
            if v in rset:
                lr += s
        hoeld = max(hoeld, h)
        lip_r = max(lip_r, lr)
    return sup, hoeld, lip_r


def bound_constants(spec: NonlinearitySpec, box: EBox,
                    samples_per_axis: int = 4, alpha: float = 0.5) -> ConstantTable:
    """Empirical constant table of ``spec`` over ``box``.

    Sups are sampled on a fixed low-discrepancy lattice plus box corners
    (when the active dimension allows); Hoelder and Lipschitz constants come
    from the symbolic second partials.  Expression domain errors inside the
    box (for example ln of an interval containing 0) propagate.
    """
    if samples_per_axis < 3:
        raise ValueError("samples_per_axis must be >= 3")
    if spec.dim != box.dim or spec.components != box.components:
        raise ValueError("spec and box disagree on (n, N)")
    fams = _partials(spec)
    vals = {}
    for name in ("A", "B", "C", "D"):
        vals[name] = _family_constants(fams[name], box, alpha, samples_per_axis)
    a0 = max(abs(float(a.eval(zero_env(spec.dim, spec.components))))
             for a in spec.asts)
    return ConstantTable(
        A=vals["A"][0], B=vals["B"][0], C=vals["C"][0], D=vals["D"][0],
        Ha_A=vals["A"][1], Ha_B=vals["B"][1], Ha_C=vals["C"][1], Ha_D=vals["D"][1],
        H1_A=vals["A"][2], H1_B=vals["B"][2], H1_C=vals["C"][2], H1_D=vals["D"][2],
        a0=a0, alpha=alpha, dim=spec.dim, components=spec.components)


# ---------------------------------------------------------------------------
# delta / eta aggregation


def delta_eta(table: ConstantTable, C_op: float, R: float, gamma: float):
    """Contraction number delta and displacement number eta.

    Per family F: delta_F = F + (2R)^a (1 + 2N (3nR)^a g^a + 2N g) Ha_F
                            + 2N g H1_F,
    then delta = C_op K (R^2 delta_A + R delta_B + delta_C) and
    eta = C_op K (|a(0)| + R delta_D + gamma delta), with K the documented
    aggregation constant.  Returns (delta, eta, parts).
    """
    n, N, a = table.dim, table.components, table.alpha
    g = gamma
    common = (2.0 * R) ** a * (1.0 + 2.0 * N * (3.0 * n * R) ** a * g**a
                               + 2.0 * N * g)

    def part(F, Ha, H1):
        return F + common * Ha + 2.0 * N * g * H1

    dA = part(table.A, table.Ha_A, table.H1_A)
    dB = part(table.B, table.Ha_B, table.H1_B)
    dC = part(table.C, table.Ha_C, table.H1_C)
    dD = part(table.D, table.Ha_D, table.H1_D)
    K = aggregation_constant(n, N)
    delta = C_op * K * (R**2 * dA + R * dB + dC)
    eta = C_op * K * (table.a0 + R * dD + g * delta)
    parts = {"delta_A": dA, "delta_B": dB, "delta_C": dC, "delta_D": dD,
             "K": K, "C_op": C_op}
    return delta, eta, parts


@dataclass
class ContractionCertificate:
    """Outcome of an admissibility search for one (spec, mode)."""

    mode: str
    R: float
    gamma: float
    box: EBox
    table: ConstantTable
    C_op: float
    delta: float
    eta: float
    parts: dict
    verdict: str                      # "admissible" | "not_admissible"
    hypothesis: HypothesisReport
    binding: str = ""                 # why the last step failed
    sweep: list = field(default_factory=list)  # (R, gamma, delta, eta) rows

    @property
    def admissible(self) -> bool:
        return self.verdict == "admissible"

    def to_text(self) -> str:
        lines = [
            f"mode = {self.mode}",
            f"verdict = {self.verdict}",
            f"R = {self.R:.17g}",
            f"gamma = {self.gamma:.17g}",
            f"delta = {self.delta:.17g}",
            f"eta = {self.eta:.17g}",
            f"eta_limit = {self.gamma / 2.0:.17g}",
            f"C_op = {self.C_op:.17g}",
            f"K = {self.parts['K']:.17g}",
            f"p_bound = {self.box.p_bound:.17g}",
            f"q_bound = {self.box.q_bound:.17g}",
            f"r_bound = {self.box.r_bound:.17g}",
        ]
        for k, v in self.table.as_dict().items():
            lines.append(f"table.{k} = {v:.17g}")
        for k in ("delta_A", "delta_B", "delta_C", "delta_D"):
            lines.append(f"{k} = {self.parts[k]:.17g}")
        lines.append(f"constants_quality = lower-bound-empirical")
        lines.append(f"hypothesis = {'pass' if self.hypothesis.passed else 'fail'}")
        for f_ in self.hypothesis.failures:
            lines.append(f"hypothesis_failure = {f_}")
        if self.binding:
            lines.append(f"binding_constraint = {self.binding}")
        lines.append(f"sweep_steps = {len(self.sweep)}")
        return "\n".join(lines) + "\n"


def certify_at(spec, mode, R, gamma, C_op, samples_per_axis, alpha, hyp):
    box = EBox(R=R, gamma=gamma, dim=spec.dim, components=spec.components)
    table = bound_constants(spec, box, samples_per_axis, alpha)
    delta, eta, parts = delta_eta(table, C_op, R, gamma)
    ok = hyp.passed and delta < 1.0 and eta < gamma / 2.0
    if not hyp.passed:
        binding = "hypothesis"
    elif delta >= 1.0:
        binding = "delta >= 1"
    elif eta >= gamma / 2.0:
        binding = "eta >= gamma/2"
    else:
        binding = ""
    return ContractionCertificate(
        mode=mode, R=R, gamma=gamma, box=box, table=table, C_op=C_op,
        delta=delta, eta=eta, parts=parts,
        verdict="admissible" if ok else "not_admissible",
        hypothesis=hyp, binding=binding)


def search_admissible(spec: NonlinearitySpec, mode: str,
                      R_range=(1.0,), gamma_range=(1.0,),
                      C_op: float = 0.5, samples_per_axis: int = 4,
                      alpha: float = 0.5,
                      max_steps: int = SWEEP_MAX_STEPS) -> ContractionCertificate:
    """Geometric sweep (factor 1/2) for an admissible (R, gamma).

    thm13 fixes R = R_range[0] and shrinks gamma from gamma_range[0];
    thm11 and thm12 fix gamma = gamma_range[0] and shrink R from R_range[0].
    For thm12 the starting gamma is raised, if needed, until it clears the
    displacement floor C_op K |a(0)| that survives the R -> 0 limit.
    Returns the first admissible certificate, else the last one with the
    binding constraint identified.
    """
    if mode not in ("thm11", "thm12", "thm13"):
        raise ValueError(f"unknown mode {mode!r}")
    hyp = hypothesis_check(spec, mode)
    R0 = float(R_range[0])
    g0 = float(gamma_range[0])

    if mode == "thm12":
        a0 = max(abs(float(a.eval(zero_env(spec.dim, spec.components))))
                 for a in spec.asts)
        K = aggregation_constant(spec.dim, spec.components)
        floor = 4.0 * C_op * K * a0
        while g0 <= floor:
            g0 *= 2.0

    sweep = []
    cert = None
    for step in range(max_steps):
        if mode == "thm13":
            R, gamma = R0, g0 * SWEEP_FACTOR**step
        else:
            R, gamma = R0 * SWEEP_FACTOR**step, g0
        cert = certify_at(spec, mode, R, gamma, C_op, samples_per_axis,
                           alpha, hyp)
        sweep.append((R, gamma, cert.delta, cert.eta))
        cert.sweep = list(sweep)
        if not hyp.passed:
            break
        if cert.admissible:
            break
    return cert
