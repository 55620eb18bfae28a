"""Batch front door: read a problem config, run the certificate and/or the
fixed-point solver, and emit CSV artifacts plus a plain-text report.

Config files are line oriented: `key = value` settings mixed with
nonlinearity lines `a1 = expr`, `a2 = expr`, ...  Exactly one of
`problem = <preset>` and inline `ai =` lines must be present.  The verbs are
certify, solve, sweep, and presets; exit codes follow the documented
contract (0 ok, 1 usage or parse error, 2 certificate not admissible or
refused, 3 diverged).
"""

from __future__ import annotations

import argparse
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import potential
from .applications import (harmonic_coordinates_system, harmonic_map_system,
                           mean_curvature_system, metric_from_entries,
                           preset_by_name, preset_catalog)
from .certificate import (SWEEP_FACTOR, SWEEP_MAX_STEPS, certify_at,
                          search_admissible)
from .expr import (EvalDomainError, ExprSyntaxError, NonlinearitySpec,
                   hypothesis_check, parse, shifted_by_affine)
from .fields import gradient_at_origin, sup_norm, to_csv, value_at_origin
from .grid import BallDomain, build_grid
from .potential import operator_norm_probe
from .solver import CertificateRefused, DivergenceError, make_seed, solve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_ADMISSIBLE = 2
EXIT_DIVERGED = 3


class ConfigError(ValueError):
    """A malformed or inconsistent run configuration."""


_INT_KEYS = {"n", "N", "resolution", "max_iter", "threads", "rng_seed",
             "samples_per_axis", "sweep_steps", "probe_trials",
             "probe_resolution"}
_FLOAT_KEYS = {"R", "gamma", "alpha", "tol"}
_BOOL_KEYS = {"force", "R_sweep", "gamma_sweep"}
_STR_KEYS = {"problem", "mode", "out", "seed", "c_op", "c0", "c1"}

_EXPR_LINE = re.compile(r"^a(\d+)\s*=")
_SEED_LINE = re.compile(r"^seed_a(\d+)$")
_METRIC_LINE = re.compile(r"^g(\d)(\d)$")


@dataclass
class RunConfig:
    """Resolved settings of one run (defaults already applied)."""

    problem: str = ""
    inline: list = field(default_factory=list)   # raw "ai = expr" lines
    mode: str = ""
    n: int = 2
    N: int = 1
    R: float = 1.0
    gamma: float = 1.0
    R_sweep: bool = False
    gamma_sweep: bool = False
    alpha: float = 0.5
    resolution: int = 16
    seed: str = "default"                        # "default" | "random"
    seed_a: dict = field(default_factory=dict)   # component -> matrix text
    metric: dict = field(default_factory=dict)   # "gij" -> expression text
    H: str = ""                                  # mean-curvature expression
    c0: str = ""
    c1: str = ""
    tol: float = None
    max_iter: int = 200
    out: str = "."
    force: bool = False
    threads: int = 1
    rng_seed: int = 0
    c_op: str = "probe"
    samples_per_axis: int = 4
    sweep_steps: int = SWEEP_MAX_STEPS
    probe_trials: int = 5
    probe_resolution: int = 16

    def set(self, key: str, value: str) -> None:
        value = value.strip()
        if _SEED_LINE.match(key):
            self.seed_a[int(key[6:])] = value
            return
        if _METRIC_LINE.match(key):
            self.metric[key] = value
            return
        if key == "H":
            self.H = value
            return
        try:
            if key in _INT_KEYS:
                setattr(self, key, int(value))
            elif key in _FLOAT_KEYS:
                setattr(self, key, float(value))
            elif key in _BOOL_KEYS:
                if value.lower() not in ("true", "false", "yes", "no", "1", "0"):
                    raise ValueError(value)
                setattr(self, key, value.lower() in ("true", "yes", "1"))
            elif key in _STR_KEYS:
                setattr(self, key, value)
            else:
                raise ConfigError(f"unknown config key '{key}'")
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(f"bad value for '{key}': {value!r}")

    @property
    def sweeping(self) -> bool:
        return self.R_sweep or self.gamma_sweep


def parse_config(text: str, overrides=()) -> RunConfig:
    cfg = RunConfig()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if _EXPR_LINE.match(line):
            cfg.inline.append(line)
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value'")
        key, value = line.split("=", 1)
        cfg.set(key.strip(), value)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set needs KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        if _EXPR_LINE.match(item.strip()):
            cfg.inline.append(item.strip())
        else:
            cfg.set(key.strip(), value)
    if bool(cfg.problem) == bool(cfg.inline):
        raise ConfigError(
            "exactly one of 'problem = <preset>' and inline 'ai = expr' "
            "lines is required")
    return cfg


@dataclass
class Problem:
    """A fully resolved problem: spec, mode, dimensions, initial values."""

    spec: NonlinearitySpec
    mode: str
    n: int
    N: int
    c0: np.ndarray
    c1: np.ndarray

    @property
    def cert_spec(self) -> NonlinearitySpec:
        """The spec seen by the certificate (affine part absorbed)."""
        if np.any(self.c0 != 0.0) or np.any(self.c1 != 0.0):
            return shifted_by_affine(self.spec, self.c0, self.c1)
        return self.spec


def _parse_vector(text: str, length: int, what: str) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.replace(",", " ").split()])
    except ValueError:
        raise ConfigError(f"bad {what}: {text!r}")
    if v.size != length:
        raise ConfigError(f"{what} needs {length} entries, got {v.size}")
    return v


def _parse_matrix(text: str, rows: int, cols: int, what: str) -> np.ndarray:
    parts = [p for p in text.split(";") if p.strip()]
    if len(parts) != rows:
        raise ConfigError(f"{what} needs {rows} rows separated by ';'")
    return np.stack([_parse_vector(p, cols, what) for p in parts])


def _custom_preset(cfg: RunConfig):
    """Metric or curvature presets rebuilt from config expression lines."""
    if cfg.metric:
        if cfg.problem not in ("harmonic_coordinates", "harmonic_map"):
            raise ConfigError("gij lines need problem = harmonic_coordinates "
                              "or harmonic_map")
        seen = max(max(int(k[1]), int(k[2])) for k in cfg.metric)
        if cfg.problem == "harmonic_coordinates":
            dim = max(cfg.n, seen)
            return harmonic_coordinates_system(
                metric_from_entries(dim, cfg.metric, name="config"))
        dim = max(cfg.N, seen)
        metric = metric_from_entries(dim, cfg.metric, name="config")
        return harmonic_map_system(cfg.n, metric, np.eye(metric.dim, cfg.n))
    if cfg.H and cfg.problem == "mean_curvature":
        return mean_curvature_system(cfg.H, cfg.n)
    return None


def build_problem(cfg: RunConfig) -> Problem:
    if cfg.problem:
        preset = _custom_preset(cfg) or preset_by_name(cfg.problem, cfg.n)
        spec, n, N = preset.spec, preset.dim, preset.components
        mode = cfg.mode or preset.mode
        c0, c1 = preset.c0.copy(), preset.c1.copy()
    else:
        mode = cfg.mode or "thm13"
        n, N = cfg.n, cfg.N
        spec = parse("\n".join(cfg.inline), n, N)
        c0, c1 = np.zeros(N), np.zeros((N, n))
    if mode not in ("thm11", "thm12", "thm13"):
        raise ConfigError(f"unknown mode '{mode}'")
    if cfg.c0:
        c0 = _parse_vector(cfg.c0, N, "c0")
    if cfg.c1:
        c1 = _parse_matrix(cfg.c1, N, n, "c1")
    if mode != "thm12" and (np.any(c0 != 0.0) or np.any(c1 != 0.0)):
        raise ConfigError("c0/c1 are only meaningful in mode thm12")
    return Problem(spec=spec, mode=mode, n=n, N=N, c0=c0, c1=c1)


_probe_cache: dict = {}


def resolve_c_op(cfg: RunConfig, n: int) -> float:
    """The operator-norm constant: numeric from the config, or the cached
    empirical probe on the unit ball (the constant is radius independent)."""
    if cfg.c_op != "probe":
        try:
            return float(cfg.c_op)
        except ValueError:
            raise ConfigError(f"c_op must be a number or 'probe', "
                              f"got {cfg.c_op!r}")
    key = (n, cfg.probe_resolution, cfg.probe_trials, cfg.alpha, cfg.rng_seed)
    val = _probe_cache.get(key)
    if val is None:
        grid = build_grid(BallDomain(n, 1.0), cfg.probe_resolution)
        val = operator_norm_probe(cfg.probe_trials, grid, cfg.alpha,
                                  seed=cfg.rng_seed)
        _probe_cache[key] = val
    return val


def seed_coefficients(cfg: RunConfig, n: int, N: int, gamma: float) -> np.ndarray:
    """The (N, n, n) symmetric trace-free quadratic seed coefficients.

    Explicit `seed_a<j>` rows win; `seed = random` draws from the config RNG
    seed; the default puts gamma/8 on the (1,2) entry of every component.
    """
    if cfg.seed_a:
        a = np.zeros((N, n, n))
        for j, text in cfg.seed_a.items():
            if not 1 <= j <= N:
                raise ConfigError(f"seed_a{j}: component out of range")
            a[j - 1] = _parse_matrix(text, n, n, f"seed_a{j}")
        return a
    if cfg.seed == "random":
        rng = np.random.default_rng(cfg.rng_seed)
        a = np.zeros((N, n, n))
        for j in range(N):
            m = rng.standard_normal((n, n))
            m = 0.5 * (m + m.T)
            m -= np.trace(m) / n * np.eye(n)
            peak = np.max(np.abs(m))
            a[j] = m * (gamma / 8.0 / peak) if peak > 0 else 0.0
        return a
    if cfg.seed != "default":
        raise ConfigError(f"seed must be 'default', 'random', or explicit "
                          f"seed_a<j> rows, got {cfg.seed!r}")
    a = np.zeros((N, n, n))
    a[:, 0, 1] = a[:, 1, 0] = gamma / 8.0
    return a


# ---------------------------------------------------------------------------
# artifact writers


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _config_echo(cfg: RunConfig, prob: Problem) -> list:
    lines = []
    if cfg.problem:
        lines.append(f"problem = {cfg.problem}")
    for expr_line in cfg.inline:
        lines.append(expr_line)
    lines += [
        f"mode = {prob.mode}",
        f"n = {prob.n}",
        f"N = {prob.N}",
        f"R = {_fmt(cfg.R)}",
        f"gamma = {_fmt(cfg.gamma)}",
        f"alpha = {_fmt(cfg.alpha)}",
        f"resolution = {cfg.resolution}",
        f"seed = {cfg.seed}",
        f"rng_seed = {cfg.rng_seed}",
        f"sweep = {'on' if cfg.sweeping else 'off'}",
        f"force = {str(cfg.force).lower()}",
    ]
    if np.any(prob.c0 != 0.0) or np.any(prob.c1 != 0.0):
        lines.append("c0 = " + " ".join(_fmt(v) for v in prob.c0))
        lines.append("c1 = " + "; ".join(
            " ".join(_fmt(v) for v in row) for row in prob.c1))
    return lines


def _matrix_lines(name: str, mat: np.ndarray) -> list:
    mat = np.atleast_3d(mat)
    out = []
    for j in range(mat.shape[0]):
        rows = "; ".join(" ".join(_fmt(v) for v in row) for row in mat[j])
        out.append(f"{name}[{j + 1}] = {rows}")
    return out


def _report_text(cfg: RunConfig, prob: Problem, cert, rep=None,
                 diverged=None) -> str:
    out = ["CONFIG"]
    out += _config_echo(cfg, prob)
    out += ["", "CERTIFICATE", cert.to_text().rstrip()]
    out += ["", "ITERATION"]
    if rep is not None:
        out += [
            f"converged = {str(rep.converged).lower()}",
            f"iterates = {rep.iterates}",
            f"rho_hat = {_fmt(rep.rho_hat)}",
            f"tol = {_fmt(cfg.tol if cfg.tol is not None else 1e-8 * cert.gamma)}",
        ]
        if rep.history:
            out.append(f"final_increment = {_fmt(rep.history[-1][1])}")
    elif diverged is not None:
        out += ["converged = false", "diverged = true",
                f"iterates = {len(diverged.history)}"]
    else:
        out.append("not run (certificate not admissible)")
    out += ["", "SOLUTION"]
    if rep is not None:
        u = rep.solution
        out.append(f"final_residual = {_fmt(rep.final_residual)}")
        out.append(f"sup_norm = {_fmt(sup_norm(u))}")
        out.append("value_at_origin = "
                   + " ".join(_fmt(v) for v in value_at_origin(u)))
        g0 = gradient_at_origin(u)
        out.append("gradient_at_origin = "
                   + "; ".join(" ".join(_fmt(v) for v in row) for row in g0))
        out += _matrix_lines("hessian_at_origin", rep.hessian_at_origin)
    else:
        out.append("no solution")
    out += ["", "RADIALITY"]
    if rep is not None:
        out.append(f"verdict = {rep.radiality}")
        for k, v in rep.radiality_witness.items():
            out.append(f"{k} = {v}" if isinstance(v, int) else f"{k} = {_fmt(v)}")
        out.append(f"stencil_tol = {_fmt(rep.stencil_tol)}")
    else:
        out.append("verdict = not_determined")
    return "\n".join(out) + "\n"


def _sweep_csv(rows) -> str:
    lines = ["R,gamma,delta,eta,verdict,binding_constraint"]
    for R, gamma, delta, eta, verdict, binding in rows:
        lines.append(f"{_fmt(R)},{_fmt(gamma)},{_fmt(delta)},{_fmt(eta)},"
                     f"{verdict},{binding}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# verbs


def _certificate(cfg: RunConfig, prob: Problem):
    c_op = resolve_c_op(cfg, prob.n)
    steps = cfg.sweep_steps if cfg.sweeping else 1
    return search_admissible(
        prob.cert_spec, prob.mode, R_range=(cfg.R,), gamma_range=(cfg.gamma,),
        C_op=c_op, samples_per_axis=cfg.samples_per_axis, alpha=cfg.alpha,
        max_steps=steps)


def run_certify(cfg: RunConfig) -> int:
    prob = build_problem(cfg)
    cert = _certificate(cfg, prob)
    out = Path(cfg.out)
    _write(out / "certificate.txt", cert.to_text())
    print(f"verdict: {cert.verdict} (R = {_fmt(cert.R)}, "
          f"gamma = {_fmt(cert.gamma)}, delta = {_fmt(cert.delta)}, "
          f"eta = {_fmt(cert.eta)})")
    for failure in cert.hypothesis.failures:
        print(f"hypothesis: {failure}")
    return EXIT_OK if cert.admissible else EXIT_NOT_ADMISSIBLE


def run_solve(cfg: RunConfig) -> int:
    prob = build_problem(cfg)
    potential.set_threads(cfg.threads)
    cert = _certificate(cfg, prob)
    out = Path(cfg.out)
    _write(out / "certificate.txt", cert.to_text())
    if not cert.admissible and not cfg.force:
        _write(out / "report.txt", _report_text(cfg, prob, cert))
        print(f"refused: certificate {cert.verdict} "
              f"(binding: {cert.binding or 'hypothesis'})")
        for failure in cert.hypothesis.failures:
            print(f"hypothesis: {failure}")
        return EXIT_NOT_ADMISSIBLE

    grid = build_grid(BallDomain(prob.n, cert.R), cfg.resolution)
    a_kl = seed_coefficients(cfg, prob.n, prob.N, cert.gamma)
    seed = make_seed(grid, cert.gamma, a_kl, prob.c0, prob.c1,
                     mode=prob.mode, alpha=cfg.alpha)
    try:
        rep = solve(prob.spec, prob.mode, seed, cert, tol=cfg.tol,
                    max_iter=cfg.max_iter, force=cfg.force)
    except CertificateRefused as exc:
        print(f"refused: {exc}")
        return EXIT_NOT_ADMISSIBLE
    except DivergenceError as exc:
        lines = ["iter,delta_norm2,ratio"]
        lines += [f"{it},{dn:.17g},{r:.17g}" for it, dn, r in exc.history]
        _write(out / "history.csv", "\n".join(lines) + "\n")
        _write(out / "report.txt", _report_text(cfg, prob, cert, diverged=exc))
        print(f"diverged: {exc}")
        return EXIT_DIVERGED

    to_csv(rep.solution, out / "solution.csv")
    _write(out / "history.csv", rep.history_csv())
    _write(out / "report.txt", _report_text(cfg, prob, cert, rep=rep))
    print(f"{'converged' if rep.converged else 'stopped'} after "
          f"{rep.iterates} iterations, rho_hat = {_fmt(rep.rho_hat)}, "
          f"radiality: {rep.radiality}")
    return EXIT_OK if rep.converged else EXIT_DIVERGED


def run_sweep(cfg: RunConfig) -> int:
    prob = build_problem(cfg)
    c_op = resolve_c_op(cfg, prob.n)
    hyp = hypothesis_check(prob.cert_spec, prob.mode)
    rows = []
    for step in range(cfg.sweep_steps):
        if prob.mode == "thm13":
            R, gamma = cfg.R, cfg.gamma * SWEEP_FACTOR**step
        else:
            R, gamma = cfg.R * SWEEP_FACTOR**step, cfg.gamma
        cert = certify_at(prob.cert_spec, prob.mode, R, gamma, c_op,
                          cfg.samples_per_axis, cfg.alpha, hyp)
        rows.append((R, gamma, cert.delta, cert.eta, cert.verdict,
                     cert.binding))
    _write(Path(cfg.out) / "sweep.csv", _sweep_csv(rows))
    admissible = sum(1 for r in rows if r[4] == "admissible")
    print(f"swept {len(rows)} points, {admissible} admissible")
    return EXIT_OK


def run_presets() -> int:
    for p in preset_catalog():
        print(f"{p.name}  mode={p.mode}  n={p.dim}  N={p.components}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def main(argv=None) -> int:
    ap = _Parser(prog="nonradial",
                 description="Local solver and contraction certificates for "
                             "Delta u = a(x, u, grad u, hess u) on a ball.")
    ap.add_argument("verb", choices=("certify", "solve", "sweep", "presets"))
    ap.add_argument("config", nargs="?", help="path to the run config file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    dest="overrides", help="override a config entry")
    ap.add_argument("--threads", type=int, default=None,
                    help="cap the potential worker pool")
    ap.add_argument("--force", action="store_true",
                    help="iterate even without an admissible certificate")
    try:
        args = ap.parse_args(argv)
        if args.verb == "presets":
            return run_presets()
        if not args.config:
            raise ConfigError(f"verb '{args.verb}' needs a config file")
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text, args.overrides)
        if args.threads is not None:
            cfg.threads = args.threads
        if args.force:
            cfg.force = True
        if args.verb == "certify":
            return run_certify(cfg)
        if args.verb == "solve":
            return run_solve(cfg)
        return run_sweep(cfg)
    except (ConfigError, ExprSyntaxError, EvalDomainError, KeyError,
            OSError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
