"""Right-hand-side expression language a(x, p, q, r).

One line per component, e.g. ``a1 = exp(2*p1) - 1 - 2*p1``.  Variables are
``x1..xn`` (position), ``p1..pN`` (value), ``qJ_K`` (first derivatives) and
``rJ_KL`` (second derivatives, canonicalized so K <= L).  Symbolic partials
are exact; simplification is constant folding and 0/1 elimination only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np


class ExprSyntaxError(ValueError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}, column {column})"
        super().__init__(f"{message}{loc}")
        self.line = line
        self.column = column


class EvalDomainError(ValueError):
    """Raised when evaluation leaves the domain of ln/sqrt/div/power."""

    def __init__(self, message, subexpr, mask=None):
        super().__init__(f"{message} in subexpression '{subexpr}'")
        self.subexpr = subexpr
        self.mask = mask


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Node:
    def eval(self, env):
        raise NotImplementedError

    def diff(self, var: str) -> "Node":
        raise NotImplementedError

    def variables(self) -> frozenset:
        raise NotImplementedError

    def subst(self, mapping) -> "Node":
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Node):
    value: float

    def eval(self, env):
        return self.value

    def diff(self, var):
        return Const(0.0)

    def variables(self):
        return frozenset()

    def subst(self, mapping):
        return self

    def __str__(self):
        v = self.value
        if v < 0:
            return f"({v:g})"
        return f"{v:g}"


@dataclass(frozen=True)
class Var(Node):
    name: str

    def eval(self, env):
        return env[self.name]

    def diff(self, var):
        return Const(1.0 if var == self.name else 0.0)

    def variables(self):
        return frozenset([self.name])

    def subst(self, mapping):
        return mapping.get(self.name, self)

    def __str__(self):
        return self.name


def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


def add(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if a == b:
        return Const(0.0)
    return Sub(a, b)


def mul(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def div(a, b):
    if _is_const(b, 0.0):
        raise ExprSyntaxError("division by constant zero")
    if _is_const(a) and _is_const(b):
        return Const(a.value / b.value)
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def power(a, c: float):
    if c == 0.0:
        return Const(1.0)
    if c == 1.0:
        return a
    if _is_const(a):
        return Const(a.value**c)
    return Pow(a, c)


@dataclass(frozen=True)
class Add(Node):
    left: Node
    right: Node

    def eval(self, env):
        return self.left.eval(env) + self.right.eval(env)

    def diff(self, var):
        return add(self.left.diff(var), self.right.diff(var))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def subst(self, mapping):
        return add(self.left.subst(mapping), self.right.subst(mapping))

    def __str__(self):
        return f"{self.left} + {self.right}"


@dataclass(frozen=True)
class Sub(Node):
    left: Node
    right: Node

    def eval(self, env):
        return self.left.eval(env) - self.right.eval(env)

    def diff(self, var):
        return sub(self.left.diff(var), self.right.diff(var))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def subst(self, mapping):
        return sub(self.left.subst(mapping), self.right.subst(mapping))

    def __str__(self):
        return f"{self.left} - {_paren_add(self.right)}"


@dataclass(frozen=True)
class Mul(Node):
    left: Node
    right: Node

    def eval(self, env):
        return self.left.eval(env) * self.right.eval(env)

    def diff(self, var):
        return add(mul(self.left.diff(var), self.right),
                   mul(self.left, self.right.diff(var)))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def subst(self, mapping):
        return mul(self.left.subst(mapping), self.right.subst(mapping))

    def __str__(self):
        return f"{_paren_add(self.left)}*{_paren_add(self.right)}"


@dataclass(frozen=True)
class Div(Node):
    left: Node
    right: Node

    def eval(self, env):
        den = self.right.eval(env)
        bad = np.asarray(den == 0.0)
        if bad.any():
            raise EvalDomainError("division by zero", str(self.right), bad)
        return self.left.eval(env) / den

    def diff(self, var):
        num = sub(mul(self.left.diff(var), self.right),
                  mul(self.left, self.right.diff(var)))
        return div(num, power(self.right, 2.0))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def subst(self, mapping):
        return div(self.left.subst(mapping), self.right.subst(mapping))

    def __str__(self):
        return f"{_paren_add(self.left)}/{_paren_mul(self.right)}"


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: float  # constant real exponent

    def eval(self, env):
        b = self.base.eval(env)
        if self.exponent != int(self.exponent):
            bad = np.asarray(b < 0.0)
            if bad.any():
                raise EvalDomainError("negative base with non-integer exponent",
                                      str(self), bad)
        return b**self.exponent

    def diff(self, var):
        return mul(mul(Const(self.exponent), power(self.base, self.exponent - 1.0)),
                   self.base.diff(var))

    def variables(self):
        return self.base.variables()

    def subst(self, mapping):
        return power(self.base.subst(mapping), self.exponent)

    def __str__(self):
        return f"{_paren_mul(self.base)}^{Const(self.exponent)}"


_FUNC_EVAL = {
    "exp": np.exp,
    "ln": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
}


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node

    def eval(self, env):
        a = self.arg.eval(env)
        if self.name == "ln":
            bad = np.asarray(a <= 0.0)
            if bad.any():
                raise EvalDomainError("ln of non-positive value", str(self), bad)
        if self.name == "sqrt":
            bad = np.asarray(a < 0.0)
            if bad.any():
                raise EvalDomainError("sqrt of negative value", str(self), bad)
        return _FUNC_EVAL[self.name](a)

    def diff(self, var):
        u = self.arg
        du = u.diff(var)
        if self.name == "exp":
            return mul(self, du)
        if self.name == "ln":
            return div(du, u)
        if self.name == "sin":
            return mul(Func("cos", u), du)
        if self.name == "cos":
            return mul(Const(-1.0), mul(Func("sin", u), du))
        if self.name == "sqrt":
            return div(du, mul(Const(2.0), self))
        raise ValueError(f"unknown function {self.name}")

    def variables(self):
        return self.arg.variables()

    def subst(self, mapping):
        return Func(self.name, self.arg.subst(mapping))

    def __str__(self):
        return f"{self.name}({self.arg})"


@dataclass(frozen=True)
class AbsPow(Node):
    """|t|^s, a distinguished primitive for critical-exponent presets."""

    arg: Node
    exponent: float

    def eval(self, env):
        return np.abs(self.arg.eval(env)) ** self.exponent

    def diff(self, var):
        if self.exponent <= 1.0:
            raise ValueError(
                f"abs_pow with exponent {self.exponent} <= 1 is not C^1 at 0")
        return mul(mul(Const(self.exponent), SgnAbsPow(self.arg, self.exponent - 1.0)),
                   self.arg.diff(var))

    def variables(self):
        return self.arg.variables()

    def subst(self, mapping):
        return AbsPow(self.arg.subst(mapping), self.exponent)

    def __str__(self):
        return f"abs_pow({self.arg}, {Const(self.exponent)})"


@dataclass(frozen=True)
class SgnAbsPow(Node):
    """sign(t) * |t|^e; appears as the derivative of AbsPow."""

    arg: Node
    exponent: float

    def eval(self, env):
        a = np.asarray(self.arg.eval(env), dtype=float)
        return np.sign(a) * np.abs(a) ** self.exponent

    def diff(self, var):
        if self.exponent <= 1.0:
            raise ValueError(
                f"sign-power with exponent {self.exponent} <= 1 is not C^1 at 0")
        return mul(mul(Const(self.exponent), AbsPow(self.arg, self.exponent - 1.0)),
                   self.arg.diff(var))

    def variables(self):
        return self.arg.variables()

    def subst(self, mapping):
        return SgnAbsPow(self.arg.subst(mapping), self.exponent)

    def __str__(self):
        return f"sgn_abs_pow({self.arg}, {Const(self.exponent)})"


def _paren_add(node):
    if isinstance(node, (Add, Sub)):
        return f"({node})"
    return str(node)


def _paren_mul(node):
    if isinstance(node, (Add, Sub, Mul, Div)):
        return f"({node})"
    return str(node)


# ---------------------------------------------------------------------------
# variable naming


_VAR_RE = re.compile(r"^(x(\d+)|p(\d+)|q(\d+)_(\d+)|r(\d+)_(\d)(\d))$")


def canonical_var(name: str, n: int, N: int,
                  line=None, column=None) -> str:
    """Validate a variable identifier and canonicalize r-symmetry (K <= L)."""
    m = _VAR_RE.match(name)
    if not m:
        raise ExprSyntaxError(f"unknown identifier '{name}'", line, column)
    if m.group(2):
        k = int(m.group(2))
        if not 1 <= k <= n:
            raise ExprSyntaxError(f"x index out of range in '{name}'", line, column)
        return name
    if m.group(3):
        j = int(m.group(3))
        if not 1 <= j <= N:
            raise ExprSyntaxError(f"p index out of range in '{name}'", line, column)
        return name
    if m.group(4):
        j, k = int(m.group(4)), int(m.group(5))
        if not (1 <= j <= N and 1 <= k <= n):
            raise ExprSyntaxError(f"q index out of range in '{name}'", line, column)
        return name
    j, k, ell = int(m.group(6)), int(m.group(7)), int(m.group(8))
    if not (1 <= j <= N and 1 <= k <= n and 1 <= ell <= n):
        raise ExprSyntaxError(f"r index out of range in '{name}'", line, column)
    if k > ell:
        k, ell = ell, k
    return f"r{j}_{k}{ell}"


def x_var(k):
    return Var(f"x{k}")


def p_var(j):
    return Var(f"p{j}")


def q_var(j, k):
    return Var(f"q{j}_{k}")


def r_var(j, k, ell):
    if k > ell:
        k, ell = ell, k
    return Var(f"r{j}_{k}{ell}")


def all_variables(n, N):
    xs = [f"x{k}" for k in range(1, n + 1)]
    ps = [f"p{j}" for j in range(1, N + 1)]
    qs = [f"q{j}_{k}" for j in range(1, N + 1) for k in range(1, n + 1)]
    rs = [f"r{j}_{k}{l}" for j in range(1, N + 1)
          for k in range(1, n + 1) for l in range(k, n + 1)]
    return xs, ps, qs, rs


# ---------------------------------------------------------------------------
# parser


_TOKEN_RE = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
                       r"|([A-Za-z_][A-Za-z_0-9]*)"
                       r"|(\*\*|[-+*/^(),]))")


class _Tokenizer:
    def __init__(self, text, line_no):
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if not m or m.end() == pos:
                stripped = text[pos:].lstrip()
                if not stripped:
                    break
                raise ExprSyntaxError(f"unexpected character '{stripped[0]}'",
                                      line_no, pos + 1)
            col = m.start(m.lastindex) + 1
            if m.group(1) is not None:
                self.tokens.append(("num", float(m.group(0)), col))
            elif m.group(2) is not None:
                self.tokens.append(("name", m.group(2), col))
            else:
                op = m.group(3)
                self.tokens.append(("op", "^" if op == "**" else op, col))
            pos = m.end()
        self.pos = 0
        self.line_no = line_no

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None, None)

    def next(self):
        tok = self.peek()
        if tok[0] is None:
            raise ExprSyntaxError("unexpected end of expression", self.line_no, 0)
        self.pos += 1
        return tok

    def expect(self, op):
        kind, val, col = self.next()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected '{op}', got '{val}'", self.line_no, col)


class _Parser:
    def __init__(self, text, line_no, n, N):
        self.tk = _Tokenizer(text, line_no)
        self.n = n
        self.N = N
        self.line_no = line_no

    def parse(self):
        node = self.expr()
        kind, val, col = self.tk.peek()
        if kind is not None:
            raise ExprSyntaxError(f"unexpected token '{val}'", self.line_no, col)
        return node

    def expr(self):
        kind, val, _ = self.tk.peek()
        negate = False
        if kind == "op" and val in "+-":
            self.tk.next()
            negate = val == "-"
        node = self.term()
        if negate:
            node = sub(Const(0.0), node)
        while True:
            kind, val, _ = self.tk.peek()
            if kind == "op" and val == "+":
                self.tk.next()
                node = add(node, self.term())
            elif kind == "op" and val == "-":
                self.tk.next()
                node = sub(node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.tk.peek()
            if kind == "op" and val == "*":
                self.tk.next()
                node = mul(node, self.factor())
            elif kind == "op" and val == "/":
                self.tk.next()
                node = div(node, self.factor())
            else:
                return node

    def factor(self):
        node = self.unary()
        kind, val, col = self.tk.peek()
        if kind == "op" and val == "^":
            self.tk.next()
            expo = self.unary()
            if not isinstance(expo, Const):
                raise ExprSyntaxError("exponent must be a constant",
                                      self.line_no, col)
            return power(node, expo.value)
        return node

    def unary(self):
        kind, val, _ = self.tk.peek()
        if kind == "op" and val == "-":
            self.tk.next()
            return sub(Const(0.0), self.unary())
        return self.primary()

    def primary(self):
        kind, val, col = self.tk.next()
        if kind == "num":
            return Const(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.tk.expect(")")
            return node
        if kind == "name":
            if val == "abs_pow":
                self.tk.expect("(")
                arg = self.expr()
                self.tk.expect(",")
                expo = self.expr()
                self.tk.expect(")")
                if not isinstance(expo, Const):
                    raise ExprSyntaxError("abs_pow exponent must be constant",
                                          self.line_no, col)
                return AbsPow(arg, expo.value)
            if val in _FUNC_EVAL:
                self.tk.expect("(")
                arg = self.expr()
                self.tk.expect(")")
                return Func(val, arg)
            return Var(canonical_var(val, self.n, self.N, self.line_no, col))
        raise ExprSyntaxError(f"unexpected token '{val}'", self.line_no, col)


def parse_expression(text: str, n: int, N: int, line_no: int = 1) -> Node:
    return _Parser(text, line_no, n, N).parse()


# ---------------------------------------------------------------------------
# NonlinearitySpec


@dataclass
class NonlinearitySpec:
    dim: int
    components: int
    asts: list
    source: Optional[str] = None

    def __post_init__(self):
        used = frozenset().union(*[a.variables() for a in self.asts])
        self.depends_on_x = [bool(a.variables() & self._xset()) for a in self.asts]
        self.depends_on_r = [bool(a.variables() & self._rset()) for a in self.asts]
        self._used = used

    def _xset(self):
        return frozenset(f"x{k}" for k in range(1, self.dim + 1))

    def _rset(self):
        xs, ps, qs, rs = all_variables(self.dim, self.components)
        return frozenset(rs)

    @property
    def any_x(self):
        return any(self.depends_on_x)

    @property
    def any_r(self):
        return any(self.depends_on_r)

    def substituted(self, mapping) -> "NonlinearitySpec":
        return NonlinearitySpec(self.dim, self.components,
                                [a.subst(mapping) for a in self.asts])

    def __str__(self):
        return "\n".join(f"a{i+1} = {a}" for i, a in enumerate(self.asts))


_LINE_RE = re.compile(r"^\s*a(\d+)\s*=\s*(.*?)\s*$")


def parse(source: str, n: int, N: int) -> NonlinearitySpec:
    """Parse one ``ai = expr`` line per component."""
    asts = [None] * N
    for line_no, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise ExprSyntaxError("expected 'a<i> = expression'", line_no, 1)
        i = int(m.group(1))
        if not 1 <= i <= N:
            raise ExprSyntaxError(f"component a{i} out of range (N={N})", line_no, 1)
        if asts[i - 1] is not None:
            raise ExprSyntaxError(f"duplicate definition of a{i}", line_no, 1)
        asts[i - 1] = parse_expression(m.group(2), n, N, line_no)
    missing = [i + 1 for i, a in enumerate(asts) if a is None]
    if missing:
        raise ExprSyntaxError(f"missing definition for a{missing[0]}")
    return NonlinearitySpec(n, N, asts, source=source)


def diff(spec_or_ast, var: str):
    """Symbolic partial derivative, simplified.

    Accepts a single AST (returns one tree) or a NonlinearitySpec (returns
    the list of per-component partials).
    """
    var = canonical_var(var, 10, 10) if isinstance(spec_or_ast, Node) else var
    if isinstance(spec_or_ast, NonlinearitySpec):
        v = canonical_var(var, spec_or_ast.dim, spec_or_ast.components)
        return [a.diff(v) for a in spec_or_ast.asts]
    return spec_or_ast.diff(var)


# ---------------------------------------------------------------------------
# evaluation along a field and hypothesis checks


def shifted_by_affine(spec: NonlinearitySpec, c0, c1) -> NonlinearitySpec:
    """The nonlinearity seen by u - c0 - c1 x when u solves the original one.

    Substitutes p_j -> p_j + c0_j + sum_k c1_jk x_k and q_j_k -> q_j_k + c1_jk,
    so certificates for solutions with prescribed origin value and gradient
    can be computed on the standard box centered at zero.
    """
    n, N = spec.dim, spec.components
    c0 = np.asarray(c0, dtype=float).reshape(N)
    c1 = np.asarray(c1, dtype=float).reshape(N, n)
    mapping = {}
    for j in range(1, N + 1):
        shift = Const(c0[j - 1])
        for k in range(1, n + 1):
            shift = add(shift, mul(Const(c1[j - 1, k - 1]), Var(f"x{k}")))
        mapping[f"p{j}"] = add(Var(f"p{j}"), shift)
        for k in range(1, n + 1):
            mapping[f"q{j}_{k}"] = add(Var(f"q{j}_{k}"), Const(c1[j - 1, k - 1]))
    return spec.substituted(mapping)


def zero_env(n, N):
    xs, ps, qs, rs = all_variables(n, N)
    return {name: 0.0 for name in xs + ps + qs + rs}


def eval_on_field(spec: NonlinearitySpec, u) -> "GridField":
    """Evaluate a(x, u, grad u, hess u) at every node of u's grid."""
    from .fields import GridField, derivative

    grid = u.grid
    n, N = spec.dim, spec.components
    if u.components != N:
        raise ValueError(f"field has {u.components} components, spec expects {N}")
    env = {}
    for k in range(n):
        env[f"x{k+1}"] = grid.nodes[:, k]
    for j in range(N):
        env[f"p{j+1}"] = u.values[:, j]
    for k in range(n):
        beta = [0] * n
        beta[k] = 1
        d = derivative(u, tuple(beta))
        for j in range(N):
            env[f"q{j+1}_{k+1}"] = d.values[:, j]
    for k in range(n):
        for ell in range(k, n):
            beta = [0] * n
            beta[k] += 1
            beta[ell] += 1
            d = derivative(u, tuple(beta))
            if k != ell:
                # symmetrize the mixed partial (r_kl and r_lk are one variable)
                beta2 = [0] * n
                beta2[ell] += 1
                beta2[k] += 1
                d2 = derivative(u, tuple(beta2))
                vals = 0.5 * (d.values + d2.values)
            else:
                vals = d.values
            for j in range(N):
                env[f"r{j+1}_{k+1}{ell+1}"] = vals[:, j]
    out = np.empty((grid.num_nodes, N))
    for i, ast in enumerate(spec.asts):
        try:
            out[:, i] = np.broadcast_to(ast.eval(env), (grid.num_nodes,))
        except EvalDomainError as err:
            node = int(np.argmax(err.mask)) if err.mask is not None and err.mask.shape else -1
            raise EvalDomainError(
                f"component a{i+1} failed at node {node} "
                f"(x={grid.nodes[node] if node >= 0 else '?'})", err.subexpr) from err
    return GridField(grid, out, u.alpha)


@dataclass
class HypothesisReport:
    mode: str
    passed: bool
    failures: list
    values: dict

    def __str__(self):
        status = "pass" if self.passed else "fail"
        lines = [f"hypothesis ({self.mode}): {status}"]
        lines += [f"  {f}" for f in self.failures]
        return "\n".join(lines)


def _eval_at_zero(ast, n, N):
    return float(ast.eval(zero_env(n, N)))


def _linear_r_coefficient_vanishes_at_x0(spec):
    """True when a is linear in r and the r-coefficients vanish at x = 0
    (the variable-coefficient principal-part remainder shape)."""
    xs, ps, qs, rs = all_variables(spec.dim, spec.components)
    x_zero = {name: Const(0.0) for name in xs}
    rng = np.random.default_rng(0)
    for ast in spec.asts:
        for rv in rs:
            d = ast.diff(rv)
            if d.variables() & frozenset(rs):
                return False  # not linear in r
            at_x0 = d.subst(x_zero)
            if _is_const(at_x0, 0.0):
                continue
            # numeric fallback: sample p, q with x = 0
            env = zero_env(spec.dim, spec.components)
            for _ in range(50):
                for name in ps + qs:
                    env[name] = rng.uniform(-1.0, 1.0)
                if abs(float(at_x0.eval(env))) > 1e-12:
                    return False
    return True


def hypothesis_check(spec: NonlinearitySpec, mode: str) -> HypothesisReport:
    """Check the structural conditions for the selected existence mode.

    thm11: a(0) = 0, grad_r a(0) = 0, grad_r^2 a(0) = 0.
    thm12: no r dependence (or linear in r with coefficients vanishing at x=0).
    thm13: autonomous in x, a(0) = 0, full grad a(0) = 0.
    """
    n, N = spec.dim, spec.components
    xs, ps, qs, rs = all_variables(n, N)
    failures = []
    values = {}

    a0 = np.array([_eval_at_zero(a, n, N) for a in spec.asts])
    values["a(0)"] = a0

    if mode == "thm11":
        if np.max(np.abs(a0)) > 0.0:
            failures.append(f"a(0) != 0 (got {a0})")
        gr = np.array([[_eval_at_zero(a.diff(rv), n, N) for rv in rs]
                       for a in spec.asts])
        values["grad_r a(0)"] = gr
        if gr.size and np.max(np.abs(gr)) > 0.0:
            failures.append(f"grad_r a(0) != 0 (max |.| = {np.max(np.abs(gr)):g})")
        gr2_max = 0.0
        for a in spec.asts:
            for rv in rs:
                d = a.diff(rv)
                for rv2 in rs:
                    gr2_max = max(gr2_max, abs(_eval_at_zero(d.diff(rv2), n, N)))
        values["grad_r^2 a(0)"] = gr2_max
        if gr2_max > 0.0:
            failures.append(f"grad_r^2 a(0) != 0 (max |.| = {gr2_max:g})")
    elif mode == "thm12":
        if spec.any_r and not _linear_r_coefficient_vanishes_at_x0(spec):
            failures.append("a depends on second derivatives r "
                            "(and not via an x-vanishing linear term)")
    elif mode == "thm13":
        if spec.any_x:
            failures.append("a depends on x (not autonomous)")
        if np.max(np.abs(a0)) > 0.0:
            failures.append(f"a(0) != 0 (got {a0})")
        grads = {}
        for name in ps + qs + rs:
            g = np.array([_eval_at_zero(a.diff(name), n, N) for a in spec.asts])
            if np.max(np.abs(g)) > 0.0:
                grads[name] = g
        values["grad a(0) nonzero entries"] = grads
        if grads:
            worst = max(grads, key=lambda k: np.max(np.abs(grads[k])))
            failures.append(f"grad a(0) != 0 (e.g. d/d{worst} = {grads[worst]})")
    else:
        raise ValueError(f"unknown mode '{mode}'")

    return HypothesisReport(mode=mode, passed=not failures,
                            failures=failures, values=values)
