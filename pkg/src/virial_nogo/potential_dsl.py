"""Scalar potentials V(s) of the invariant s = phi^dagger phi.

Text is parsed into a small immutable expression tree that can be evaluated
on numpy arrays and differentiated exactly.  On top of that sit the
admissibility check at s -> 0 and the interval arithmetic that decides for
which scaling exponents gamma the no-go inequality

    g_gamma(s) = 2 gamma s V'(s) - 3 V(s) >= 0

holds on a sampled field range.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


class PotentialSyntaxError(ValueError):
    """Malformed potential text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class PotentialDomainError(ArithmeticError):
    """Expression evaluated outside its domain (ln of s <= 0, division by zero, ...)."""


# ---------------------------------------------------------------------------
# expression nodes


class Node:
    __slots__ = ()

    def depends_on_s(self) -> bool:
        return any(child.depends_on_s() for child in self.children())

    def children(self) -> tuple["Node", ...]:
        return ()


@dataclass(frozen=True)
class Const(Node):
    value: float

    def depends_on_s(self) -> bool:
        return False


@dataclass(frozen=True)
class Var(Node):
    def depends_on_s(self) -> bool:
        return True


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Add(Node):
    left: Node
    right: Node

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Sub(Node):
    left: Node
    right: Node

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Mul(Node):
    left: Node
    right: Node

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Div(Node):
    left: Node
    right: Node

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: float

    def children(self):
        return (self.base,)


@dataclass(frozen=True)
class Ln(Node):
    arg: Node

    def children(self):
        return (self.arg,)


S = Var()


@dataclass(frozen=True)
class PotentialExpr:
    """A potential V(s) together with the text it was parsed from (if any)."""

    root: Node
    text: Optional[str] = field(default=None, compare=False)

    def __call__(self, s: ArrayLike) -> ArrayLike:
        return evaluate(self, s)

    def __str__(self) -> str:
        return to_text(self)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ln>ln\b)|(?P<var>s\b)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    raw = text.encode("utf-8")
    # offsets are byte offsets; for ASCII input they coincide with str indices
    while pos < len(text):
        if text[pos:].strip() == "":
            pos = len(text)
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise PotentialSyntaxError(
                f"unexpected character {text[bad]!r}", len(text[:bad].encode("utf-8"))
            )
        kind = m.lastgroup
        start = len(text[: m.start(kind)].encode("utf-8"))
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value or kind == "end":
            what = "end of input" if kind == "end" else repr(val)
            raise PotentialSyntaxError(f"expected {value!r}, got {what}", off)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise PotentialSyntaxError(f"unexpected {val!r}", off)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[0] == "op" and self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.factor()

    def factor(self) -> Node:
        base = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            off = self.peek()[2]
            exp_node = self.unary_exponent()
            if exp_node.depends_on_s():
                raise PotentialSyntaxError("non-constant exponent", off)
            try:
                exponent = float(evaluate(PotentialExpr(exp_node), 1.0))
            except PotentialDomainError as exc:
                raise PotentialSyntaxError(f"invalid exponent ({exc})", off) from None
            return Pow(base, exponent)
        return base

    def unary_exponent(self) -> Node:
        # exponent binds tighter than unary minus on the left, but s^-1 is accepted
        if self.peek()[0] == "op" and self.peek()[1] in ("-", "+"):
            sign = self.take()[1]
            inner = self.factor()
            return Neg(inner) if sign == "-" else inner
        return self.factor()

    def base(self) -> Node:
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "var":
            return S
        if kind == "ln":
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return Ln(inner)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        what = "end of input" if kind == "end" else repr(val)
        raise PotentialSyntaxError(f"unexpected {what}", off)


def parse_potential(text: str) -> PotentialExpr:
    """Parse ``text`` such as ``"s^2 - s"`` or ``"-1*s*ln(1*s)"``."""
    return PotentialExpr(_Parser(text).parse(), text=text)


# ---------------------------------------------------------------------------
# printing


def _fmt_const(v: float) -> str:
    text = repr(float(v))
    if text in ("inf", "-inf", "nan"):
        raise ValueError(f"cannot print non-finite constant {text}")
    return text if v >= 0 else f"({text})"


def _node_text(node: Node) -> str:
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return "s"
    if isinstance(node, Neg):
        return f"(-{_node_text(node.arg)})"
    if isinstance(node, Ln):
        return f"ln({_node_text(node.arg)})"
    if isinstance(node, Pow):
        return f"({_node_text(node.base)})^{_fmt_const(node.exponent)}"
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)]
    return f"({_node_text(node.left)} {op} {_node_text(node.right)})"


def to_text(expr: Union[PotentialExpr, Node]) -> str:
    """Fully parenthesized text that parses back to an equivalent tree."""
    root = expr.root if isinstance(expr, PotentialExpr) else expr
    return _node_text(root)


# ---------------------------------------------------------------------------
# evaluation


def _eval(node: Node, s: np.ndarray) -> np.ndarray:
    # invalid points propagate as nan; callers decide whether to raise
    if isinstance(node, Const):
        return np.full_like(s, node.value)
    if isinstance(node, Var):
        return s
    if isinstance(node, Neg):
        return -_eval(node.arg, s)
    if isinstance(node, Add):
        return _eval(node.left, s) + _eval(node.right, s)
    if isinstance(node, Sub):
        return _eval(node.left, s) - _eval(node.right, s)
    if isinstance(node, Mul):
        return _eval(node.left, s) * _eval(node.right, s)
    if isinstance(node, Div):
        den = _eval(node.right, s)
        num = _eval(node.left, s)
        out = num / np.where(den == 0.0, np.nan, den)
        return out
    if isinstance(node, Pow):
        b = _eval(node.base, s)
        p = node.exponent
        if p == 0.0:
            return np.where(np.isnan(b), np.nan, 1.0)
        if float(p).is_integer():
            out = b ** p
            if p < 0:
                out = np.where(b == 0.0, np.nan, out)
            return out
        bad = b < 0 if p > 0 else b <= 0
        return np.where(bad, np.nan, np.abs(b) ** p)
    if isinstance(node, Ln):
        a = _eval(node.arg, s)
        return np.log(np.where(a > 0, a, np.nan))
    raise TypeError(f"unknown node {node!r}")


def evaluate_masked(expr: PotentialExpr, s: ArrayLike) -> np.ndarray:
    """Evaluate on an array; points outside the domain come back as nan."""
    arr = np.asarray(s, dtype=np.float64)
    with np.errstate(all="ignore"):
        out = np.asarray(_eval(expr.root, arr), dtype=np.float64)
    out = np.broadcast_to(out, arr.shape).copy()
    out[~np.isfinite(out)] = np.nan
    return out


def evaluate(expr: PotentialExpr, s: ArrayLike) -> ArrayLike:
    """Evaluate V at ``s``; raises :class:`PotentialDomainError` on any invalid point."""
    out = evaluate_masked(expr, s)
    if np.isnan(out).any():
        arr = np.asarray(s, dtype=np.float64)
        bad = np.broadcast_to(arr, out.shape)[np.isnan(out)]
        raise PotentialDomainError(
            f"{to_text(expr)} undefined at s={float(bad.flat[0])!r}"
            f" ({bad.size} invalid point{'s' if bad.size > 1 else ''})"
        )
    if np.ndim(s) == 0:
        return float(out)
    return out


def _py_source(node: Node) -> str:
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "s"
    if isinstance(node, Neg):
        return f"(-{_py_source(node.arg)})"
    if isinstance(node, Ln):
        return f"_log({_py_source(node.arg)})"
    if isinstance(node, Pow):
        return f"_pow({_py_source(node.base)}, {node.exponent!r})"
    if isinstance(node, Div):
        return f"_div({_py_source(node.left)}, {_py_source(node.right)})"
    op = {Add: "+", Sub: "-", Mul: "*"}[type(node)]
    return f"({_py_source(node.left)} {op} {_py_source(node.right)})"


def _log(x: float) -> float:
    if x <= 0:
        raise PotentialDomainError(f"ln of non-positive argument {x!r}")
    return math.log(x)


def _div(a: float, b: float) -> float:
    if b == 0:
        raise PotentialDomainError("division by zero")
    return a / b


def _pow(b: float, p: float) -> float:
    try:
        out = b ** p
    except ZeroDivisionError:
        raise PotentialDomainError(f"0 raised to negative power {p!r}") from None
    if isinstance(out, complex):
        raise PotentialDomainError(f"negative base {b!r} to non-integer power {p!r}")
    return out


def compile_scalar(expr: PotentialExpr):
    """Fast float -> float callable for scalar hot loops (ODE right-hand sides)."""
    src = f"lambda s: {_py_source(expr.root)}"
    return eval(src, {"_log": _log, "_div": _div, "_pow": _pow, "__builtins__": {}})


# ---------------------------------------------------------------------------
# differentiation

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is_const(node: Node, value: float) -> bool:
    return isinstance(node, Const) and node.value == value


def _mul(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def _add(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def _sub(a: Node, b: Node) -> Node:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return Neg(b)
    return Sub(a, b)


def _d(node: Node) -> Node:
    if not node.depends_on_s():
        return _ZERO
    if isinstance(node, Var):
        return _ONE
    if isinstance(node, Neg):
        du = _d(node.arg)
        return _ZERO if _is_const(du, 0.0) else Neg(du)
    if isinstance(node, Add):
        return _add(_d(node.left), _d(node.right))
    if isinstance(node, Sub):
        return _sub(_d(node.left), _d(node.right))
    if isinstance(node, Mul):
        u, v = node.left, node.right
        return _add(_mul(_d(u), v), _mul(u, _d(v)))
    if isinstance(node, Div):
        u, v = node.left, node.right
        du, dv = _d(u), _d(v)
        if _is_const(dv, 0.0):
            return Div(du, v)
        return Div(_sub(_mul(du, v), _mul(u, dv)), Pow(v, 2.0))
    if isinstance(node, Pow):
        c = node.exponent
        outer = _mul(Const(c), Pow(node.base, c - 1.0) if c != 1.0 else _ONE)
        return _mul(outer, _d(node.base))
    if isinstance(node, Ln):
        return Div(_d(node.arg), node.arg)
    raise TypeError(f"unknown node {node!r}")


def differentiate(expr: PotentialExpr) -> PotentialExpr:
    """Exact derivative dV/ds as a new expression tree."""
    return PotentialExpr(_d(expr.root))


def s_times_derivative(expr: PotentialExpr, s: ArrayLike, dexpr: Optional[PotentialExpr] = None):
    """Return (V(s), s V'(s)) with the s = 0 limits V(0) = 0, s V'(s) -> 0 imposed."""
    s = np.asarray(s, dtype=np.float64)
    dexpr = dexpr or differentiate(expr)
    v = np.zeros_like(s)
    svp = np.zeros_like(s)
    pos = s != 0.0
    if pos.any():
        sp = s[pos]
        v[pos] = evaluate(expr, sp)
        svp[pos] = sp * evaluate(dexpr, sp)
    return v, svp


# ---------------------------------------------------------------------------
# admissibility


@dataclass
class AdmissibilityReport:
    v_at_zero: float
    vprime_limit_at_zero: float
    vprime_finite: bool
    v_zero_ok: bool
    admissible: bool
    reason: str = ""


def _limit_at_zero(expr: PotentialExpr, k_min: int = 6, k_max: int = 44):
    """Limit of expr(s) as s -> 0+ along s = 2^-k.

    Returns (limit, converged).  Convergence is judged from the successive
    differences d_k: they must contract geometrically.  The limit is then
    extrapolated with the contraction ratio estimated from the tail
    (Richardson with fitted order).
    """
    ks = np.arange(k_min, k_max + 1)
    s = np.ldexp(1.0, -ks)
    vals = evaluate(expr, s)
    d = np.diff(vals)
    tail = d[-6:]
    scale = max(1.0, float(np.max(np.abs(vals[-6:]))))
    if np.all(np.abs(tail) <= 1e-13 * scale):
        return float(vals[-1]), True
    nz = np.abs(tail[:-1]) > 0
    ratios = np.abs(tail[1:][nz] / tail[:-1][nz])
    if ratios.size == 0 or np.max(ratios) > 0.9:
        trend = float(np.sign(vals[-1] - vals[-2])) or 1.0
        return trend * math.inf, False
    r = float(d[-1] / d[-2]) if d[-2] != 0 else 0.0
    limit = float(vals[-1] + d[-1] * r / (1.0 - r))
    return limit, True


def validate_admissibility(
    expr: PotentialExpr, tol: float = 1e-9, c_threshold: float = 1e8
) -> AdmissibilityReport:
    """Check V(0) = 0 and |V'(0)| < infinity via limits along s = 2^-k."""
    try:
        v0, v_conv = _limit_at_zero(expr)
    except PotentialDomainError as exc:
        return AdmissibilityReport(math.nan, math.nan, False, False, False, f"V: {exc}")
    try:
        c, c_conv = _limit_at_zero(differentiate(expr))
    except PotentialDomainError as exc:
        ok = v_conv and abs(v0) <= tol
        return AdmissibilityReport(v0, math.nan, False, ok, False, f"V': {exc}")
    v_ok = v_conv and abs(v0) <= tol
    finite = c_conv and abs(c) < c_threshold
    reasons = []
    if not v_ok:
        reasons.append(f"V(0) = {v0!r} is not 0")
    if not finite:
        reasons.append(f"V'(0) diverges (limit {c!r})")
    return AdmissibilityReport(
        v_at_zero=v0,
        vprime_limit_at_zero=c,
        vprime_finite=finite,
        v_zero_ok=v_ok,
        admissible=v_ok and finite,
        reason="; ".join(reasons),
    )


# ---------------------------------------------------------------------------
# no-go inequality


def nogo_condition_value(expr: PotentialExpr, gamma: float, s: ArrayLike) -> ArrayLike:
    """g_gamma(s) = 2 gamma s V'(s) - 3 V(s)."""
    if np.any(np.asarray(s) < 0):
        raise ValueError("s must be >= 0")
    dv = differentiate(expr)
    out = 2.0 * gamma * np.asarray(s, dtype=np.float64) * evaluate(dv, s) - 3.0 * evaluate(expr, s)
    return float(out) if np.ndim(s) == 0 else out


GAMMA_MIN = 0.5  # excluded
GAMMA_MAX = 1.5  # included


def sample_grid(s_max: float, n_samples: int) -> np.ndarray:
    """Hybrid grid: n/2 log-spaced points in [1e-8 s_max, s_max] plus n/2 uniform on (0, s_max]."""
    n_log = n_samples // 2
    n_lin = n_samples - n_log
    log_part = np.geomspace(1e-8 * s_max, s_max, n_log) if n_log else np.empty(0)
    lin_part = s_max * np.arange(1, n_lin + 1) / n_lin
    return np.unique(np.concatenate([log_part, lin_part]))


@dataclass
class GammaFeasibility:
    lower: float
    upper: float
    zero_slope_violation: bool
    feasible_interval: Optional[tuple[float, float]]
    lower_open: bool
    witness_gamma: Optional[float]
    s_domain: tuple[float, float]
    samples: int
    tol_cond: float
    excluded_samples: int = 0

    @property
    def feasible(self) -> bool:
        return self.feasible_interval is not None

    def contains(self, gamma: float) -> bool:
        if self.feasible_interval is None:
            return False
        lo, hi = self.feasible_interval
        if self.lower_open:
            return lo < gamma <= hi
        return lo <= gamma <= hi


@dataclass
class _Samples:
    s: np.ndarray
    v: np.ndarray
    svp: np.ndarray
    excluded: int
    tol: float


def _sample(expr: PotentialExpr, s_max: float, n_samples: int) -> _Samples:
    if not s_max > 0:
        raise ValueError("s_max must be positive")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    s = sample_grid(s_max, n_samples)
    v = evaluate_masked(expr, s)
    svp = s * evaluate_masked(differentiate(expr), s)
    ok = np.isfinite(v) & np.isfinite(svp)
    s, v, svp = s[ok], v[ok], svp[ok]
    if s.size == 0:
        raise PotentialDomainError("potential undefined on every sample point")
    tol = 1e-9 * (1.0 + float(np.max(np.abs(v))) + float(np.max(np.abs(svp))))
    return _Samples(s, v, svp, int((~ok).sum()), tol)


def _feasibility_from_samples(smp: _Samples, s_max: float, n_samples: int) -> GammaFeasibility:
    # per-sample constraint gamma * a >= 3 V - tol/2 with a = 2 s V'; the half
    # tolerance keeps the endpoints strictly inside the g >= -tol_cond invariant
    a = 2.0 * smp.svp
    b = 3.0 * smp.v - 0.5 * smp.tol
    pos = a > 0
    neg = a < 0
    zero = a == 0
    lower = float(np.max(b[pos] / a[pos])) if pos.any() else -math.inf
    upper = float(np.min(b[neg] / a[neg])) if neg.any() else math.inf
    zero_violation = bool(np.any(b[zero] > 0))

    lo = max(lower, GAMMA_MIN)
    lower_open = lower <= GAMMA_MIN
    hi = min(upper, GAMMA_MAX)
    if zero_violation or lo > hi or (lo == hi and lower_open):
        interval = None
        witness = None
    else:
        interval = (lo, hi)
        if hi == GAMMA_MAX:
            witness = GAMMA_MAX
        else:
            witness = 0.5 * (lo + hi)
    return GammaFeasibility(
        lower=lower,
        upper=upper,
        zero_slope_violation=zero_violation,
        feasible_interval=interval,
        lower_open=lower_open,
        witness_gamma=witness,
        s_domain=(0.0, float(s_max)),
        samples=int(n_samples),
        tol_cond=smp.tol,
        excluded_samples=smp.excluded,
    )


def gamma_feasible_set(expr: PotentialExpr, s_max: float = 10.0, n_samples: int = 4096) -> GammaFeasibility:
    """Intersect the per-sample half-lines in gamma with (1/2, 3/2]."""
    return _feasibility_from_samples(_sample(expr, s_max, n_samples), s_max, n_samples)


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class Verdict:
    kind: str  # "NoGo" | "NoGoDerrickStatic" | "NoGoStaticOnly" | "Inconclusive"
    gamma: Optional[float] = None
    feasible_interval: Optional[tuple[float, float]] = None
    s_max: float = 10.0
    samples: int = 4096

    def to_dict(self) -> dict:
        return {
            "verdict": self.kind,
            "gamma": self.gamma,
            "feasible_interval": list(self.feasible_interval) if self.feasible_interval else None,
            "s_max": self.s_max,
            "samples": self.samples,
        }


NOGO = "NoGo"
NOGO_DERRICK_STATIC = "NoGoDerrickStatic"
NOGO_STATIC_ONLY = "NoGoStaticOnly"
INCONCLUSIVE = "Inconclusive"


def classify(expr: PotentialExpr, s_max: float = 10.0, n_samples: int = 4096) -> Verdict:
    smp = _sample(expr, s_max, n_samples)
    feas = _feasibility_from_samples(smp, s_max, n_samples)
    if feas.feasible:
        return Verdict(NOGO, feas.witness_gamma, feas.feasible_interval, float(s_max), int(n_samples))
    tol = smp.tol
    if np.all(smp.svp - 3.0 * smp.v >= -tol) and np.all(smp.v >= -tol):
        return Verdict(NOGO_DERRICK_STATIC, 0.5, None, float(s_max), int(n_samples))
    if np.all(smp.svp >= -tol):
        return Verdict(NOGO_STATIC_ONLY, None, None, float(s_max), int(n_samples))
    return Verdict(INCONCLUSIVE, None, None, float(s_max), int(n_samples))
