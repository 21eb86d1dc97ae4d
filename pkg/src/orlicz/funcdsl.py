"""Orlicz functions: a tiny expression language, a catalog, and grid validation.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := base ('^' number)?
    base   := number | 't' | 'ln' '(' expr ')' | 'exp' '(' expr ')' | '(' expr ')'

A parsed expression is checked on a geometric grid (continuity is taken on
trust, everything else is tested pointwise) and wrapped in an immutable
:class:`OrliczFunction`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import mpmath
import numpy as np

from .roots import solve_increasing

__all__ = [
    "ParseError", "ValidationError", "Num", "Var", "BinOp", "Pow", "Call",
    "OrliczExpr", "GridSpec", "Violation", "ValidationReport", "OrliczFunction",
    "parse", "validate", "power", "power_log", "from_callable", "resolve",
    "evaluate", "inverse",
]

CONVEXITY_RTOL = 1e-12
MONOTONE_RTOL = 1e-12


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class ValidationError(ValueError):
    """Raised when a candidate function fails grid validation."""

    def __init__(self, report: "ValidationReport"):
        kinds = sorted({v.property for v in report.violations})
        super().__init__("not an Orlicz function: " + ", ".join(kinds))
        self.report = report


# ---------------------------------------------------------------- AST

@dataclass(frozen=True)
class Num:
    value: float

    def sexpr(self):
        v = self.value
        return str(int(v)) if float(v).is_integer() else repr(v)


@dataclass(frozen=True)
class Var:
    def sexpr(self):
        return "t"


@dataclass(frozen=True)
class BinOp:
    op: str  # add | sub | mul | div
    left: "Node"
    right: "Node"

    def sexpr(self):
        return f"{self.op}({self.left.sexpr()},{self.right.sexpr()})"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: float

    def sexpr(self):
        return f"pow({self.base.sexpr()},{Num(self.exponent).sexpr()})"


@dataclass(frozen=True)
class Call:
    name: str  # ln | exp
    arg: "Node"

    def sexpr(self):
        return f"{self.name}({self.arg.sexpr()})"


Node = Union[Num, Var, BinOp, Pow, Call]


@dataclass(frozen=True)
class OrliczExpr:
    ast: Node
    source: str

    def sexpr(self) -> str:
        return self.ast.sexpr()


_TOKEN = re.compile(r"(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\S)")
_BINOPS = {"+": "add", "-": "sub", "*": "mul", "/": "div"}


def _tokenize(text):
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        start = pos
        if m.group(1) is not None:
            tokens.append(("num", float(m.group(1)), start))
        elif m.group(2) is not None:
            tokens.append(("name", m.group(2), start))
        else:
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ParseError(f"unexpected character {ch!r}", start)
            tokens.append(("op", ch, start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, ch):
        kind, value, pos = self.take()
        if kind != "op" or value != ch:
            raise ParseError(f"expected {ch!r}", pos)

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = _BINOPS[self.take()[1]]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = _BINOPS[self.take()[1]]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, value, pos = self.take()
            if kind != "num":
                raise ParseError("exponent must be a number", pos)
            node = Pow(node, value)
        return node

    def base(self):
        kind, value, pos = self.take()
        if kind == "num":
            return Num(value)
        if kind == "name":
            if value == "t":
                return Var()
            if value in ("ln", "exp"):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            raise ParseError(f"unknown identifier {value!r}", pos)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError("expected operand", pos)


def parse(text: str) -> OrliczExpr:
    """Parse ``text`` into an :class:`OrliczExpr`; raises :class:`ParseError`."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(text)
    ast = parser.expr()
    kind, _, pos = parser.peek()
    if kind != "end":
        raise ParseError("unexpected trailing input", pos)
    return OrliczExpr(ast, text)


def _np_eval(node, t):
    if isinstance(node, Num):
        return np.full_like(t, node.value)
    if isinstance(node, Var):
        return t
    if isinstance(node, Pow):
        return np.power(_np_eval(node.base, t), node.exponent)
    if isinstance(node, Call):
        a = _np_eval(node.arg, t)
        return np.log(a) if node.name == "ln" else np.exp(a)
    if (node.op == "sub" and isinstance(node.left, Call) and node.left.name == "exp"
            and isinstance(node.right, Num) and node.right.value == 1.0):
        # exp(a) - 1 loses every digit for small a
        return np.expm1(_np_eval(node.left.arg, t))
    a, b = _np_eval(node.left, t), _np_eval(node.right, t)
    if node.op == "add":
        return a + b
    if node.op == "sub":
        return a - b
    if node.op == "mul":
        return a * b
    return a / b


def _mp_eval(node, t):
    if isinstance(node, Num):
        return mpmath.mpf(node.value)
    if isinstance(node, Var):
        return t
    if isinstance(node, Pow):
        return mpmath.power(_mp_eval(node.base, t), node.exponent)
    if isinstance(node, Call):
        a = _mp_eval(node.arg, t)
        return mpmath.log(a) if node.name == "ln" else mpmath.exp(a)
    a, b = _mp_eval(node.left, t), _mp_eval(node.right, t)
    if node.op == "add":
        return a + b
    if node.op == "sub":
        return a - b
    if node.op == "mul":
        return a * b
    return a / b


# ---------------------------------------------------------------- validation

@dataclass(frozen=True)
class GridSpec:
    """Geometric grid on (0, t_max]."""

    t_min: float = 1e-8
    t_max: float = 1e4
    points: int = 256

    def values(self) -> np.ndarray:
        return np.geomspace(self.t_min, self.t_max, self.points)

    def check(self):
        if self.points < 64 or self.t_min > 1e-8 or self.t_max < 1e4 or self.t_min <= 0:
            raise ValueError(
                "validation grid needs >= 64 geometric points spanning [1e-8, 1e4]")


@dataclass(frozen=True)
class Violation:
    property: str
    point: float
    magnitude: float


@dataclass(frozen=True)
class ValidationReport:
    grid: GridSpec
    violations: tuple = ()
    continuation: Optional[float] = None  # knot of the affine continuation, if any

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {
            "grid": {"t_min": self.grid.t_min, "t_max": self.grid.t_max,
                     "points": self.grid.points},
            "passed": self.passed,
            "continuation_knot": self.continuation,
            "violations": [[v.property, v.point, v.magnitude] for v in self.violations],
        }


def _check_values(f, grid: GridSpec, growth_level: float):
    ts = grid.values()
    out = []
    with np.errstate(all="ignore"):
        # the raw map: __call__ pins M(0) = 0 by construction
        v0 = float(np.asarray(f.raw(np.array([0.0])))[0])
        if not math.isfinite(v0):
            v0 = float(np.asarray(f.raw(np.array([1e-300])))[0])
        vals = np.asarray(f(ts), dtype=float)
        mids = np.asarray(f(np.concatenate(([0.5 * ts[0]], 0.5 * (ts[:-1] + ts[1:])))), dtype=float)
    if not (math.isfinite(v0) and abs(v0) <= 1e-12):
        out.append(Violation("zero_at_origin", 0.0, abs(v0) if math.isfinite(v0) else math.inf))
    bad = ~np.isfinite(vals)
    for i in np.flatnonzero(bad):
        out.append(Violation("domain", float(ts[i]), math.nan))
    ok = ~bad
    for i in np.flatnonzero(ok & (vals == 0)):
        out.append(Violation("degenerate", float(ts[i]), 0.0))
    for i in np.flatnonzero(ok & (vals < 0)):
        out.append(Violation("negative", float(ts[i]), float(-vals[i])))
    prev = np.concatenate(([0.0], vals[:-1]))
    with np.errstate(invalid="ignore"):  # inf - inf where the domain check already fired
        drop = prev - vals
        excess = mids - 0.5 * (prev + vals)
    for i in np.flatnonzero(ok & (drop > MONOTONE_RTOL * np.abs(vals))):
        out.append(Violation("decreasing", float(ts[i]), float(drop[i])))
    # midpoint convexity over each adjacent pair, (0, t_0) included
    for i in np.flatnonzero(np.isfinite(excess) & (excess > CONVEXITY_RTOL * np.abs(vals))):
        out.append(Violation("nonconvex", float(ts[i]), float(excess[i])))
    if ok[-1] and ok[-2] and not (vals[-1] > growth_level and vals[-1] > vals[-2]):
        out.append(Violation("bounded", float(ts[-1]), float(vals[-1])))
    return out


def _deriv5(f, x, h):
    xs = np.array([x - 2 * h, x - h, x + h, x + 2 * h])
    a, b, c, d = np.asarray(f(xs), dtype=float)
    return (a - 8 * b + 8 * c - d) / (12 * h)


# ---------------------------------------------------------------- the function

@dataclass(frozen=True)
class OrliczFunction:
    """An immutable, validated Orlicz function.

    ``M(t) = raw(scale * t)`` where ``raw`` is the expression or catalog
    formula, continued affinely (matched value and slope) beyond ``knot``
    when a knot is set.
    """

    name: str
    kind: str  # expr | power | power_log | custom
    raw: Callable = field(repr=False, compare=False)
    expr: Optional[OrliczExpr] = None
    p: Optional[float] = None
    scale: float = 1.0
    knot: Optional[float] = None
    knot_value: float = 0.0
    knot_slope: float = 0.0
    validation: Optional[ValidationReport] = field(default=None, repr=False, compare=False)
    raw_log: Optional[Callable] = field(default=None, repr=False, compare=False)
    _inverse_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    # -- evaluation
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        u = self.scale * t if self.scale != 1.0 else t
        with np.errstate(all="ignore"):
            if self.knot is None:
                v = self.raw(u)
            else:
                inside = u <= self.knot
                v = np.where(inside, self.raw(np.where(inside, u, self.knot)),
                             self.knot_value + self.knot_slope * (u - self.knot))
        if self.kind != "power" and (t == 0).any():
            v = np.where(t == 0, 0.0, v)
        return v if np.ndim(v) else float(v)

    @property
    def normalized(self) -> bool:
        return abs(self(1.0) - 1.0) <= 1e-14

    def log_at(self, log_t):
        """log M(exp(log_t)), accurate where M(t) or t underflows a double."""
        lt = np.asarray(log_t, dtype=float)
        lu = lt + math.log(self.scale)
        out = np.empty_like(lu)
        if self.kind == "power":
            out[...] = self.p * lu
            return out if out.ndim else float(out)
        flat_u, flat_o = lu.reshape(-1), out.reshape(-1)
        with np.errstate(all="ignore"):
            direct = np.log(self(np.exp(lt.reshape(-1))))
        for i, (u, d) in enumerate(zip(flat_u, direct)):
            if math.isfinite(d) and u > -600.0 and d > -600.0:
                flat_o[i] = d
            elif self.knot is not None and u > math.log(self.knot):
                flat_o[i] = d
            elif self.raw_log is not None:
                flat_o[i] = self.raw_log(u)
            elif self.expr is not None:
                # enough digits that 1 + t does not round to 1 (exp(t) - 1 and the like)
                with mpmath.workdps(int(-u / math.log(10)) + 30):
                    flat_o[i] = float(mpmath.log(_mp_eval(self.expr.ast, mpmath.exp(u))))
            else:
                flat_o[i] = d
        return out if out.ndim else float(out)

    def eval(self, t: float) -> float:
        """M(t) for t >= 0; +inf signals overflow."""
        if t < 0:
            raise ValueError("Orlicz functions are evaluated at t >= 0")
        v = self(float(t))
        if math.isnan(v):
            raise ValueError(f"{self.name} is undefined at t={t}")
        return v

    def inverse(self, y: float) -> float:
        """The t with M(t) = y, by bracketed bisection on the increasing branch."""
        if y < 0:
            raise ValueError("inverse needs y >= 0")
        if y == 0:
            return 0.0
        if not math.isfinite(y):
            raise OverflowError("y exceeds the representable range")
        cached = self._inverse_cache.get(y)
        if cached is not None:
            return cached
        t = self._solve_inverse(y)
        if len(self._inverse_cache) < 4096:
            self._inverse_cache[y] = t
        return t

    def _solve_inverse(self, y):
        hi = 1.0
        while self(hi) < y:
            hi *= 2.0
            if hi > 1e300:
                raise OverflowError("y exceeds the representable range")
        ly = math.log(y)
        # widen downwards with doubling exponent gaps: O(log log) evaluations
        lo, step = hi, 1
        while True:
            cand = math.ldexp(hi, -step)
            if cand < 1e-300:
                cand = 1e-300
            if self.log_at(math.log(cand)) < ly:
                lo = cand
                break
            if cand == 1e-300:
                raise OverflowError("y below the representable range")
            hi, step = cand, 2 * step
        t, _, _ = solve_increasing(lambda s: self.log_at(math.log(s)) - ly, lo, hi,
                                   rtol=4 * np.finfo(float).eps, ftol=1e-15)
        return t

    def rescaled(self, c: float) -> "OrliczFunction":
        """t -> M(c t)."""
        return replace(self, scale=self.scale * c, name=f"{self.name}@{c:.17g}")

    def normalize(self) -> "OrliczFunction":
        """Return the rescaling M(ct) with M(c) = 1, or self if already M(1) = 1."""
        if self.normalized:
            return self
        return self.rescaled(self.inverse(1.0))

    def describe(self) -> dict:
        d = {"name": self.name, "kind": self.kind, "scale": self.scale}
        if self.p is not None:
            d["p"] = self.p
        if self.expr is not None:
            d["expr"] = self.expr.source
        if self.knot is not None:
            d["affine_beyond"] = self.knot
            d["slope"] = self.knot_slope
        return d


def _continued(fn: OrliczFunction, knot: float, slope: Optional[float] = None):
    value = float(np.asarray(fn.raw(np.array([knot])))[0])
    if slope is None:
        slope = float(_deriv5(fn.raw, knot, 1e-3 * knot))
    return replace(fn, knot=knot, knot_value=value, knot_slope=slope)


def _finish(fn: OrliczFunction, grid: GridSpec, growth_level: float, allow_knot: bool):
    grid.check()
    violations = _check_values(fn, grid, growth_level)
    if violations and allow_knot and fn.knot is None and all(v.point > 1.0 for v in violations):
        # only the behaviour near 0 matters; continue affinely from t = 1
        cont = _continued(fn, 1.0)
        v2 = _check_values(cont, grid, growth_level)
        if not v2:
            report = ValidationReport(grid, (), continuation=1.0)
            return replace(cont, validation=report)
    report = ValidationReport(grid, tuple(violations), continuation=fn.knot)
    if violations:
        raise ValidationError(report)
    return replace(fn, validation=report)


def validate(expr: Union[OrliczExpr, str], grid: GridSpec = GridSpec(),
             growth_level: float = 1.0) -> OrliczFunction:
    """Validate an expression on ``grid`` and return an :class:`OrliczFunction`.

    Raises :class:`ValidationError` (carrying the full report) on failure.
    If every violation sits beyond t = 1 the expression is kept on (0, 1]
    and continued affinely from there; the report records the knot.
    """
    if isinstance(expr, str):
        expr = parse(expr)
    ast = expr.ast
    fn = OrliczFunction(name=expr.source, kind="expr",
                        raw=lambda t: _np_eval(ast, np.asarray(t, dtype=float)), expr=expr)
    return _finish(fn, grid, growth_level, allow_knot=True)


def power(p: float, grid: GridSpec = GridSpec()) -> OrliczFunction:
    """Catalog entry M(t) = t^p, p >= 1."""
    if p < 1:
        raise ValueError("power(p) is convex only for p >= 1")
    fn = OrliczFunction(name=f"power({p:g})", kind="power",
                        raw=lambda t: np.power(t, p), p=float(p))
    return _finish(fn, grid, 1.0, allow_knot=False)


def _power_log_raw(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(all="ignore"):
        return t * t / (1.0 - np.log(t))


def _power_log_log(u):
    return 2.0 * u - math.log1p(-u)


def power_log(grid: GridSpec = GridSpec()) -> OrliczFunction:
    """Catalog entry t^2 / (1 - ln t) on (0, 1], affine with slope 3 beyond."""
    fn = OrliczFunction(name="power_log", kind="power_log", raw=_power_log_raw,
                        raw_log=_power_log_log)
    fn = _continued(fn, 1.0, slope=3.0)
    return _finish(fn, grid, 1.0, allow_knot=False)


def from_callable(f: Callable, name: str = "custom", grid: GridSpec = GridSpec(),
                  log_f: Optional[Callable] = None) -> OrliczFunction:
    """Wrap a vectorised callable; it is validated like any other entry."""
    fn = OrliczFunction(name=name, kind="custom",
                        raw=lambda t: np.asarray(f(np.asarray(t, dtype=float)), dtype=float),
                        raw_log=log_f)
    return _finish(fn, grid, 1.0, allow_knot=False)


def resolve(spec: str, grid: GridSpec = GridSpec()) -> OrliczFunction:
    """Catalog tag (``power:P``, ``power_log``) or expression text."""
    s = spec.strip()
    if s == "power_log":
        return power_log(grid)
    if s.startswith("power:"):
        return power(float(s.split(":", 1)[1]), grid)
    return validate(s, grid)


def evaluate(M: OrliczFunction, t: float) -> float:
    return M.eval(t)


def inverse(M: OrliczFunction, y: float) -> float:
    return M.inverse(y)
