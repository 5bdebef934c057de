"""Parametrization language: parser, canonical printer and jet evaluator.

Grammar (whitespace insensitive)::

    tuple  := '(' expr (',' expr)+ ')'
    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | factor
    factor := base ('^' ['-'] integer)?
    base   := number | ident | '(' expr ')' | func '(' expr ')'
    func   := 'sin' | 'cos' | 'exp'

Parameters are named ``t1`` .. ``t4``.  Numbers are read as exact rationals.

A variety file starts with a header line::

    params n=2 ambient N=3 domain [-1,1]x[-1,1]

followed by one tuple (a plane-family file carries three tuples).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .jets import Jet, JetError, derivative_arrays, jet_elementary, to_fraction

FUNCTIONS = ("sin", "cos", "exp")
MAX_PARAMS = 4


class DSLError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line, self.col = line, col
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(f"{message}{where}")


class EvaluationError(ValueError):
    pass


# --------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Func:
    name: str
    arg: "Expr"


Expr = Union[Num, Var, Sym, Neg, BinOp, Pow, Func]


# ------------------------------------------------------------------ lexer

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)|(?P<num>\d+(?:\.\d*)?|\.\d+)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),])"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line0: int = 1) -> list[_Tok]:
    toks = []
    line, col, pos = line0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise DSLError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, chunk, line, col))
        for ch in chunk:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str, nparams: int | None, symbols=(), line0: int = 1):
        self.toks = _tokenize(text, line0)
        self.pos = 0
        self.nparams = nparams
        self.symbols = set(symbols)

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            shown = tok.text or "end of input"
            raise DSLError(f"expected {text!r}, found {shown!r}", tok.line, tok.col)
        return tok

    def at_end(self):
        tok = self.peek()
        if tok.kind != "eof":
            raise DSLError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)

    def tuple(self) -> tuple:
        self.expect("(")
        items = [self.expr()]
        while self.peek().text == ",":
            self.next()
            items.append(self.expr())
        self.expect(")")
        if len(items) < 2:
            tok = self.peek()
            raise DSLError("a tuple needs at least two entries", tok.line, tok.col)
        return tuple(items)

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek().text == "-":
            self.next()
            return Neg(self.unary())
        return self.factor()

    def factor(self):
        base = self.base()
        if self.peek().text == "^":
            self.next()
            sign = 1
            if self.peek().text == "-":
                self.next()
                sign = -1
            tok = self.next()
            if tok.kind != "num" or not tok.text.isdigit():
                raise DSLError("exponent must be an integer", tok.line, tok.col)
            return Pow(base, sign * int(tok.text))
        return base

    def base(self):
        tok = self.next()
        if tok.kind == "num":
            return Num(Fraction(tok.text))
        if tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(tok.text, arg)
            if tok.text in self.symbols:
                return Sym(tok.text)
            m = re.fullmatch(r"t([1-9]\d*)", tok.text)
            if m and self.nparams is not None:
                idx = int(m.group(1))
                if idx <= self.nparams:
                    return Var(idx)
            raise DSLError(f"unknown identifier {tok.text!r}", tok.line, tok.col)
        shown = tok.text or "end of input"
        raise DSLError(f"unexpected {shown!r}", tok.line, tok.col)


def parse_expr(text: str, nparams: int | None = MAX_PARAMS, symbols=()) -> Expr:
    """Parse a single expression; ``symbols`` are extra named constants."""
    p = _Parser(text, nparams, symbols)
    node = p.expr()
    p.at_end()
    return node


def parse_tuple(text: str, nparams: int = MAX_PARAMS, line0: int = 1) -> tuple:
    p = _Parser(text, nparams, (), line0)
    node = p.tuple()
    p.at_end()
    return node


# ---------------------------------------------------------------- printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _num_text(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    d = value.denominator
    for prime in (2, 5):
        while d % prime == 0:
            d //= prime
    if d != 1:
        raise DSLError(f"literal {value} has no finite decimal form")
    digits = 0
    while (value * 10**digits).denominator != 1:
        digits += 1
    s = str(int(value * 10**digits)).rjust(digits + 1, "0")
    return f"{s[:-digits]}.{s[-digits:]}"


def to_text(node: Expr) -> str:
    """Canonical text; parsing it yields an identical tree."""
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, Var):
        return f"t{node.index}"
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Func):
        return f"{node.name}({to_text(node.arg)})"
    if isinstance(node, Pow):
        base = to_text(node.base)
        if not isinstance(node.base, (Num, Var, Sym, Func)):
            base = f"({base})"
        return f"{base}^{node.exponent}"
    if isinstance(node, Neg):
        inner = to_text(node.arg)
        if isinstance(node.arg, BinOp):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        prec = _PREC[node.op]
        left = to_text(node.left)
        if isinstance(node.left, BinOp) and _PREC[node.left.op] < prec:
            left = f"({left})"
        right = to_text(node.right)
        if isinstance(node.right, BinOp) and _PREC[node.right.op] <= prec:
            right = f"({right})"
        return f"{left} {node.op} {right}" if prec == 1 else f"{left}*{right}" if node.op == "*" else f"{left}/{right}"
    raise TypeError(f"not an expression node: {node!r}")


def tuple_text(exprs) -> str:
    return "(" + ", ".join(to_text(e) for e in exprs) + ")"


# ------------------------------------------------------------- evaluation


def eval_exact(node: Expr, values: dict | None = None) -> Fraction:
    """Exact rational value; ``values`` maps symbol names and ``t<i>``."""
    values = values or {}
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Sym):
        return to_fraction(values[node.name])
    if isinstance(node, Var):
        return to_fraction(values[f"t{node.index}"])
    if isinstance(node, Neg):
        return -eval_exact(node.arg, values)
    if isinstance(node, Pow):
        base = eval_exact(node.base, values)
        if base == 0 and node.exponent < 0:
            raise EvaluationError("zero to a negative power")
        return base**node.exponent
    if isinstance(node, BinOp):
        a, b = eval_exact(node.left, values), eval_exact(node.right, values)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0:
            raise EvaluationError("division by zero")
        return a / b
    raise EvaluationError(f"{node!r} has no exact rational value")


def _eval(node: Expr, env: list[Jet], order: int, nvars: int, batch):
    if isinstance(node, Num):
        return Jet.constant(float(node.value), order, nvars, batch)
    if isinstance(node, Var):
        return env[node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.arg, env, order, nvars, batch)
    if isinstance(node, Pow):
        base = _eval(node.base, env, order, nvars, batch)
        try:
            return base**node.exponent
        except ZeroDivisionError as exc:
            raise EvaluationError(str(exc)) from None
    if isinstance(node, Func):
        return jet_elementary(node.name, _eval(node.arg, env, order, nvars, batch))
    if isinstance(node, BinOp):
        a = _eval(node.left, env, order, nvars, batch)
        b = _eval(node.right, env, order, nvars, batch)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        try:
            return a / b
        except ZeroDivisionError as exc:
            raise EvaluationError(str(exc)) from None
    raise EvaluationError(f"cannot evaluate {node!r}")


def eval_exprs_jet(exprs, u, order: int) -> list[Jet]:
    """Jets of each expression at parameter point(s) ``u``.

    ``u`` has shape ``(n,)`` or ``batch + (n,)``.
    """
    u = np.asarray(u, dtype=float)
    nvars = u.shape[-1]
    batch = u.shape[:-1]
    try:
        env = [Jet.variable(u[..., i], i, order, nvars) for i in range(nvars)]
        return [_eval(e, env, order, nvars, batch) for e in exprs]
    except JetError as exc:
        raise EvaluationError(str(exc)) from None


# ------------------------------------------------------------- variety specs


@dataclass(frozen=True)
class VarietySpec:
    """Map from an ``n``-parameter box into ``P^N`` given by N+1 expressions."""

    n: int
    N: int
    exprs: tuple
    domain: tuple  # ((lo, hi), ...) as Fractions

    def __post_init__(self):
        if not 1 <= self.n <= MAX_PARAMS:
            raise DSLError(f"parameter count must be in 1..{MAX_PARAMS}")
        if len(self.exprs) != self.N + 1:
            raise DSLError(f"expected {self.N + 1} coordinate expressions, got {len(self.exprs)}")
        if len(self.domain) != self.n:
            raise DSLError(f"domain has {len(self.domain)} intervals for {self.n} parameters")
        for lo, hi in self.domain:
            if not lo < hi:
                raise DSLError(f"empty domain interval [{lo}, {hi}]")
        for e in self.exprs:
            for idx in _var_indices(e):
                if idx > self.n:
                    raise DSLError(f"unknown identifier 't{idx}'")

    @property
    def lower(self) -> np.ndarray:
        return np.array([float(lo) for lo, _ in self.domain])

    @property
    def upper(self) -> np.ndarray:
        return np.array([float(hi) for _, hi in self.domain])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower) and np.all(u <= self.upper))

    def text(self) -> str:
        return header_text(self.n, self.N, self.domain) + "\n" + tuple_text(self.exprs) + "\n"

    def evaluate(self, u) -> np.ndarray:
        """Coordinates at parameter point(s) ``u`` (shape ``batch + (N+1,)``)."""
        jets = eval_exprs_jet(self.exprs, u, 1)
        return np.stack([j.value for j in jets], axis=-1)

    def derivatives(self, u, order: int):
        """``[x, X1, ..., X_order]`` partial derivative arrays at ``u``."""
        return derivative_arrays(eval_jet(self, u, order), order)


def _var_indices(node):
    if isinstance(node, Var):
        yield node.index
    for child in ("arg", "left", "right", "base"):
        sub = getattr(node, child, None)
        if sub is not None:
            yield from _var_indices(sub)


def eval_jet(spec: VarietySpec, u, order: int) -> list[Jet]:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != spec.n:
        raise EvaluationError(f"expected {spec.n} parameter values")
    if u.ndim == 1 and not spec.contains(u):
        raise EvaluationError(f"parameter point {u.tolist()} is outside the domain")
    return eval_exprs_jet(spec.exprs, u, order)


# ------------------------------------------------------------ file format

_HEADER_RE = re.compile(
    r"^\s*params\s+n\s*=\s*(\d+)\s+ambient\s+N\s*=\s*(\d+)\s+domain\s+(.*?)\s*:?\s*$"
)
_INTERVAL_RE = re.compile(r"\[\s*([^,\]]+?)\s*,\s*([^\]]+?)\s*\]")


def header_text(n: int, N: int, domain) -> str:
    box = "x".join(f"[{_bound_text(lo)},{_bound_text(hi)}]" for lo, hi in domain)
    return f"params n={n} ambient N={N} domain {box}"


def _bound_text(v: Fraction) -> str:
    v = to_fraction(v)
    try:
        return _num_text(abs(v)) if v >= 0 else "-" + _num_text(-v)
    except DSLError:
        return f"{v.numerator}/{v.denominator}"


def _parse_bound(text: str, line: int) -> Fraction:
    try:
        return Fraction(text.replace(" ", ""))
    except (ValueError, ZeroDivisionError):
        raise DSLError(f"bad domain bound {text!r}", line, 1) from None


def _parse_header(line_text: str, line: int):
    m = _HEADER_RE.match(line_text)
    if not m:
        raise DSLError("expected header 'params n=<n> ambient N=<N> domain [a,b]x...'", line, 1)
    n, N, box = int(m.group(1)), int(m.group(2)), m.group(3)
    intervals = _INTERVAL_RE.findall(box)
    if not intervals or "x".join(f"[{a},{b}]" for a, b in intervals).replace(" ", "") != box.replace(" ", ""):
        raise DSLError(f"malformed domain {box!r}", line, 1)
    domain = tuple((_parse_bound(a, line), _parse_bound(b, line)) for a, b in intervals)
    return n, N, domain


def _split_body(text: str):
    lines = [ln.split("#", 1)[0] for ln in text.splitlines()]
    idx = next((i for i, ln in enumerate(lines) if ln.strip()), None)
    if idx is None:
        raise DSLError("empty input", 1, 1)
    return lines, idx


def parse(text: str) -> VarietySpec:
    """Parse a variety file (header line plus one tuple)."""
    lines, idx = _split_body(text)
    n, N, domain = _parse_header(lines[idx], idx + 1)
    body = "\n".join(lines[idx + 1 :])
    exprs = parse_tuple(body, n, line0=idx + 2)
    spec = VarietySpec(n, N, exprs, domain)
    check_nonvanishing(spec)
    return spec


def check_nonvanishing(spec: VarietySpec, samples: int = 5) -> None:
    """Reject specs whose coordinates all vanish at a sample point."""
    rng = np.random.default_rng(0)
    pts = spec.lower + rng.random((samples, spec.n)) * (spec.upper - spec.lower)
    for u in np.vstack([spec.center, pts]):
        try:
            x = spec.evaluate(u)
        except EvaluationError:
            continue
        if not np.any(x):
            raise DSLError(f"all coordinates vanish at parameter point {u.tolist()}")


def parse_tuples(text: str):
    """Header plus several tuples, one per non-empty line group."""
    lines, idx = _split_body(text)
    n, N, domain = _parse_header(lines[idx], idx + 1)
    body = "\n".join(lines[idx + 1 :])
    p = _Parser(body, n, (), idx + 2)
    tuples = []
    while p.peek().kind != "eof":
        tuples.append(p.tuple())
    return n, N, domain, tuples


def spec_from_strings(exprs, n: int, domain) -> VarietySpec:
    """Convenience builder: ``exprs`` as strings, domain as pairs of numbers."""
    nodes = tuple(parse_expr(e, n) if isinstance(e, str) else e for e in exprs)
    dom = tuple((to_fraction(a), to_fraction(b)) for a, b in domain)
    return VarietySpec(n, len(nodes) - 1, nodes, dom)


def transform_spec(spec: VarietySpec, matrix=None, affine=None) -> VarietySpec:
    """Apply a projective map to the coordinates and/or an affine change of
    parameters ``u = A v + b`` (``affine=(A, b, new_domain)``)."""
    exprs = spec.exprs
    domain = spec.domain
    if affine is not None:
        A, b, new_domain = affine
        sub = {}
        for i in range(spec.n):
            node = _const(b[i])
            for j in range(spec.n):
                if A[i][j] != 0:
                    node = BinOp("+", node, BinOp("*", _const(A[i][j]), Var(j + 1)))
            sub[i + 1] = node
        exprs = tuple(substitute(e, sub) for e in exprs)
        domain = tuple((to_fraction(lo), to_fraction(hi)) for lo, hi in new_domain)
    if matrix is not None:
        M = [[to_fraction(v) for v in row] for row in matrix]
        new = []
        for row in M:
            node = None
            for c, e in zip(row, exprs):
                if c == 0:
                    continue
                term = BinOp("*", _const(c), e)
                node = term if node is None else BinOp("+", node, term)
            new.append(node if node is not None else Num(Fraction(0)))
        exprs = tuple(new)
    return VarietySpec(spec.n, len(exprs) - 1, exprs, domain)


def _const(value) -> Expr:
    v = to_fraction(value)
    mag = abs(v)
    node = Num(mag) if mag.denominator == 1 else BinOp("/", Num(Fraction(mag.numerator)), Num(Fraction(mag.denominator)))
    return Neg(node) if v < 0 else node


def substitute(node: Expr, sub: dict) -> Expr:
    """Replace ``Var(i)`` by ``sub[i]``."""
    if isinstance(node, Var):
        return sub.get(node.index, node)
    if isinstance(node, (Num, Sym)):
        return node
    if isinstance(node, Neg):
        return Neg(substitute(node.arg, sub))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, sub), node.exponent)
    if isinstance(node, Func):
        return Func(node.name, substitute(node.arg, sub))
    return BinOp(node.op, substitute(node.left, sub), substitute(node.right, sub))
