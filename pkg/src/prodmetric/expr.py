"""A small arithmetic expression language for user-defined F, g and psi.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right-associative, binds tighter than unary minus
    atom    := NUMBER | VAR | FUNC '(' expr (',' expr)* ')'
             | 'if' '(' expr CMP expr ',' expr ',' expr ')' | '(' expr ')'
    CMP     := '<' | '<=' | '>' | '>=' | '=' | '≤' | '≥'

Functions: ``sqrt exp log abs`` (one argument) and ``min max`` (two or more).
Evaluation is vectorised over rows with numpy; scalar evaluation is the batch
path applied to a single row, so both give bit-identical results.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import (
    ArityError,
    EvaluationError,
    ExprArityError,
    ExprSyntaxError,
    UnknownIdentifier,
)

Span = tuple[int, int]

UNARY_FUNCS = ("sqrt", "exp", "log", "abs")
VARIADIC_FUNCS = ("min", "max")
COMPARISONS = ("<", "<=", ">", ">=", "=")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    index: int
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Node", ...]
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Node"
    right: "Node"
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: Compare
    then: "Node"
    orelse: "Node"
    span: Span = field(default=(0, 0), compare=False, repr=False)


Node = Union[Num, Var, Neg, BinOp, Call, If]


@dataclass(frozen=True)
class Context:
    """Fixes the variable names an expression may use, in slot order."""

    kind: str
    variables: tuple[str, ...]

    @classmethod
    def combiner(cls, n: int) -> "Context":
        if n < 1:
            raise ValueError("combiner arity must be >= 1")
        return cls("combiner", tuple(f"x{i}" for i in range(1, n + 1)))

    @property
    def arity(self) -> int:
        return len(self.variables)


GENERATOR = Context("generator", ("a", "b"))
PSI = Context("psi", ("t",))


@dataclass(frozen=True)
class Expression:
    root: Node
    context: Context
    source: str = field(default="", compare=False)

    @property
    def arity(self) -> int:
        return self.context.arity

    def __call__(self, *env: float) -> float:
        return evaluate(self, env)

    def __str__(self) -> str:
        return self.source or to_text(self.root)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|==|[-+*/^(),<>=≤≥])
    """,
    re.VERBOSE,
)

_OP_ALIASES = {"≤": "<=", "≥": ">=", "==": "="}


@dataclass(frozen=True)
class _Token:
    kind: str  # 'num' | 'ident' | 'op' | 'eof'
    text: str
    start: int
    end: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            if kind == "op":
                tok = _OP_ALIASES.get(tok, tok)
            tokens.append(_Token(kind, tok, m.start(), m.end()))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text), len(text)))
    return tokens


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_ATOM_START = ("number", "identifier", "(", "-")


class _Parser:
    def __init__(self, text: str, context: Context):
        self.text = text
        self.context = context
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok: _Token, expected: Sequence[str] = ()):
        raise ExprSyntaxError(message, _byte_offset(self.text, tok.start), tuple(expected))

    def describe(self, tok: _Token) -> str:
        return "end of input" if tok.kind == "eof" else f"token {tok.text!r}"

    def expect(self, op: str) -> _Token:
        if self.tok.kind == "op" and self.tok.text == op:
            return self.advance()
        self.error(f"unexpected {self.describe(self.tok)}", self.tok, (op,))

    def parse(self) -> Node:
        if self.tok.kind == "eof":
            self.error("empty expression", self.tok, _ATOM_START)
        node = self.expr()
        if self.tok.kind != "eof":
            self.error(
                f"unexpected {self.describe(self.tok)}",
                self.tok,
                ("+", "-", "*", "/", "^", "end of input"),
            )
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            right = self.term()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.advance().text
            right = self.unary()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            start = self.advance().start
            operand = self.unary()
            return Neg(operand, (start, operand.span[1]))
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            exponent = self.unary()
            return BinOp("^", base, exponent, (base.span[0], exponent.span[1]))
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text), (tok.start, tok.end))
        if tok.kind == "ident":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(tok)
            return self.variable(tok)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.error(f"unexpected {self.describe(tok)}", tok, _ATOM_START)

    def variable(self, tok: _Token) -> Var:
        try:
            index = self.context.variables.index(tok.text)
        except ValueError:
            allowed = ", ".join(self.context.variables)
            raise UnknownIdentifier(
                f"unknown identifier {tok.text!r} (allowed variables: {allowed})",
                _byte_offset(self.text, tok.start),
            ) from None
        return Var(tok.text, index, (tok.start, tok.end))

    def call(self, name_tok: _Token) -> Node:
        name = name_tok.text
        if name not in UNARY_FUNCS + VARIADIC_FUNCS + ("if",):
            raise UnknownIdentifier(
                f"unknown function {name!r}", _byte_offset(self.text, name_tok.start)
            )
        self.expect("(")
        if name == "if":
            cond = self.comparison()
            self.expect(",")
            then = self.expr()
            self.expect(",")
            orelse = self.expr()
            close = self.expect(")")
            return If(cond, then, orelse, (name_tok.start, close.end))
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        close = self.expect(")")
        span = (name_tok.start, close.end)
        if name in UNARY_FUNCS and len(args) != 1:
            raise ExprArityError(
                f"{name}() takes exactly 1 argument, got {len(args)}",
                _byte_offset(self.text, name_tok.start),
            )
        if name in VARIADIC_FUNCS and len(args) < 2:
            raise ExprArityError(
                f"{name}() takes at least 2 arguments, got {len(args)}",
                _byte_offset(self.text, name_tok.start),
            )
        return Call(name, tuple(args), span)

    def comparison(self) -> Compare:
        left = self.expr()
        tok = self.tok
        if tok.kind != "op" or tok.text not in COMPARISONS:
            self.error(f"unexpected {self.describe(tok)}", tok, COMPARISONS)
        self.advance()
        right = self.expr()
        return Compare(tok.text, left, right, (left.span[0], right.span[1]))


def parse(text: str, context: Context) -> Expression:
    """Parse ``text`` into an :class:`Expression` whose variables come from ``context``."""
    return Expression(_Parser(text, context).parse(), context, text)


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------


def format_number(x: float) -> str:
    """Shortest round-trip text for ``x``, without a trailing ``.0``."""
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def to_text(node: Node) -> str:
    """Fully parenthesised text that parses back to a structurally equal tree."""
    if isinstance(node, Num):
        return format_number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_text(a) for a in node.args)})"
    if isinstance(node, If):
        c = node.cond
        return (
            f"if({to_text(c.left)} {c.op} {to_text(c.right)}, "
            f"{to_text(node.then)}, {to_text(node.orelse)})"
        )
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_UFUNCS = {"sqrt": np.sqrt, "exp": np.exp, "log": np.log, "abs": np.abs}
_CMP = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "=": np.equal,
}


class _BatchEvaluator:
    """Evaluates a tree over the rows of ``X``.

    Each visit returns ``(values, err)``; ``err`` marks rows where evaluation
    failed on the path actually taken. Per-node failures are logged in
    evaluation order so the earliest offending node can be reported.
    """

    def __init__(self, X: np.ndarray):
        self.X = X
        self.m = X.shape[0]
        self.failures: list[tuple[Node, str, np.ndarray]] = []

    def fail(self, node: Node, message: str, mask: np.ndarray, active: np.ndarray):
        mask = mask & active
        if mask.any():
            self.failures.append((node, message, mask))
        return mask

    def visit(self, node: Node, active: np.ndarray):
        if isinstance(node, Num):
            return np.full(self.m, node.value), np.zeros(self.m, dtype=bool)
        if isinstance(node, Var):
            v = self.X[:, node.index]
            return v, self.fail(node, "non-finite input", ~np.isfinite(v), active)
        if isinstance(node, Neg):
            v, err = self.visit(node.operand, active)
            return -v, err
        if isinstance(node, BinOp):
            return self.binop(node, active)
        if isinstance(node, Call):
            return self.call(node, active)
        if isinstance(node, If):
            c, cerr = self.compare(node.cond, active)
            ok = active & ~cerr
            t, terr = self.visit(node.then, ok & c)
            e, eerr = self.visit(node.orelse, ok & ~c)
            return np.where(c, t, e), cerr | np.where(c, terr, eerr)
        raise TypeError(f"not an expression node: {node!r}")

    def compare(self, node: Compare, active):
        lv, lerr = self.visit(node.left, active)
        rv, rerr = self.visit(node.right, active)
        return _CMP[node.op](lv, rv), lerr | rerr

    def binop(self, node: BinOp, active):
        lv, lerr = self.visit(node.left, active)
        rv, rerr = self.visit(node.right, active)
        err = lerr | rerr
        op = node.op
        if op == "+":
            v = lv + rv
        elif op == "-":
            v = lv - rv
        elif op == "*":
            v = lv * rv
        elif op == "/":
            err |= self.fail(node, "division by zero", (rv == 0) & ~err, active)
            v = lv / rv
        else:
            # A literal exponent goes in as a scalar so numpy can take its exact fast paths.
            v = np.power(lv, node.right.value if isinstance(node.right, Num) else rv)
            bad = (lv < 0) & (rv != np.floor(rv)) | (lv == 0) & (rv < 0)
            err |= self.fail(node, "invalid power", bad & ~err, active)
        err |= self.fail(node, "non-finite result", ~np.isfinite(v) & ~err, active)
        return v, err

    def call(self, node: Call, active):
        vals, err = [], np.zeros(self.m, dtype=bool)
        for arg in node.args:
            v, e = self.visit(arg, active)
            vals.append(v)
            err = err | e
        name = node.func
        if name in VARIADIC_FUNCS:
            reduce = np.minimum if name == "min" else np.maximum
            v = vals[0]
            for w in vals[1:]:
                v = reduce(v, w)
        else:
            x = vals[0]
            if name == "sqrt":
                err |= self.fail(node, "sqrt of negative value", (x < 0) & ~err, active)
            elif name == "log":
                err |= self.fail(node, "log of nonpositive value", (x <= 0) & ~err, active)
            v = _UFUNCS[name](x)
        err |= self.fail(node, "non-finite result", ~np.isfinite(v) & ~err, active)
        return v, err


def evaluate_batch(expr: Expression, X) -> np.ndarray:
    """Evaluate ``expr`` on every row of the 2-D array ``X``.

    Raises :class:`EvaluationError` for the first failing row, naming the
    earliest offending node.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != expr.arity:
        raise ArityError(f"expected rows of length {expr.arity}, got shape {X.shape}")
    ev = _BatchEvaluator(X)
    with np.errstate(all="ignore"):
        values, err = ev.visit(expr.root, np.ones(X.shape[0], dtype=bool))
    if err.any():
        row = int(np.argmax(err))
        node, message, _ = next(f for f in ev.failures if f[2][row])
        exc = EvaluationError(
            f"{message} in {to_text(node)!r} at input {tuple(X[row].tolist())}", node.span
        )
        exc.row = row
        raise exc
    return values


def evaluate(expr: Expression, env: Sequence[float]) -> float:
    """Evaluate ``expr`` at a single point."""
    return float(evaluate_batch(expr, np.asarray([env], dtype=float))[0])
