"""Semi-triangle conditions, combiner functions and triangle triplets.

A condition is generated by a nonreducing ``g`` (``g(a, b) >= max(a, b)``);
a space satisfies it when ``d(x, z) <= g(d(x, y), d(y, z))`` for all points.
A combiner ``F`` turns the coordinate distances of a product space into one
distance, ``D(x, y) = F(d_1(x_1, y_1), ..., d_n(x_n, y_n))``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .errors import (
    ArityError,
    EvaluationError,
    InputError,
    InvalidCombiner,
    InvalidCondition,
)

#: Slack on every ``<=`` in triplet tests: absolute below 1, relative above.
TOL = 1e-12


def leq(x, y):
    """``x <= y`` up to :data:`TOL`; works elementwise on arrays."""
    return x <= y + TOL * np.maximum(1.0, np.abs(y))


# ---------------------------------------------------------------------------
# Semi-triangle conditions
# ---------------------------------------------------------------------------


class Kind(str, enum.Enum):
    METRIC = "M"
    ULTRAMETRIC = "U"
    BMETRIC = "B"
    STRONGB = "S"
    TRIANGLE = "T"
    CUSTOM = "G"


class Mode(str, enum.Enum):
    LITERAL = "literal"
    SYMMETRIZED = "symmetrized"


@lru_cache(maxsize=1)
def _validation_grid() -> tuple[np.ndarray, np.ndarray]:
    """10^4 stratified points over [0, 1e6]^2 plus the two axes.

    Strata edges are 0 followed by 100 log-spaced values in [1e-6, 1e6];
    one uniform point per cell, drawn with a fixed seed.
    """
    edges = np.concatenate([[0.0], np.logspace(-6, 6, 100)])
    lo, hi = edges[:-1], edges[1:]
    rng = np.random.default_rng(20240117)
    ia, ib = np.meshgrid(np.arange(100), np.arange(100), indexing="ij")
    ia, ib = ia.ravel(), ib.ravel()
    a = lo[ia] + rng.random(ia.size) * (hi[ia] - lo[ia])
    b = lo[ib] + rng.random(ib.size) * (hi[ib] - lo[ib])
    axis = edges
    zeros = np.zeros_like(axis)
    a = np.concatenate([a, axis, zeros])
    b = np.concatenate([b, zeros, axis])
    return a, b


@dataclass(frozen=True)
class SemiTriangleCondition:
    """A condition ``d(x, z) <= g(d(x, y), d(y, z))``.

    Build with the class methods (:meth:`metric`, :meth:`bmetric`, ...) or
    :func:`parse_condition`. Expression-based kinds are validated on
    construction by sampling; built-in kinds are exact.
    """

    kind: Kind
    K: float | None = None
    expression: ex.Expression | None = None
    symmetric: bool = field(default=True, compare=False)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (Kind.BMETRIC, Kind.STRONGB):
            if self.K is None or not np.isfinite(self.K) or self.K < 1:
                raise InvalidCondition(f"relaxation constant must be finite and >= 1, got {self.K!r}")
            object.__setattr__(self, "K", float(self.K))
        elif self.K is not None:
            raise InvalidCondition(f"condition {kind.value} takes no constant")
        if kind in (Kind.TRIANGLE, Kind.CUSTOM):
            if self.expression is None:
                raise InvalidCondition(f"condition {kind.value} needs an expression")
            self._validate_expression()
        object.__setattr__(self, "symmetric", self._compute_symmetric())

    # -- constructors -------------------------------------------------------

    @classmethod
    def metric(cls) -> "SemiTriangleCondition":
        return cls(Kind.METRIC)

    @classmethod
    def ultrametric(cls) -> "SemiTriangleCondition":
        return cls(Kind.ULTRAMETRIC)

    @classmethod
    def bmetric(cls, K: float) -> "SemiTriangleCondition":
        return cls(Kind.BMETRIC, K)

    @classmethod
    def strong_b(cls, K: float) -> "SemiTriangleCondition":
        return cls(Kind.STRONGB, K)

    @classmethod
    def triangle_fn(cls, psi: str | ex.Expression) -> "SemiTriangleCondition":
        if isinstance(psi, str):
            psi = ex.parse(psi, ex.PSI)
        return cls(Kind.TRIANGLE, expression=psi)

    @classmethod
    def custom(cls, g: str | ex.Expression) -> "SemiTriangleCondition":
        if isinstance(g, str):
            g = ex.parse(g, ex.GENERATOR)
        return cls(Kind.CUSTOM, expression=g)

    # -- evaluation ---------------------------------------------------------

    def g_batch(self, a, b) -> np.ndarray:
        """Generator values for arrays ``a``, ``b`` of equal shape."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        kind = self.kind
        if kind is Kind.METRIC:
            return a + b
        if kind is Kind.ULTRAMETRIC:
            return np.maximum(a, b)
        if kind is Kind.BMETRIC:
            return self.K * (a + b)
        if kind is Kind.STRONGB:
            return self.K * a + b
        shape = np.broadcast(a, b).shape
        a, b = np.broadcast_to(a, shape).ravel(), np.broadcast_to(b, shape).ravel()
        if kind is Kind.TRIANGLE:
            out = ex.evaluate_batch(self.expression, (a + b)[:, None])
        else:
            out = ex.evaluate_batch(self.expression, np.column_stack([a, b]))
        if (out < 0).any():
            i = int(np.argmax(out < 0))
            raise EvaluationError(
                f"generator {self} is negative at ({float(a[i])!r}, {float(b[i])!r}): {float(out[i])!r}",
                self.expression.root.span,
            )
        return out.reshape(shape)

    def g(self, a: float, b: float) -> float:
        return float(self.g_batch(np.array([a]), np.array([b]))[0])

    @property
    def default_mode(self) -> Mode:
        return Mode.LITERAL if self.symmetric else Mode.SYMMETRIZED

    # -- validation ---------------------------------------------------------

    def _validate_expression(self):
        a, b = _validation_grid()
        try:
            values = self.g_batch(a, b)
        except EvaluationError as exc:
            raise InvalidCondition(f"generator {self} fails to evaluate: {exc}") from None
        bad = ~leq(np.maximum(a, b), values)
        if bad.any():
            i = int(np.argmax(bad))
            raise InvalidCondition(
                f"generator {self} is not nonreducing: g({float(a[i])!r}, {float(b[i])!r}) = {float(values[i])!r}"
            )
        if self.kind is Kind.TRIANGLE:
            zero = ex.evaluate(self.expression, [0.0])
            if zero != 0:
                raise InvalidCondition(f"psi(0) must be 0, got {zero!r}")
            t = np.unique(np.concatenate([[0.0], a + b]))
            psi = ex.evaluate_batch(self.expression, t[:, None])
            drops = ~leq(psi[:-1], psi[1:])
            if drops.any():
                i = int(np.argmax(drops))
                raise InvalidCondition(
                    f"psi is not nondecreasing: psi({float(t[i])!r}) = {float(psi[i])!r} > psi({float(t[i + 1])!r}) = {float(psi[i + 1])!r}"
                )

    def _compute_symmetric(self) -> bool:
        if self.kind is Kind.STRONGB:
            return self.K == 1.0
        if self.kind is not Kind.CUSTOM:
            return True
        a, b = _validation_grid()
        return bool(np.array_equal(self.g_batch(a, b), self.g_batch(b, a)))

    # -- text ---------------------------------------------------------------

    def __str__(self) -> str:
        if self.kind in (Kind.BMETRIC, Kind.STRONGB):
            return f"{self.kind.value}:{ex.format_number(self.K)}"
        if self.kind in (Kind.TRIANGLE, Kind.CUSTOM):
            return f"{self.kind.value}:{self.expression}"
        return self.kind.value

    def __repr__(self) -> str:
        return f"SemiTriangleCondition({str(self)!r})"


M = SemiTriangleCondition.metric()
U = SemiTriangleCondition.ultrametric()


def parse_condition(text: str) -> SemiTriangleCondition:
    """Parse ``M``, ``U``, ``B:<K>``, ``S:<K>``, ``T:<expr in t>`` or ``G:<expr in a,b>``."""
    text = text.strip()
    head, sep, body = text.partition(":")
    head = head.strip().upper()
    if head in ("M", "U") and not sep:
        return SemiTriangleCondition(Kind(head))
    if head in ("B", "S") and sep:
        try:
            K = float(body)
        except ValueError:
            raise InvalidCondition(f"bad relaxation constant in {text!r}") from None
        return SemiTriangleCondition(Kind(head), K)
    if head == "T" and sep:
        return SemiTriangleCondition.triangle_fn(body)
    if head == "G" and sep:
        return SemiTriangleCondition.custom(body)
    raise InvalidCondition(f"unrecognised condition {text!r}")


def split_top_level(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside parentheses."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == sep and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return parts


def parse_conditions(text: str) -> list[SemiTriangleCondition]:
    """Parse a comma-separated, per-coordinate list such as ``"B:2,S:1.5,M"``."""
    parts = split_top_level(text)
    if not text.strip() or any(not p.strip() for p in parts):
        raise InvalidCondition(f"empty entry in condition list {text!r}")
    return [parse_condition(p) for p in parts]


def conditions_text(conds: Sequence[SemiTriangleCondition]) -> str:
    return ",".join(str(c) for c in conds)


# ---------------------------------------------------------------------------
# Triplets
# ---------------------------------------------------------------------------


def _check_nonneg(name, values):
    for v in values:
        if not np.isfinite(v) or v < 0:
            raise InputError(f"triplet entry {name} must be finite and nonnegative, got {v!r}")


@dataclass(frozen=True)
class Triplet1D:
    a: float
    b: float
    c: float

    def __post_init__(self):
        for name in "abc":
            object.__setattr__(self, name, float(getattr(self, name)))
        _check_nonneg("abc", (self.a, self.b, self.c))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


@dataclass(frozen=True)
class TripletND:
    a: tuple[float, ...]
    b: tuple[float, ...]
    c: tuple[float, ...]

    def __post_init__(self):
        for name in "abc":
            object.__setattr__(self, name, tuple(float(v) for v in np.ravel(getattr(self, name))))
        if not (len(self.a) == len(self.b) == len(self.c)):
            raise ArityError(
                f"triplet vectors differ in length: {len(self.a)}, {len(self.b)}, {len(self.c)}"
            )
        for name in "abc":
            _check_nonneg(name, getattr(self, name))

    @property
    def n(self) -> int:
        return len(self.a)

    def coordinate(self, i: int) -> Triplet1D:
        return Triplet1D(self.a[i], self.b[i], self.c[i])

    def __iter__(self):
        return iter((self.a, self.b, self.c))


def triplet_mask(cond: SemiTriangleCondition, A, B, C, mode: Mode | None = None) -> np.ndarray:
    """Vectorised :func:`is_triplet_1d` over arrays of equal shape."""
    mode = cond.default_mode if mode is None else Mode(mode)
    A, B, C = (np.asarray(v, dtype=float) for v in (A, B, C))
    zero = (A == 0) | (B == 0) | (C == 0)
    out = ((A == 0) & (B == C)) | ((B == 0) & (A == C)) | ((C == 0) & (A == B))
    pos = ~zero
    if pos.any():
        a, b, c = A[pos], B[pos], C[pos]
        g = cond.g_batch
        ok = leq(a, g(b, c)) & leq(b, g(c, a)) & leq(c, g(a, b))
        if mode is Mode.SYMMETRIZED:
            ok &= leq(a, g(c, b)) & leq(b, g(a, c)) & leq(c, g(b, a))
        out = out.copy()
        out[pos] = ok
    return out


def is_triplet_1d(cond: SemiTriangleCondition, t: Triplet1D, mode: Mode | None = None) -> bool:
    """Is ``t`` a G-triangle triplet for the condition?

    With a zero entry the triplet must be a permutation of ``(0, l, l)``
    (exact comparison). ``mode=None`` picks the condition's default:
    symmetrized for non-symmetric generators, literal otherwise.
    """
    return bool(triplet_mask(cond, [t.a], [t.b], [t.c], mode)[0])


def triplet_nd_mask(conds: Sequence[SemiTriangleCondition], A, B, C, mode=None) -> np.ndarray:
    """Row mask for ``(count, n)`` arrays; every coordinate must pass."""
    A, B, C = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (A, B, C))
    if A.shape[1] != len(conds):
        raise ArityError(f"{len(conds)} conditions for triplets of length {A.shape[1]}")
    ok = np.ones(A.shape[0], dtype=bool)
    for i, cond in enumerate(conds):
        ok &= triplet_mask(cond, A[:, i], B[:, i], C[:, i], mode)
    return ok


def is_triplet_nd(conds: Sequence[SemiTriangleCondition], t: TripletND, mode: Mode | None = None) -> bool:
    if t.n != len(conds):
        raise ArityError(f"{len(conds)} conditions for a triplet of length {t.n}")
    return all(is_triplet_1d(cond, t.coordinate(i), mode) for i, cond in enumerate(conds))


# ---------------------------------------------------------------------------
# Combiners
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Facts:
    """What is known in closed form about a built-in combiner at a given arity.

    ``None`` means unknown; ``qsa`` is a quasi-subadditivity constant (1 means
    subadditive); ``value_range`` bounds F on nonzero inputs.
    """

    amenable: bool | None = None
    monotone: bool | None = None
    qsa: float | None = None
    value_range: tuple[float, float] | None = None


def _row_sum(X):
    acc = X[:, 0].copy()
    for j in range(1, X.shape[1]):
        acc = acc + X[:, j]
    return acc


def _row_reduce(X, op):
    acc = X[:, 0].copy()
    for j in range(1, X.shape[1]):
        acc = op(acc, X[:, j])
    return acc


def _sumsq(X):
    return _row_sum(X * X)


def _geomean(X):
    acc = X[:, 0].copy()
    for j in range(1, X.shape[1]):
        acc = acc * X[:, j]
    return np.power(acc, 1.0 / X.shape[1])


def _step_pbm(X):
    x1, x2 = X[:, 0], X[:, 1]
    return np.select(
        [(x1 == 0) & (x2 == 0), (x1 == 1) & (x2 == 0), (x1 == 0) & (x2 == 1)],
        [0.0, 1.0, 3.0],
        2.0,
    )


def _step_bounded(X):
    return np.select([(X == 0).all(axis=1), (X == 1).all(axis=1)], [0.0, 2.0], 1.0)


def _vars(n):
    return [f"x{i}" for i in range(1, n + 1)]


def _maxmin_text(name, n):
    return "x1" if n == 1 else f"{name}({', '.join(_vars(n))})"


def _step_bounded_text(n):
    if n == 1:
        return "if(x1 = 0, 0, if(x1 = 1, 2, 1))"
    mx, mn = _maxmin_text("max", n), _maxmin_text("min", n)
    return f"if({mx} = 0, 0, if({mn} = 1, if({mx} = 1, 2, 1), 1))"


@dataclass(frozen=True)
class _Builtin:
    batch: Callable[[np.ndarray], np.ndarray]
    catalog: Callable[[int], str]
    facts: Callable[[int], Facts]
    fixed_arity: int | None = None


BUILTINS: dict[str, _Builtin] = {
    "mean": _Builtin(
        lambda X: _row_sum(X) / X.shape[1],
        lambda n: f"({' + '.join(_vars(n))}) / {n}",
        lambda n: Facts(True, True, 1.0),
    ),
    "sum": _Builtin(
        _row_sum,
        lambda n: " + ".join(_vars(n)),
        lambda n: Facts(True, True, 1.0),
    ),
    "max": _Builtin(
        lambda X: _row_reduce(X, np.maximum),
        lambda n: _maxmin_text("max", n),
        lambda n: Facts(True, True, 1.0),
    ),
    "min": _Builtin(
        lambda X: _row_reduce(X, np.minimum),
        lambda n: _maxmin_text("min", n),
        lambda n: Facts(n == 1, True, 1.0 if n == 1 else None),
    ),
    "sumsq": _Builtin(
        _sumsq,
        lambda n: " + ".join(f"{v}^2" for v in _vars(n)),
        lambda n: Facts(True, True, 2.0),
    ),
    "euclid": _Builtin(
        lambda X: np.sqrt(_sumsq(X)),
        lambda n: f"sqrt({' + '.join(f'{v}^2' for v in _vars(n))})",
        lambda n: Facts(True, True, 1.0),
    ),
    "geomean": _Builtin(
        _geomean,
        lambda n: f"({' * '.join(_vars(n))}) ^ (1 / {n})",
        lambda n: Facts(n == 1, True, 1.0 if n == 1 else None),
    ),
    "exp_sum": _Builtin(
        lambda X: np.exp(_row_sum(X)),
        lambda n: f"exp({' + '.join(_vars(n))})",
        lambda n: Facts(False, True, None),
    ),
    "step_pbm": _Builtin(
        _step_pbm,
        lambda n: "if(x1 = 0, if(x2 = 0, 0, if(x2 = 1, 3, 2)), if(x1 = 1, if(x2 = 0, 1, 2), 2))",
        lambda n: Facts(True, False, None, (1.0, 3.0)),
        fixed_arity=2,
    ),
    "step_bounded": _Builtin(
        _step_bounded,
        _step_bounded_text,
        lambda n: Facts(True, False, None, (1.0, 2.0)),
    ),
}


@dataclass(frozen=True)
class Combiner:
    """A function ``F: R_+^n -> R_+``, either a named built-in or an expression."""

    arity: int
    builtin: str | None = None
    expression: ex.Expression | None = None

    def __post_init__(self):
        if not isinstance(self.arity, (int, np.integer)) or self.arity < 1:
            raise InvalidCombiner(f"arity must be a positive integer, got {self.arity!r}")
        object.__setattr__(self, "arity", int(self.arity))
        if (self.builtin is None) == (self.expression is None):
            raise InvalidCombiner("give exactly one of builtin name or expression")
        if self.builtin is not None:
            entry = BUILTINS.get(self.builtin)
            if entry is None:
                raise InvalidCombiner(
                    f"unknown builtin {self.builtin!r}; choose from {', '.join(BUILTINS)}"
                )
            if entry.fixed_arity is not None and entry.fixed_arity != self.arity:
                raise InvalidCombiner(f"{self.builtin} is defined for arity {entry.fixed_arity} only")
        elif self.expression.arity != self.arity:
            raise InvalidCombiner(
                f"expression context has arity {self.expression.arity}, combiner arity {self.arity}"
            )

    @classmethod
    def named(cls, name: str, arity: int) -> "Combiner":
        return cls(arity, builtin=name)

    @classmethod
    def from_expression(cls, text: str, arity: int) -> "Combiner":
        return cls(arity, expression=ex.parse(text, ex.Context.combiner(arity)))

    @property
    def text(self) -> str:
        if self.builtin is not None:
            return f"builtin:{self.builtin}"
        return f"expr:{self.expression}"

    def __str__(self) -> str:
        return self.text

    @property
    def facts(self) -> Facts:
        """Closed-form properties; all unknown for expression combiners."""
        if self.builtin is None:
            return Facts()
        return BUILTINS[self.builtin].facts(self.arity)

    def catalog_expression(self) -> ex.Expression:
        """The expression-language twin of a built-in."""
        if self.builtin is None:
            return self.expression
        text = BUILTINS[self.builtin].catalog(self.arity)
        return ex.parse(text, ex.Context.combiner(self.arity))

    def batch(self, X) -> np.ndarray:
        """Evaluate on each row of a ``(count, arity)`` array of nonnegative reals."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.arity:
            raise ArityError(f"{self.text} expects {self.arity} arguments, got shape {X.shape}")
        if X.size and (not np.isfinite(X).all() or (X < 0).any()):
            raise InputError("combiner inputs must be finite and nonnegative")
        if self.builtin is not None:
            with np.errstate(all="ignore"):
                out = BUILTINS[self.builtin].batch(X)
            bad = ~np.isfinite(out)
            if bad.any():
                i = int(np.argmax(bad))
                raise EvaluationError(
                    f"{self.text} is not finite at {tuple(X[i].tolist())}: {float(out[i])!r}"
                )
        else:
            out = ex.evaluate_batch(self.expression, X)
        neg = out < 0
        if neg.any():
            i = int(np.argmax(neg))
            span = self.expression.root.span if self.expression is not None else None
            raise EvaluationError(f"{self.text} is negative at {tuple(X[i].tolist())}: {float(out[i])!r}", span)
        return out

    def __call__(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.arity:
            raise ArityError(f"{self.text} expects {self.arity} arguments, got {x.size}")
        return float(self.batch(x[None, :])[0])


def combiner_eval(F: Combiner, x: Sequence[float]) -> float:
    return F(x)


def parse_combiner(text: str, arity: int) -> Combiner:
    """Parse ``builtin:<name>`` or ``expr:<expression>``."""
    head, sep, body = text.partition(":")
    if not sep:
        raise InvalidCombiner(f"combiner must look like builtin:<name> or expr:<expr>, got {text!r}")
    head = head.strip()
    if head == "builtin":
        return Combiner.named(body.strip(), arity)
    if head == "expr":
        return Combiner.from_expression(body, arity)
    raise InvalidCombiner(f"unknown combiner kind {head!r}")
