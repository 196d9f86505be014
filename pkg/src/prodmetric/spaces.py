"""Finite semimetric spaces, their relaxation constants, and the constructions
used to realise triplets as actual spaces (three-point blocks, gluing, chains
and products).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import reduce
from itertools import product as cartesian
from pathlib import Path
from typing import Hashable, Sequence

import numpy as np

from .core import Combiner, Triplet1D, TripletND
from .errors import (
    ArityError,
    InputError,
    InvalidSpace,
    InvalidTriplet,
    LabelClash,
    NotAmenableOnThisInstance,
    TooLarge,
    TooSmall,
)

DEFAULT_PRODUCT_CAP = 10_000

# Work for one oracle block is bounded by this many triples.
_BLOCK_TRIPLES = 1 << 22


@dataclass(frozen=True)
class Violation:
    kind: str
    i: int
    j: int
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind} at ({self.i}, {self.j}){': ' + self.detail if self.detail else ''}"


class FiniteSemimetricSpace:
    """Labelled points with a square distance matrix.

    Construction only checks shapes and label uniqueness; the semimetric
    axioms are reported by :func:`validate`. The matrix is stored read-only.
    """

    __slots__ = ("labels", "dist", "_index")

    def __init__(self, labels: Sequence[Hashable], dist):
        labels = tuple(labels)
        dist = np.array(dist, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise InputError(f"distance matrix must be square, got shape {dist.shape}")
        if dist.shape[0] != len(labels):
            raise InputError(f"{len(labels)} labels for a {dist.shape[0]}x{dist.shape[0]} matrix")
        index = {label: k for k, label in enumerate(labels)}
        if len(index) != len(labels):
            raise InputError("point labels must be unique")
        dist.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "_index", index)

    def __setattr__(self, name, value):
        raise AttributeError("FiniteSemimetricSpace is immutable")

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteSemimetricSpace):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.dist, other.dist)

    def __hash__(self):
        return hash((self.labels, self.dist.tobytes()))

    def __repr__(self) -> str:
        return f"FiniteSemimetricSpace({len(self)} points, diameter {self.diameter!r})"

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if len(self) else 0.0

    def index(self, label: Hashable) -> int:
        return self._index[label]

    def d(self, x: Hashable, y: Hashable) -> float:
        return float(self.dist[self._index[x], self._index[y]])

    def restrict(self, labels: Sequence[Hashable]) -> "FiniteSemimetricSpace":
        idx = [self._index[label] for label in labels]
        return FiniteSemimetricSpace(labels, self.dist[np.ix_(idx, idx)])

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        return {"labels": [_label_to_json(v) for v in self.labels], "matrix": self.dist.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteSemimetricSpace":
        try:
            labels = data["labels"]
            matrix = data["matrix"]
        except (KeyError, TypeError):
            raise InputError("space file needs 'labels' and 'matrix' fields") from None
        if not isinstance(labels, list):
            raise InputError("field 'labels' must be a list")
        if not isinstance(matrix, list) or not all(isinstance(r, list) for r in matrix):
            raise InputError("field 'matrix' must be a list of rows")
        if any(len(r) != len(matrix) for r in matrix):
            raise InputError("field 'matrix' must be square")
        try:
            dist = np.array(matrix, dtype=float).reshape(len(matrix), len(matrix))
        except (TypeError, ValueError):
            raise InputError("field 'matrix' must contain numbers") from None
        return cls([_label_from_json(v) for v in labels], dist)

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "FiniteSemimetricSpace":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(data)


def _label_to_json(v):
    if isinstance(v, tuple):
        return [_label_to_json(x) for x in v]
    return v


def _label_from_json(v):
    if isinstance(v, list):
        return tuple(_label_from_json(x) for x in v)
    return v


def validate(space: FiniteSemimetricSpace) -> list[Violation]:
    """All violations of (S1)/(S2) and finiteness; empty means valid."""
    D = space.dist
    out = []
    m = len(space)
    for i in range(m):
        if D[i, i] != 0:
            out.append(Violation("nonzero diagonal", i, i, repr(float(D[i, i]))))
    for i in range(m):
        for j in range(i + 1, m):
            dij, dji = D[i, j], D[j, i]
            if not (math.isfinite(dij) and math.isfinite(dji)):
                out.append(Violation("non-finite distance", i, j))
            elif dij < 0 or dji < 0:
                out.append(Violation("negative distance", i, j))
            elif dij != dji:
                out.append(Violation("asymmetry", i, j, f"{float(dij)!r} != {float(dji)!r}"))
            elif dij == 0:
                out.append(Violation("zero off-diagonal", i, j))
    return out


def require_valid(space: FiniteSemimetricSpace) -> None:
    violations = validate(space)
    if violations:
        raise InvalidSpace(violations)


# ---------------------------------------------------------------------------
# Relaxation constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RelaxationProfile:
    """Minimal b-metric and strong b-metric constants of a finite space.

    ``k_b``/``k_s`` are clamped below at 1; ``max_ratio_b``/``max_ratio_s``
    are the unclamped maxima, attained at the worst triples ``(x, y, z)``
    (indices into the space). Triples and ratios are ``None`` when the space
    has fewer than three points.
    """

    k_b: float
    k_s: float
    worst_triple_b: tuple[int, int, int] | None
    worst_triple_s: tuple[int, int, int] | None
    max_ratio_b: float | None = None
    max_ratio_s: float | None = None

    def to_dict(self, space: FiniteSemimetricSpace | None = None) -> dict:
        def triple(t):
            if t is None:
                return None
            if space is None:
                return list(t)
            return [_label_to_json(space.labels[k]) for k in t]

        return {
            "k_b": self.k_b,
            "k_s": self.k_s,
            "worst_triple_b": triple(self.worst_triple_b),
            "worst_triple_s": triple(self.worst_triple_s),
            "max_ratio_b": self.max_ratio_b,
            "max_ratio_s": self.max_ratio_s,
        }


def _oracle_block(D: np.ndarray, x0: int, x1: int):
    m = D.shape[0]
    rows = D[x0:x1]  # d(x, .)
    xs = np.arange(x0, x1)[:, None, None]
    ys = np.arange(m)[None, :, None]
    zs = np.arange(m)[None, None, :]
    distinct = (xs != ys) & (ys != zs) & (xs != zs)
    with np.errstate(divide="ignore", invalid="ignore"):
        # b: d(x,z) / (d(x,y) + d(y,z))
        rb = rows[:, None, :] / (rows[:, :, None] + D[None, :, :])
        # s: (d(x,z) - d(y,z)) / d(x,y)
        rs = (rows[:, None, :] - D[None, :, :]) / rows[:, :, None]
    rb = np.where(distinct, rb, -np.inf)
    rs = np.where(distinct, rs, -np.inf)
    kb, ks = int(np.argmax(rb)), int(np.argmax(rs))
    shape = rb.shape
    tb = np.unravel_index(kb, shape)
    ts = np.unravel_index(ks, shape)
    return (
        float(rb.flat[kb]),
        (x0 + int(tb[0]), int(tb[1]), int(tb[2])),
        float(rs.flat[ks]),
        (x0 + int(ts[0]), int(ts[1]), int(ts[2])),
    )


def min_relaxation(space: FiniteSemimetricSpace, threads: int = 1) -> RelaxationProfile:
    """Exact minimal constants by enumerating every ordered triple of distinct points.

    Blocks of ``x`` rows may run on several threads; the reduction keeps the
    lexicographically smallest triple among ties, so the result does not
    depend on ``threads``.
    """
    require_valid(space)
    m = len(space)
    if m < 3:
        return RelaxationProfile(1.0, 1.0, None, None)
    D = space.dist
    step = max(1, _BLOCK_TRIPLES // (m * m))
    bounds = [(x0, min(m, x0 + step)) for x0 in range(0, m, step)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _oracle_block(D, *b), bounds))
    else:
        parts = [_oracle_block(D, *b) for b in bounds]
    # strict '>' keeps the earliest block on ties
    best_b = reduce(lambda u, v: v if v[0] > u[0] else u, [(p[0], p[1]) for p in parts])
    best_s = reduce(lambda u, v: v if v[0] > u[0] else u, [(p[2], p[3]) for p in parts])
    return RelaxationProfile(
        k_b=max(1.0, best_b[0]),
        k_s=max(1.0, best_s[0]),
        worst_triple_b=best_b[1],
        worst_triple_s=best_s[1],
        max_ratio_b=best_b[0],
        max_ratio_s=best_s[0],
    )


# ---------------------------------------------------------------------------
# Constructions
# ---------------------------------------------------------------------------

_ROLES = ("x", "y", "z")


def _zero_pattern(t: Triplet1D) -> str:
    """'all', 'none', or which pair collapses: 'xy' (a = 0), 'yz' (b = 0), 'xz' (c = 0)."""
    a, b, c = t.as_tuple()
    if a == b == c == 0:
        return "all"
    if a != 0 and b != 0 and c != 0:
        return "none"
    if a == 0 and b == c:
        return "xy"
    if b == 0 and a == c:
        return "yz"
    if c == 0 and a == b:
        return "xz"
    raise InvalidTriplet(f"{t.as_tuple()} is not a permutation of (0, l, l)")


def role_labels(t: Triplet1D, labels: Sequence[Hashable] = _ROLES) -> tuple:
    """The points playing roles x, y, z in :func:`space_from_triplet` (merged points repeat)."""
    x, y, z = labels
    return {
        "none": (x, y, z),
        "all": (x, x, x),
        "xy": (x, x, z),
        "yz": (x, y, y),
        "xz": (x, y, x),
    }[_zero_pattern(t)]


def space_from_triplet(t: Triplet1D, labels: Sequence[Hashable] = _ROLES) -> FiniteSemimetricSpace:
    """Three points with ``d(x,y) = a``, ``d(y,z) = b``, ``d(x,z) = c``.

    A zero entry identifies the corresponding pair, leaving two points (or
    one, for the all-zero triplet).
    """
    a, b, c = t.as_tuple()
    x, y, z = labels
    pattern = _zero_pattern(t)
    if pattern == "none":
        return FiniteSemimetricSpace([x, y, z], [[0, a, c], [a, 0, b], [c, b, 0]])
    if pattern == "all":
        return FiniteSemimetricSpace([x], [[0.0]])
    keep = sorted(set(role_labels(t, labels)), key=list(labels).index)
    l = max(a, b, c)
    return FiniteSemimetricSpace(keep, [[0, l], [l, 0]])


def glue_pair(s1: FiniteSemimetricSpace, s2: FiniteSemimetricSpace) -> FiniteSemimetricSpace:
    """Disjoint union with every cross distance equal to ``max(diam s1, diam s2)``."""
    clash = set(s1.labels) & set(s2.labels)
    if clash:
        raise LabelClash(f"spaces share labels: {sorted(map(repr, clash))}")
    if len(s1) + len(s2) < 3:
        raise TooSmall("gluing needs at least three points in total")
    require_valid(s1)
    require_valid(s2)
    r = max(s1.diameter, s2.diameter)
    m1, m2 = len(s1), len(s2)
    D = np.full((m1 + m2, m1 + m2), r)
    D[:m1, :m1] = s1.dist
    D[m1:, m1:] = s2.dist
    return FiniteSemimetricSpace(s1.labels + s2.labels, D)


def glue_chain(blocks: Sequence[Triplet1D]) -> FiniteSemimetricSpace:
    """Realise each block as a three-point space labelled ``(k, 1..3)`` and glue left to right."""
    if not blocks:
        raise TooSmall("glue_chain needs at least one block")
    spaces = [
        space_from_triplet(t, labels=((k, 1), (k, 2), (k, 3))) for k, t in enumerate(blocks, start=1)
    ]
    return reduce(glue_pair, spaces)


def product_space(
    spaces: Sequence[FiniteSemimetricSpace],
    F: Combiner,
    cap: int = DEFAULT_PRODUCT_CAP,
) -> FiniteSemimetricSpace:
    """Cartesian product with ``D(x, y) = F(d_1(x_1, y_1), ..., d_n(x_n, y_n))``.

    Raises :class:`NotAmenableOnThisInstance` if the result breaks (S1).
    """
    if F.arity != len(spaces):
        raise ArityError(f"{F.text} has arity {F.arity} but {len(spaces)} spaces were given")
    for s in spaces:
        require_valid(s)
    sizes = [len(s) for s in spaces]
    total = math.prod(sizes)
    if total > cap:
        raise TooLarge(f"product has {total} points, cap is {cap}")
    grid = np.array(list(cartesian(*[range(k) for k in sizes])), dtype=int).reshape(total, len(spaces))
    labels = [tuple(spaces[i].labels[k] for i, k in enumerate(row)) for row in grid]
    D = np.empty((total, total))
    step = max(1, (1 << 20) // max(1, total))
    for r0 in range(0, total, step):
        r1 = min(total, r0 + step)
        cols = [
            s.dist[grid[r0:r1, i][:, None], grid[None, :, i]].reshape(-1)
            for i, s in enumerate(spaces)
        ]
        D[r0:r1] = F.batch(np.column_stack(cols)).reshape(r1 - r0, total)
    diag = np.diag(D)
    if (diag != 0).any():
        k = int(np.argmax(diag != 0))
        raise NotAmenableOnThisInstance((labels[k], labels[k]), float(diag[k]))
    off = D == 0
    np.fill_diagonal(off, False)
    if off.any():
        i, j = divmod(int(np.argmax(off)), total)
        raise NotAmenableOnThisInstance((labels[i], labels[j]), 0.0)
    return FiniteSemimetricSpace(labels, D)


# ---------------------------------------------------------------------------
# Realising falsifier witnesses as spaces
# ---------------------------------------------------------------------------


def realize_triplet(F: Combiner, t: TripletND, cap: int = DEFAULT_PRODUCT_CAP):
    """Product of the per-coordinate triplet spaces under ``F``.

    Returns the product space and the labels of its points ``x, y, z`` with
    ``D(x,y) = F(a)``, ``D(y,z) = F(b)``, ``D(x,z) = F(c)``.
    """
    coords = [t.coordinate(i) for i in range(t.n)]
    spaces = [space_from_triplet(c) for c in coords]
    roles = [role_labels(c) for c in coords]
    space = product_space(spaces, F, cap=cap)
    x, y, z = (tuple(r[k] for r in roles) for k in range(3))
    return space, (x, y, z)


def realize_zero(F: Combiner, point: Sequence[float], cap: int = DEFAULT_PRODUCT_CAP):
    """Product of the spaces ``{0, a_i}`` on the real line; breaks (S1) when ``F(a) = 0``."""
    spaces = []
    for v in point:
        v = float(v)
        if v == 0:
            spaces.append(FiniteSemimetricSpace([0.0], [[0.0]]))
        else:
            spaces.append(FiniteSemimetricSpace([0.0, v], [[0.0, v], [v, 0.0]]))
    return product_space(spaces, F, cap=cap)
