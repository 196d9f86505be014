"""TOPSIS ranking with distances built from a combiner.

Each criterion contributes the absolute difference of weighted-normalized
values, and the combiner F turns the per-criterion differences into the
distance to the positive and negative ideal solutions.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Combiner
from .errors import ArityError, DegenerateCriterion, InputError

BENEFIT = "benefit"
COST = "cost"


@dataclass(frozen=True)
class DecisionProblem:
    alternatives: tuple[str, ...]
    criteria: tuple[str, ...]
    matrix: np.ndarray
    weights: np.ndarray
    directions: tuple[str, ...]

    def __post_init__(self):
        alts = tuple(str(a) for a in self.alternatives)
        crit = tuple(str(c) for c in self.criteria)
        object.__setattr__(self, "alternatives", alts)
        object.__setattr__(self, "criteria", crit)
        try:
            X = np.array(self.matrix, dtype=float)
            w = np.array(self.weights, dtype=float)
        except (TypeError, ValueError) as exc:
            raise InputError(f"matrix and weights must be numeric: {exc}") from None
        m, n = len(alts), len(crit)
        if m < 1 or n < 1:
            raise InputError("need at least one alternative and one criterion")
        if X.shape != (m, n):
            raise InputError(f"matrix: expected shape ({m}, {n}), got {X.shape}")
        if not np.isfinite(X).all() or (X < 0).any():
            raise InputError("matrix: entries must be finite and nonnegative")
        if w.shape != (n,):
            raise InputError(f"weights: expected {n} values, got {w.size}")
        if not np.isfinite(w).all() or (w <= 0).any():
            raise InputError("weights: must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InputError(f"weights: must sum to 1, got {float(w.sum())!r}")
        dirs = tuple(str(d) for d in self.directions)
        if len(dirs) != n or any(d not in (BENEFIT, COST) for d in dirs):
            raise InputError(f"directions: expected {n} entries, each 'benefit' or 'cost'")
        X.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "matrix", X)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "directions", dirs)

    def to_dict(self) -> dict:
        return {
            "alternatives": list(self.alternatives),
            "criteria": list(self.criteria),
            "matrix": self.matrix.tolist(),
            "weights": self.weights.tolist(),
            "directions": list(self.directions),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionProblem":
        if not isinstance(data, dict):
            raise InputError("problem must be a JSON object")
        missing = [k for k in ("alternatives", "criteria", "matrix", "weights", "directions") if k not in data]
        if missing:
            raise InputError(f"problem is missing field(s): {', '.join(missing)}")
        return cls(data["alternatives"], data["criteria"], data["matrix"], data["weights"], data["directions"])

    @classmethod
    def load(cls, path) -> "DecisionProblem":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class TopsisResult:
    normalized: np.ndarray
    pis: np.ndarray
    nis: np.ndarray
    d_plus: np.ndarray
    d_minus: np.ndarray
    closeness: np.ndarray
    ranking: tuple[int, ...]
    ties: tuple[int, ...]
    alternatives: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "normalized": self.normalized.tolist(),
            "pis": self.pis.tolist(),
            "nis": self.nis.tolist(),
            "d_plus": self.d_plus.tolist(),
            "d_minus": self.d_minus.tolist(),
            "closeness": self.closeness.tolist(),
            "ranking": [self.alternatives[i] for i in self.ranking] if self.alternatives else list(self.ranking),
            "flagged_ties": [self.alternatives[i] for i in self.ties] if self.alternatives else list(self.ties),
        }


def normalize(p: DecisionProblem) -> np.ndarray:
    """Vector normalization ``w_j x_ij / sqrt(sum_i x_ij^2)``."""
    X = p.matrix
    norms = np.sqrt((X * X).sum(axis=0))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateCriterion(f"criterion {p.criteria[zero[0]]!r} is zero for every alternative")
    return p.weights * (X / norms)


def ideals(normalized, directions: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Positive and negative ideal solutions, column by column."""
    V = np.atleast_2d(np.asarray(normalized, dtype=float))
    hi, lo = V.max(axis=0), V.min(axis=0)
    cost = np.array([d == COST for d in directions], dtype=bool)
    return np.where(cost, lo, hi), np.where(cost, hi, lo)


@lru_cache(maxsize=64)
def _amenability(F: Combiner):
    from .checkers import check_amenable

    return check_amenable(F)


def closeness(d_plus, d_minus) -> np.ndarray:
    """``d_minus / (d_plus + d_minus)``, 0.5 where both vanish.

    Evaluated as ``1 / (1 + d_plus / d_minus)`` so the rounded result is
    monotone in each distance.
    """
    d_plus = np.asarray(d_plus, dtype=float)
    d_minus = np.asarray(d_minus, dtype=float)
    out = np.empty_like(d_plus)
    pos = d_minus > 0
    out[pos] = 1.0 / (1.0 + d_plus[pos] / d_minus[pos])
    out[~pos] = np.where(d_plus[~pos] > 0, 0.0, 0.5)
    return out


def rank(p: DecisionProblem, F: Combiner, check: bool = True) -> TopsisResult:
    """Rank the alternatives by relative closeness to the positive ideal.

    With ``check`` set, a :class:`UserWarning` is emitted if F is found not to
    be amenable; the ranking is still computed.
    """
    n = len(p.criteria)
    if F.arity != n:
        raise ArityError(f"{F.text} has arity {F.arity} but the problem has {n} criteria")
    if check:
        verdict = _amenability(F)
        if verdict.refuted_:
            warnings.warn(f"{F.text} is not amenable: {verdict.detail}", UserWarning, stacklevel=2)
    V = normalize(p)
    pis, nis = ideals(V, p.directions)
    d_plus = F.batch(np.abs(V - pis))
    d_minus = F.batch(np.abs(V - nis))
    c = closeness(d_plus, d_minus)
    order = tuple(int(i) for i in np.argsort(-c, kind="stable"))
    ties = tuple(int(i) for i in np.flatnonzero((d_plus == 0) & (d_minus == 0)))
    return TopsisResult(V, pis, nis, d_plus, d_minus, c, order, ties, p.alternatives)
