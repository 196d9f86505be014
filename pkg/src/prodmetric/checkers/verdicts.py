"""Three-valued verdicts and replayable witnesses."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Union

from ..core import (
    Combiner,
    SemiTriangleCondition,
    Triplet1D,
    TripletND,
    conditions_text,
    is_triplet_1d,
    is_triplet_nd,
    leq,
)


class Status(str, enum.Enum):
    PROVED = "Proved"
    REFUTED = "Refuted"
    NO_VIOLATION_FOUND = "NoViolationFound"


def jsonable(x: Any) -> Any:
    """Floats stay full precision; non-finite ones become strings."""
    if isinstance(x, float):
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, Mapping):
        return {str(k): jsonable(v) for k, v in x.items()}
    return x


@dataclass(frozen=True)
class PointWitness:
    """``F(point) = 0`` at a nonzero point, or ``F(0) != 0``."""

    point: tuple[float, ...]
    value: float

    def replay(self, F: Combiner) -> bool:
        value = F(self.point)
        return (value == 0) != all(x == 0 for x in self.point)

    def to_dict(self) -> dict:
        return {"kind": "point", "point": list(self.point), "value": self.value}


@dataclass(frozen=True)
class PairWitness:
    """``a <= b`` coordinatewise but ``F(a) > F(b)``."""

    a: tuple[float, ...]
    b: tuple[float, ...]
    fa: float
    fb: float

    def replay(self, F: Combiner) -> bool:
        ordered = all(x <= y for x, y in zip(self.a, self.b))
        return ordered and not bool(leq(F(self.a), F(self.b)))

    def to_dict(self) -> dict:
        return {"kind": "pair", "a": list(self.a), "b": list(self.b), "F(a)": self.fa, "F(b)": self.fb}


@dataclass(frozen=True)
class TripletWitness:
    """A source triplet whose image under F is not a target triplet."""

    triplet: TripletND
    source: tuple[SemiTriangleCondition, ...]
    target: SemiTriangleCondition
    image: tuple[float, float, float]

    def replay(self, F: Combiner) -> bool:
        if not is_triplet_nd(self.source, self.triplet):
            return False
        image = Triplet1D(*(F(v) for v in self.triplet))
        return not is_triplet_1d(self.target, image)

    def to_dict(self) -> dict:
        return {
            "kind": "triplet",
            "a": list(self.triplet.a),
            "b": list(self.triplet.b),
            "c": list(self.triplet.c),
            "source": conditions_text(self.source),
            "target": str(self.target),
            "image": list(self.image),
        }


@dataclass(frozen=True)
class GeneratorWitness:
    """A point with ``g(a, b) > h(a, b)``."""

    a: float
    b: float
    g_value: float
    h_value: float

    def replay(self, g: SemiTriangleCondition, h: SemiTriangleCondition) -> bool:
        return not bool(leq(g.g(self.a, self.b), h.g(self.a, self.b)))

    def to_dict(self) -> dict:
        return {"kind": "generator", "a": self.a, "b": self.b, "g": self.g_value, "h": self.h_value}


Witness = Union[PointWitness, PairWitness, TripletWitness, GeneratorWitness]


@dataclass(frozen=True)
class Verdict:
    status: Status
    detail: str
    certificate: str | None = None
    witness: Witness | None = None
    stats: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        status = Status(self.status)
        object.__setattr__(self, "status", status)
        if status is Status.PROVED and not self.certificate:
            raise ValueError("a Proved verdict needs a certificate")
        if status is Status.REFUTED and self.witness is None:
            raise ValueError("a Refuted verdict needs a witness")
        object.__setattr__(self, "stats", dict(self.stats))

    @classmethod
    def proved(cls, certificate: str, detail: str, **stats) -> "Verdict":
        return cls(Status.PROVED, detail, certificate=certificate, stats=stats)

    @classmethod
    def refuted(cls, witness: Witness, detail: str, **stats) -> "Verdict":
        return cls(Status.REFUTED, detail, witness=witness, stats=stats)

    @classmethod
    def no_violation(cls, detail: str, **stats) -> "Verdict":
        return cls(Status.NO_VIOLATION_FOUND, detail, stats=stats)

    @property
    def proved_(self) -> bool:
        return self.status is Status.PROVED

    @property
    def refuted_(self) -> bool:
        return self.status is Status.REFUTED

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"status": self.status.value, "detail": self.detail}
        if self.certificate is not None:
            out["certificate"] = self.certificate
        if self.witness is not None:
            out["witness"] = self.witness.to_dict()
        if self.stats:
            out["stats"] = dict(self.stats)
        return jsonable(out)
