"""Class-membership reports for a combiner.

A class ``P_XY`` holds the combiners that turn every product of X-spaces
into a Y-space, with X, Y among M (metric), S (strong b-metric, some
constant) and B (b-metric, some constant). Larger input families and
smaller target families give smaller classes, so verdicts propagate:
Proved upward, Refuted downward. ``P_B``, ``P_MB`` and ``P_SB`` coincide.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

from ..core import (
    M,
    Combiner,
    Kind,
    SemiTriangleCondition,
    conditions_text,
)
from ..errors import ArityError, LatticeInconsistency
from ..expr import format_number
from .config import SearchConfig
from .falsify import RequiredK, estimate_required_K, falsify
from .functional import (
    BoundedRange,
    check_amenable,
    check_bounded_range,
    check_monotone,
    estimate_quasi_subadditive,
)
from .verdicts import Verdict, jsonable

CLASS_NAMES = ("P_M", "P_B", "P_MB", "P_BM", "P_SB", "P_SM", "P_S", "P_BS")
SIGNATURES = {
    "P_M": ("M", "M"),
    "P_B": ("B", "B"),
    "P_MB": ("M", "B"),
    "P_BM": ("B", "M"),
    "P_SB": ("S", "B"),
    "P_SM": ("S", "M"),
    "P_S": ("S", "S"),
    "P_BS": ("B", "S"),
}
EQUIVALENT = ("P_B", "P_MB", "P_SB")
_RANK = {"M": 0, "S": 1, "B": 2}

CERT_QSA = "amenable, monotone and quasi-subadditive"
CERT_SUBADDITIVE = "amenable, monotone and subadditive"
CERT_RANGE = "bounded range [a, c] gives K = max{1, c/2a}"
CERT_HALF_RANGE = "range within [c, 2c]"


def included(smaller: str, larger: str) -> bool:
    """Is class ``smaller`` contained in class ``larger`` by the family order?"""
    (x1, y1), (x2, y2) = SIGNATURES[smaller], SIGNATURES[larger]
    return _RANK[x1] >= _RANK[x2] and _RANK[y1] <= _RANK[y2]


def qsa_scaling(s: float, N: int) -> float:
    """``sum_{i=1}^{N-1} s^i + s^{N-1}``, the factor in ``F(N a) <= factor * F(a)``."""
    return sum(s**i for i in range(1, N)) + s ** (N - 1)


def s_prime(s: float, K: float) -> float:
    """Target constant for B_K inputs under a quasi-subadditive constant ``s``."""
    return s * qsa_scaling(s, math.ceil(K))


@dataclass(frozen=True)
class ClassSpec:
    """A parametrized class ``P_{(G_1..G_n)-H}``."""

    source: tuple[SemiTriangleCondition, ...]
    target: SemiTriangleCondition

    @property
    def name(self) -> str:
        return f"P_({conditions_text(self.source)})-{self.target}"


def _family_conds(family: str, n: int, K: float) -> list[SemiTriangleCondition]:
    if family == "M":
        return [M] * n
    cond = SemiTriangleCondition(Kind(family), K)
    return [cond] * n


@dataclass(frozen=True)
class ClassificationReport:
    combiner: str
    arity: int
    seed: int
    samples: int
    verdicts: dict[str, Verdict]
    properties: dict[str, Any]
    constants: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        props = {k: (v.to_dict() if hasattr(v, "to_dict") else v) for k, v in self.properties.items()}
        return jsonable(
            {
                "combiner": self.combiner,
                "arity": self.arity,
                "seed": self.seed,
                "samples": self.samples,
                "classes": [{"class": name, **v.to_dict()} for name, v in self.verdicts.items()],
                "properties": props,
                "constants": self.constants,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"combiner {self.combiner}, arity {self.arity}, seed {self.seed}, samples {self.samples}"]
        width = max(len(name) for name in self.verdicts)
        for name, v in self.verdicts.items():
            lines.append(f"  {name:<{width}}  {v.status.value:<16}  {v.detail}")
            if v.witness is not None:
                lines.append(f"  {'':<{width}}  witness {json.dumps(jsonable(v.witness.to_dict()))}")
        for key, value in self.constants.items():
            lines.append(f"  {key} = {json.dumps(jsonable(value))}")
        return "\n".join(lines)


def check_lattice(verdicts: dict[str, Verdict]) -> None:
    """Raise :class:`LatticeInconsistency` if verdicts contradict the inclusions."""
    for a in CLASS_NAMES:
        for b in CLASS_NAMES:
            if a in verdicts and b in verdicts and included(a, b):
                if verdicts[a].proved_ and verdicts[b].refuted_:
                    raise LatticeInconsistency(f"{a} is Proved but its superclass {b} is Refuted")
    eq = [verdicts[c] for c in EQUIVALENT if c in verdicts]
    if any(v != eq[0] for v in eq):
        raise LatticeInconsistency("P_B, P_MB and P_SB verdicts differ")


class _Lattice:
    def __init__(self):
        self.v: dict[str, Verdict] = {}

    def assign(self, name: str, verdict: Verdict) -> bool:
        names = EQUIVALENT if name in EQUIVALENT else (name,)
        changed = False
        for n in names:
            old = self.v.get(n)
            if old is None:
                self.v[n] = verdict
                changed = True
            elif old.status is not verdict.status:
                raise LatticeInconsistency(f"{n} would be both {old.status.value} and {verdict.status.value}")
        return changed

    def propagate(self):
        changed = True
        while changed:
            changed = False
            for a in CLASS_NAMES:
                va = self.v.get(a)
                if va is None:
                    continue
                for b in CLASS_NAMES:
                    if a == b or b in self.v:
                        continue
                    if va.proved_ and included(a, b):
                        changed |= self.assign(
                            b,
                            Verdict.proved(
                                f"inclusion {a} ⊆ {b}", f"{a} ⊆ {b} and {a} is Proved ({va.certificate})"
                            ),
                        )
                    elif va.refuted_ and included(b, a):
                        changed |= self.assign(
                            b,
                            Verdict.refuted(va.witness, f"{b} ⊆ {a} and {a} is Refuted: {va.detail}"),
                        )


def _certificates(F: Combiner, K: float) -> tuple[dict[str, Verdict], dict[str, Any]]:
    facts = F.facts
    out: dict[str, Verdict] = {}
    consts: dict[str, Any] = {}
    if facts.amenable and facts.monotone and facts.qsa is not None:
        s = facts.qsa
        sp = s_prime(s, K)
        N = math.ceil(K)
        consts.update(s=s, s_prime=sp, N=N, M=2 * s * (sum(s**i for i in range(2, N + 1)) + s**N))
        out["P_B"] = Verdict.proved(
            CERT_QSA,
            f"amenable, monotone, F(a+b) <= s(F(a)+F(b)) with s = {format_number(s)}; "
            f"B_K inputs map to B_s' targets with s' = (s^(N+1)-s^2)/(s-1)+s^N, "
            f"s' = {sp!r} at K = {format_number(K)}",
        )
        if s == 1:
            out["P_M"] = Verdict.proved(
                CERT_SUBADDITIVE, "amenable, monotone and subadditive, so metric triplets map to metric triplets"
            )
    if facts.amenable and facts.value_range is not None:
        a, c = facts.value_range
        K_range = max(1.0, c / (2 * a))
        consts["K_range"] = K_range
        if "P_B" not in out:
            out["P_B"] = Verdict.proved(
                CERT_RANGE,
                f"F takes values in [{format_number(a)}, {format_number(c)}] off zero, "
                f"so every image is a B_K-triplet with K = {K_range!r}",
            )
        if c <= 2 * a:
            out["P_BM"] = Verdict.proved(
                CERT_HALF_RANGE,
                f"F takes values in [{format_number(a)}, {format_number(c)}] off zero with "
                f"{format_number(c)} <= 2*{format_number(a)}, so every image is a metric triplet",
            )
    return out, consts


def _parametrized(F, pclass: ClassSpec, amenable: Verdict, cfg: SearchConfig) -> Verdict:
    if amenable.refuted_:
        return Verdict.refuted(amenable.witness, f"F is not amenable: {amenable.detail}")
    facts = F.facts
    target = pclass.target
    if target.kind in (Kind.METRIC, Kind.BMETRIC):
        K_target = 1.0 if target.kind is Kind.METRIC else target.K
        linear = all(c.kind in (Kind.METRIC, Kind.BMETRIC) for c in pclass.source)
        if linear and facts.amenable and facts.monotone and facts.qsa is not None:
            K_in = max(1.0 if c.kind is Kind.METRIC else c.K for c in pclass.source)
            sp = s_prime(facts.qsa, K_in)
            if sp <= K_target:
                return Verdict.proved(CERT_QSA, f"s' = {sp!r} <= {format_number(K_target)}")
        if facts.amenable and facts.value_range is not None:
            a, c = facts.value_range
            if max(1.0, c / (2 * a)) <= K_target:
                return Verdict.proved(CERT_RANGE, f"K = max(1, c/2a) = {max(1.0, c / (2 * a))!r} <= {format_number(K_target)}")
    verdict = falsify(F, pclass.source, target, cfg)
    if target.kind is Kind.TRIANGLE and not verdict.refuted_:
        return Verdict.no_violation(
            "unknown: continuity of psi at 0 cannot be certified by sampling; " + verdict.detail,
            **verdict.stats,
        )
    return verdict


def classify(
    F: Combiner,
    n: int | None = None,
    cfg: SearchConfig | None = None,
    extra: Sequence[ClassSpec] = (),
) -> ClassificationReport:
    """Verdicts for every named class plus any parametrized ``extra`` classes.

    Closed-form certificates come first (from the built-in's known
    properties), then falsifiers for metric-target classes, then lattice
    propagation. Classes with B or S targets that stay open carry the
    estimated constant their images need.
    """
    cfg = SearchConfig() if cfg is None else cfg
    n = F.arity if n is None else n
    if n != F.arity:
        raise ArityError(f"{F.text} has arity {F.arity}, not {n}")
    K = cfg.reference_K
    amenable = check_amenable(F, cfg)
    properties: dict[str, Any] = {"amenable": amenable}
    constants: dict[str, Any] = {"reference_K": K}
    lattice = _Lattice()

    if amenable.refuted_:
        w = amenable.witness
        for name in CLASS_NAMES:
            lattice.assign(
                name,
                Verdict.refuted(w, f"F is not amenable ({amenable.detail}); distinct points can collapse"),
            )
        verdicts = {name: lattice.v[name] for name in CLASS_NAMES}
        for pclass in extra:
            verdicts[pclass.name] = _parametrized(F, pclass, amenable, cfg)
        check_lattice(verdicts)
        return ClassificationReport(F.text, n, cfg.seed, cfg.samples, verdicts, properties, constants)

    monotone = check_monotone(F, cfg)
    qsa = estimate_quasi_subadditive(F, cfg)
    bounded = check_bounded_range(F, cfg)
    properties.update(monotone=monotone, quasi_subadditive=qsa, bounded_range=bounded)

    certs, consts = _certificates(F, K)
    constants.update(consts)
    constants.update(s_estimate=qsa.sup_ratio, s_diverging=qsa.diverging)
    for name, verdict in certs.items():
        lattice.assign(name, verdict)
    lattice.propagate()

    for name in ("P_M", "P_BM", "P_SM"):
        if name in lattice.v:
            continue
        source = _family_conds(SIGNATURES[name][0], n, K)
        verdict = falsify(F, source, M, cfg)
        if verdict.refuted_:
            lattice.assign(name, verdict)
            lattice.propagate()

    required: dict[str, RequiredK] = {}
    for name in ("P_MB", "P_B", "P_SB", "P_S", "P_BS"):
        x, y = SIGNATURES[name]
        required[name] = estimate_required_K(F, _family_conds(x, n, K), y, cfg)
    constants["K_required"] = {name: r.to_dict() for name, r in required.items()}

    for name in CLASS_NAMES:
        if name in lattice.v:
            continue
        x, y = SIGNATURES[name]
        if y == "M":
            detail = (
                f"no image of {cfg.samples} sampled ({_family_text(x, n, K)})-triplets "
                f"fails the metric triangle inequality"
            )
            if name == "P_BM" and isinstance(bounded, BoundedRange) and not bounded.certifies_pbm:
                detail += (
                    f"; the [c, 2c] range certificate does not apply "
                    f"(estimated range [{bounded.a_est!r}, {bounded.c_est!r}])"
                )
            elif name == "P_BM" and F.facts.value_range is not None:
                a, c = F.facts.value_range
                detail += f"; the [c, 2c] range certificate does not apply (range [{format_number(a)}, {format_number(c)}])"
            lattice.assign(name, Verdict.no_violation(detail, samples=cfg.samples, seed=cfg.seed))
        else:
            r = required[name]
            note = (
                "diverging under magnitude escalation: evidence, not proof, of non-membership"
                if r.diverging
                else "bounded on the samples seen"
            )
            lattice.assign(
                name,
                Verdict.no_violation(
                    f"required {y}-constant from ({_family_text(x, n, K)})-triplets reaches {r.sup_K!r}; {note}",
                    samples=r.samples,
                    seed=cfg.seed,
                    sup_K=r.sup_K,
                    diverging=r.diverging,
                ),
            )
    verdicts = {name: lattice.v[name] for name in CLASS_NAMES}
    for pclass in extra:
        verdicts[pclass.name] = _parametrized(F, pclass, amenable, cfg)
    check_lattice(verdicts)
    return ClassificationReport(F.text, n, cfg.seed, cfg.samples, verdicts, properties, constants)


def _family_text(family: str, n: int, K: float) -> str:
    return conditions_text(_family_conds(family, n, K))
