"""Triplet-image falsification, required-constant estimates and condition implication."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import (
    Combiner,
    Kind,
    SemiTriangleCondition,
    TripletND,
    conditions_text,
    leq,
    triplet_mask,
)
from ..errors import ArityError, InputError
from ..expr import format_number
from .config import SearchConfig
from .sampling import (
    chunk_rng,
    chunk_sizes,
    draw_triplets,
    first_hit,
    log_uniform,
    map_chunks,
    probe_triplets,
)
from .verdicts import GeneratorWitness, TripletWitness, Verdict, jsonable


def _check_arity(F: Combiner, conds: Sequence[SemiTriangleCondition]):
    if F.arity != len(conds):
        raise ArityError(f"{F.text} has arity {F.arity} but {len(conds)} source conditions were given")


def _images(F, A, B, C):
    return F.batch(A), F.batch(B), F.batch(C)


def _confirm(F, source, target, a, b, c) -> TripletWitness | None:
    """Rebuild a candidate through the scalar path; ``None`` if it does not hold up."""
    t = TripletND(a, b, c)
    image = tuple(F(v) for v in t)
    w = TripletWitness(t, tuple(source), target, image)
    return w if w.replay(F) else None


def _first_violation(F, source, target, A, B, C):
    FA, FB, FC = _images(F, A, B, C)
    bad = ~triplet_mask(target, FA, FB, FC)
    for i in np.flatnonzero(bad):
        w = _confirm(F, source, target, A[i], B[i], C[i])
        if w is not None:
            return int(i), w
    return None


def _describe_violation(w: TripletWitness) -> str:
    t = w.triplet
    return (
        f"{conditions_text(w.source)}-triplet ({t.a}, {t.b}, {t.c}) maps to "
        f"{w.image}, which fails the {w.target} triangle condition"
    )


def falsify(
    F: Combiner,
    source_conds: Sequence[SemiTriangleCondition],
    target_cond: SemiTriangleCondition,
    cfg: SearchConfig | None = None,
) -> Verdict:
    """Search for a source triplet whose image under F is not a target triplet.

    Deterministic probes (boundary triplets ``(p..p), (q..q), g(a, b)``) are
    tried first, then ``cfg.samples`` random triplets in chunk order. The
    first violation by sample index is re-validated exactly and returned.
    """
    cfg = SearchConfig() if cfg is None else cfg
    source = tuple(source_conds)
    _check_arity(F, source)
    A, B, C = probe_triplets(source)
    hit = _first_violation(F, source, target_cond, A, B, C)
    if hit is not None:
        return Verdict.refuted(hit[1], _describe_violation(hit[1]), samples=0, probes=hit[0] + 1)

    sizes = chunk_sizes(cfg.samples)

    def scan(k):
        rng = chunk_rng(cfg.seed, "falsify", 0, k)
        found = _first_violation(F, source, target_cond, *draw_triplets(source, cfg, rng, sizes[k]))
        return None if found is None else (k * sizes[0] + found[0], found[1])

    hit = first_hit(scan, len(sizes), cfg.threads)
    if hit is not None:
        index, w = hit
        return Verdict.refuted(w, _describe_violation(w), samples=index + 1, probes=len(A))
    return Verdict.no_violation(
        f"every image of {len(A)} probes and {cfg.samples} sampled "
        f"{conditions_text(source)}-triplets is a {target_cond}-triplet",
        samples=cfg.samples,
        probes=len(A),
        seed=cfg.seed,
    )


# ---------------------------------------------------------------------------
# Required constants
# ---------------------------------------------------------------------------


def _zero_pattern_k(FA, FB, FC):
    """1 where a zero-containing image is a permutation of (0, l, l), inf otherwise."""
    ok = ((FA == 0) & (FB == FC)) | ((FB == 0) & (FA == FC)) | ((FC == 0) & (FA == FB))
    return np.where(ok, 1.0, np.inf)


def required_k(family: Kind, FA, FB, FC) -> np.ndarray:
    """Smallest ``K >= 1`` making each image a B_K- (or symmetrized S_K-) triplet."""
    FA, FB, FC = (np.asarray(v, dtype=float) for v in (FA, FB, FC))
    zero = (FA == 0) | (FB == 0) | (FC == 0)
    safe = [np.where(zero, 1.0, v) for v in (FA, FB, FC)]
    x, y, z = safe
    with np.errstate(over="ignore"):
        if family is Kind.BMETRIC:
            k = np.maximum.reduce([x / (y + z), y / (z + x), z / (x + y)])
        else:
            k = np.maximum.reduce(
                [(x - z) / y, (x - y) / z, (y - z) / x, (y - x) / z, (z - y) / x, (z - x) / y]
            )
    k = np.maximum(k, 1.0)
    return np.where(zero, _zero_pattern_k(FA, FB, FC), k)


@dataclass(frozen=True)
class RequiredK:
    """Sup over sampled triplets of the constant the image needs."""

    family: Kind
    sup_K: float
    diverging: bool
    witness: tuple[TripletND, tuple[float, float, float]] | None
    samples: int

    def to_dict(self) -> dict:
        w = None
        if self.witness is not None:
            t, image = self.witness
            w = {"a": list(t.a), "b": list(t.b), "c": list(t.c), "image": list(image)}
        return jsonable(
            {
                "family": self.family.value,
                "sup_K": self.sup_K,
                "diverging": self.diverging,
                "witness": w,
                "samples": self.samples,
            }
        )


def _family(target_family) -> Kind:
    if isinstance(target_family, str):
        target_family = target_family.strip().upper()
    family = Kind(target_family)
    if family not in (Kind.BMETRIC, Kind.STRONGB):
        raise InputError(f"target family must be B or S, got {family.value}")
    return family


def estimate_required_K(
    F: Combiner,
    source_conds: Sequence[SemiTriangleCondition],
    target_family,
    cfg: SearchConfig | None = None,
) -> RequiredK:
    """Sup of the constant needed to keep images of source triplets in the target family.

    Magnitudes escalate through ``cfg.escalation`` with ``cfg.samples`` split
    evenly across stages; a sup above ``cfg.ceiling`` flags divergence and
    ends the search.
    """
    cfg = SearchConfig() if cfg is None else cfg
    source = tuple(source_conds)
    _check_arity(F, source)
    family = _family(target_family)

    def best(A, B, C):
        FA, FB, FC = _images(F, A, B, C)
        k = required_k(family, FA, FB, FC)
        i = int(np.argmax(k))
        return float(k[i]), (TripletND(A[i], B[i], C[i]), (float(FA[i]), float(FB[i]), float(FC[i])))

    sup, witness = best(*probe_triplets(source))
    per_stage = max(1, math.ceil(cfg.samples / len(cfg.escalation)))
    sizes = chunk_sizes(per_stage)
    used = 0
    stream = f"required_K:{family.value}"
    for stage, high in enumerate(cfg.escalation):
        if sup > cfg.ceiling:
            break

        def scan(k, stage=stage, high=high):
            rng = chunk_rng(cfg.seed, stream, stage, k)
            return best(*draw_triplets(source, cfg, rng, sizes[k], high))

        for value, w in map_chunks(scan, len(sizes), cfg.threads):
            if value > sup:
                sup, witness = value, w
        used += per_stage
    return RequiredK(family, sup, sup > cfg.ceiling, witness, used)


# ---------------------------------------------------------------------------
# Condition implication
# ---------------------------------------------------------------------------

_BUILTIN = (Kind.METRIC, Kind.ULTRAMETRIC, Kind.BMETRIC, Kind.STRONGB)


def _analytic_order(g: SemiTriangleCondition, h: SemiTriangleCondition):
    """``(True, reason)``, ``(False, (a, b))`` or ``None`` when no closed form applies."""
    if g.kind not in _BUILTIN or h.kind not in _BUILTIN:
        return None
    # Write every built-in except U as p*a + q*b.
    def coeffs(c):
        if c.kind is Kind.METRIC:
            return 1.0, 1.0
        if c.kind is Kind.BMETRIC:
            return c.K, c.K
        return c.K, 1.0

    if g.kind is Kind.ULTRAMETRIC:
        return True, f"max(a, b) <= h(a, b) because {h} is nonreducing"
    if h.kind is Kind.ULTRAMETRIC:
        return False, (1.0, 1.0)
    (p, q), (r, s) = coeffs(g), coeffs(h)
    if p <= r and q <= s:
        return True, f"{g} = {_linear(p, q)} <= {_linear(r, s)} = {h} coefficientwise on a, b >= 0"
    if p > r and q > s:
        return False, (1.0, 1.0)
    return False, (1.0, 0.0) if p > r else (0.0, 1.0)


def _linear(p, q):
    pa = "a" if p == 1 else f"{format_number(p)}a"
    qb = "b" if q == 1 else f"{format_number(q)}b"
    return f"{pa} + {qb}"


def _generator_probes():
    pts = [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (1.0, 2.0), (2.0, 1.0), (1.0, 10.0), (10.0, 1.0), (0.0, 0.0)]
    return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])


def condition_implies(
    g: SemiTriangleCondition, h: SemiTriangleCondition, cfg: SearchConfig | None = None
) -> Verdict:
    """Does ``g <= h`` pointwise (so every G-space is an H-space)?

    Pairs of built-in generators are decided in closed form. Otherwise
    ``(a, b)`` is sampled and any ``g(a, b) > h(a, b)`` refutes.
    """
    cfg = SearchConfig() if cfg is None else cfg
    def describe(w):
        return f"{g}({w.a!r}, {w.b!r}) = {w.g_value!r} > {w.h_value!r} = {h}({w.a!r}, {w.b!r})"

    if g == h:
        return Verdict.proved("identical generators", f"{g} and {h} are the same generator", samples=0)
    analytic = _analytic_order(g, h)
    if analytic is not None:
        holds, info = analytic
        if holds:
            return Verdict.proved("pointwise generator order", info, samples=0)
        a, b = info
        w = GeneratorWitness(a, b, g.g(a, b), h.g(a, b))
        if w.replay(g, h):
            return Verdict.refuted(w, describe(w), samples=0)

    def first(a, b):
        gv, hv = g.g_batch(a, b), h.g_batch(a, b)
        for i in np.flatnonzero(~leq(gv, hv)):
            w = GeneratorWitness(float(a[i]), float(b[i]), float(gv[i]), float(hv[i]))
            if w.replay(g, h):
                return int(i), w
        return None

    hit = first(*_generator_probes())
    if hit is not None:
        return Verdict.refuted(hit[1], describe(hit[1]), samples=0)
    sizes = chunk_sizes(cfg.samples)

    def scan(k):
        rng = chunk_rng(cfg.seed, "implies", 0, k)
        a = log_uniform(rng, cfg.range_low, cfg.range_high, sizes[k])
        b = log_uniform(rng, cfg.range_low, cfg.range_high, sizes[k])
        u = rng.random(sizes[k])
        a = np.where(u < cfg.zero_fraction / 2, 0.0, a)
        b = np.where((u >= cfg.zero_fraction / 2) & (u < cfg.zero_fraction), 0.0, b)
        found = first(a, b)
        return None if found is None else (k * sizes[0] + found[0], found[1])

    hit = first_hit(scan, len(sizes), cfg.threads)
    if hit is not None:
        return Verdict.refuted(hit[1], describe(hit[1]), samples=hit[0] + 1)
    return Verdict.no_violation(
        f"{g}(a, b) <= {h}(a, b) on {cfg.samples} sampled pairs",
        samples=cfg.samples,
        seed=cfg.seed,
    )
