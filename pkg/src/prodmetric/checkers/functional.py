"""Sampling checks of the functional properties of a combiner."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Combiner, leq
from .config import SearchConfig
from .sampling import (
    chunk_rng,
    chunk_sizes,
    draw_points,
    first_hit,
    lattice_points,
    map_chunks,
    probe_points,
)
from .verdicts import PairWitness, PointWitness, Verdict, jsonable


def _tuple(row) -> tuple[float, ...]:
    return tuple(float(v) for v in row)


def check_amenable(F: Combiner, cfg: SearchConfig | None = None) -> Verdict:
    """Look for ``F(x) = 0`` at some ``x != 0``; ``F(0) = 0`` is checked exactly."""
    cfg = SearchConfig() if cfg is None else cfg
    n = F.arity
    zero = (0.0,) * n
    f0 = F(zero)
    if f0 != 0:
        return Verdict.refuted(PointWitness(zero, f0), f"F(0) = {f0!r}, not 0", samples=0)

    probes = probe_points(n)
    values = F.batch(probes)
    hits = np.flatnonzero(values == 0)
    if hits.size:
        p = _tuple(probes[hits[0]])
        return Verdict.refuted(PointWitness(p, 0.0), f"F vanishes at the nonzero point {p}", samples=0)

    sizes = chunk_sizes(cfg.samples)

    def scan(k):
        rng = chunk_rng(cfg.seed, "amenable", 0, k)
        X = draw_points(rng, n, sizes[k], cfg.range_low, cfg.range_high)
        idx = np.flatnonzero(F.batch(X) == 0)
        for i in idx:
            point = _tuple(X[i])
            if F(point) == 0:
                return k * sizes[0] + int(i), point
        return None

    hit = first_hit(scan, len(sizes), cfg.threads)
    if hit is not None:
        index, point = hit
        return Verdict.refuted(
            PointWitness(point, 0.0), f"F vanishes at the nonzero point {point}", samples=index + 1
        )
    return Verdict.no_violation(
        f"F(0) = 0 and F > 0 on {len(probes)} probes and {cfg.samples} nonzero samples",
        samples=cfg.samples,
        probes=len(probes),
        seed=cfg.seed,
    )


def _monotone_probe_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    A = [np.full(n, float(k)) for k in range(4)]
    B = [np.full(n, float(k + 1)) for k in range(4)]
    if n <= 4:
        L = lattice_points(n)
        below = (L[:, None, :] <= L[None, :, :]).all(axis=2) & ~np.eye(len(L), dtype=bool)
        ia, ib = np.nonzero(below)
        A.extend(L[ia])
        B.extend(L[ib])
    return np.array(A), np.array(B)


def _first_monotone_violation(F, A, B):
    fa, fb = F.batch(A), F.batch(B)
    for i in np.flatnonzero(~leq(fa, fb)):
        a, b = _tuple(A[i]), _tuple(B[i])
        w = PairWitness(a, b, F(a), F(b))
        if w.replay(F):
            return int(i), w
    return None


def check_monotone(F: Combiner, cfg: SearchConfig | None = None) -> Verdict:
    """Look for ``a <= b`` coordinatewise with ``F(a) > F(b)``."""
    cfg = SearchConfig() if cfg is None else cfg
    n = F.arity
    A, B = _monotone_probe_pairs(n)
    hit = _first_monotone_violation(F, A, B)
    if hit is not None:
        w = hit[1]
        return Verdict.refuted(w, f"{w.a} <= {w.b} but F drops from {w.fa!r} to {w.fb!r}", samples=0)

    sizes = chunk_sizes(cfg.samples)

    def scan(k):
        rng = chunk_rng(cfg.seed, "monotone", 0, k)
        A = draw_points(rng, n, sizes[k], cfg.range_low, cfg.range_high)
        A = np.where(rng.random(A.shape) < cfg.zero_fraction, 0.0, A)
        delta = draw_points(rng, n, sizes[k], cfg.range_low, cfg.range_high)
        delta *= rng.random((sizes[k], 1)) ** 2
        found = _first_monotone_violation(F, A, A + delta)
        return None if found is None else (k * sizes[0] + found[0], found[1])

    hit = first_hit(scan, len(sizes), cfg.threads)
    if hit is not None:
        index, w = hit
        return Verdict.refuted(
            w, f"{w.a} <= {w.b} but F drops from {w.fa!r} to {w.fb!r}", samples=index + 1
        )
    return Verdict.no_violation(
        f"no decrease along {len(A)} probe pairs and {cfg.samples} sampled ordered pairs",
        samples=cfg.samples,
        probes=len(A),
        seed=cfg.seed,
    )


@dataclass(frozen=True)
class QSAEstimate:
    """Running sup of ``F(a + b) / (F(a) + F(b))``."""

    sup_ratio: float
    witness_pair: tuple[tuple[float, ...], tuple[float, ...]] | None
    diverging: bool
    samples: int

    def to_dict(self) -> dict:
        pair = None if self.witness_pair is None else [list(v) for v in self.witness_pair]
        return jsonable(
            {"sup_ratio": self.sup_ratio, "witness_pair": pair, "diverging": self.diverging, "samples": self.samples}
        )


def _qsa_ratio(F, A, B):
    denom = F.batch(A) + F.batch(B)
    top = F.batch(A + B)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, top / np.where(denom > 0, denom, 1.0), -np.inf)
    return ratio


def _best(values: np.ndarray):
    i = int(np.argmax(values))
    return float(values[i]), i


def estimate_quasi_subadditive(F: Combiner, cfg: SearchConfig | None = None) -> QSAEstimate:
    """Estimate the best constant ``s`` with ``F(a + b) <= s (F(a) + F(b))``.

    Probes with ``a = b`` come first, so a sup attained on the diagonal is
    found exactly. Magnitudes are then escalated through ``cfg.escalation``;
    the search stops early once the sup exceeds ``cfg.ceiling``.
    """
    cfg = SearchConfig() if cfg is None else cfg
    n = F.arity
    P = probe_points(n)
    ia, ib = np.meshgrid(np.arange(len(P)), np.arange(len(P)), indexing="ij")
    order = np.argsort(ia.ravel() != ib.ravel(), kind="stable")
    PA, PB = P[ia.ravel()[order]], P[ib.ravel()[order]]
    sup, i = _best(_qsa_ratio(F, PA, PB))
    pair = (_tuple(PA[i]), _tuple(PB[i])) if math.isfinite(sup) else None
    used = 0
    per_stage = max(1, math.ceil(cfg.samples / len(cfg.escalation)))
    sizes = chunk_sizes(per_stage)
    for stage, high in enumerate(cfg.escalation):
        if sup > cfg.ceiling:
            break

        def scan(k, stage=stage, high=high):
            rng = chunk_rng(cfg.seed, "quasi_subadditive", stage, k)
            A = draw_points(rng, n, sizes[k], cfg.range_low, high)
            B = draw_points(rng, n, sizes[k], cfg.range_low, high)
            value, j = _best(_qsa_ratio(F, A, B))
            return value, _tuple(A[j]), _tuple(B[j])

        for value, a, b in map_chunks(scan, len(sizes), cfg.threads):
            if value > sup:
                sup, pair = value, (a, b)
        used += per_stage
    return QSAEstimate(sup, pair, sup > cfg.ceiling, used)


@dataclass(frozen=True)
class BoundedRange:
    a_est: float
    c_est: float
    K_formula: float
    certifies_pbm: bool
    samples: int

    bounded = True

    def to_dict(self) -> dict:
        return jsonable(
            {
                "bounded": True,
                "a_est": self.a_est,
                "c_est": self.c_est,
                "K_formula": self.K_formula,
                "certifies_P_BM": self.certifies_pbm,
                "samples": self.samples,
            }
        )


@dataclass(frozen=True)
class NotBounded:
    reason: str
    a_est: float
    c_est: float
    samples: int

    bounded = False

    def to_dict(self) -> dict:
        return jsonable(
            {"bounded": False, "reason": self.reason, "a_est": self.a_est, "c_est": self.c_est, "samples": self.samples}
        )


def check_bounded_range(F: Combiner, cfg: SearchConfig | None = None) -> BoundedRange | NotBounded:
    """Estimate ``inf`` and ``sup`` of F over nonzero inputs.

    Stage ``k`` draws magnitudes from ``[1/h_k, h_k]`` for each ``h_k`` of
    the escalation schedule. The range counts as bounded when both ends stay
    inside ``[1/ceiling, ceiling]`` and neither moves by more than a factor
    1.5 over the second half of the schedule.
    """
    cfg = SearchConfig() if cfg is None else cfg
    n = F.arity
    P = lattice_points(n, with_zero=False)
    values = F.batch(P)
    lo, hi = float(values.min()), float(values.max())
    per_stage = max(1, math.ceil(cfg.samples / len(cfg.escalation)))
    sizes = chunk_sizes(per_stage)
    history = []
    used = 0
    for stage, high in enumerate(cfg.escalation):

        def scan(k, stage=stage, high=high):
            rng = chunk_rng(cfg.seed, "bounded_range", stage, k)
            v = F.batch(draw_points(rng, n, sizes[k], 1.0 / high, high))
            return float(v.min()), float(v.max())

        for vmin, vmax in map_chunks(scan, len(sizes), cfg.threads):
            lo, hi = min(lo, vmin), max(hi, vmax)
        used += per_stage
        history.append((lo, hi))
        if hi > cfg.ceiling or lo <= 0:
            break

    def unbounded(reason):
        return NotBounded(reason, lo, hi, used)

    if lo <= 0:
        return unbounded("F vanishes at a nonzero input")
    if hi > cfg.ceiling:
        return unbounded(f"sup exceeds {cfg.ceiling!r}")
    if lo < 1.0 / cfg.ceiling:
        return unbounded(f"inf falls below {1.0 / cfg.ceiling!r}")
    mid_lo, mid_hi = history[len(history) // 2 - 1] if len(history) > 1 else history[0]
    if hi > 1.5 * mid_hi or mid_lo > 1.5 * lo:
        return unbounded("range keeps widening under magnitude escalation")
    K = max(1.0, hi / (2.0 * lo))
    return BoundedRange(lo, hi, K, hi <= 2.0 * lo, used)
