"""Seeded chunked sampling of vectors and triangle triplets.

Every chunk draws from its own generator derived from ``(seed, stream,
stage, chunk)``, so results depend only on the configuration and never on
how many worker threads evaluate the chunks.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, Sequence, TypeVar

import numpy as np

from ..core import (
    Kind,
    Mode,
    SemiTriangleCondition,
    TripletND,
    leq,
    triplet_nd_mask,
)
from ..errors import InputError, SamplerUnsupported
from .config import SearchConfig

CHUNK = 4096
BISECTION_TOL = 1e-12
_MAX_BISECTION_STEPS = 2000

T = TypeVar("T")


def chunk_rng(seed: int, stream: str, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(zlib.crc32(stream.encode()), *keys))
    return np.random.default_rng(ss)


def chunk_sizes(total: int) -> list[int]:
    full, rest = divmod(total, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def map_chunks(fn: Callable[[int], T], count: int, threads: int) -> list[T]:
    """``[fn(0), ..., fn(count - 1)]``, possibly evaluated concurrently."""
    if threads <= 1 or count <= 1:
        return [fn(k) for k in range(count)]
    with ThreadPoolExecutor(min(threads, count)) as pool:
        return list(pool.map(fn, range(count)))


def first_hit(fn: Callable[[int], T | None], count: int, threads: int) -> T | None:
    """First non-``None`` of ``fn(k)`` in chunk order.

    Chunks are evaluated in waves of ``threads``; a hit in chunk ``k`` is
    only returned once every chunk before ``k`` has been looked at.
    """
    if threads <= 1:
        for k in range(count):
            hit = fn(k)
            if hit is not None:
                return hit
        return None
    with ThreadPoolExecutor(threads) as pool:
        for start in range(0, count, threads):
            for hit in pool.map(fn, range(start, min(count, start + threads))):
                if hit is not None:
                    return hit
    return None


def log_uniform(rng: np.random.Generator, lo: float, hi: float, shape) -> np.ndarray:
    return np.exp(rng.uniform(math.log(lo), math.log(hi), shape))


# ---------------------------------------------------------------------------
# Vectors in R_+^n
# ---------------------------------------------------------------------------


def draw_points(rng: np.random.Generator, n: int, size: int, lo: float, hi: float) -> np.ndarray:
    """Nonzero vectors with a uniformly random number of nonzero coordinates."""
    values = log_uniform(rng, lo, hi, (size, n))
    nnz = rng.integers(1, n + 1, size)
    ranks = np.argsort(np.argsort(rng.random((size, n)), axis=1), axis=1)
    return np.where(ranks < nnz[:, None], values, 0.0)


def probe_points(n: int) -> np.ndarray:
    """Deterministic nonzero probes: axis points, diagonal points, then a small lattice."""
    rows = []
    for v in (1.0, 2.0):
        for i in range(n):
            e = np.zeros(n)
            e[i] = v
            rows.append(e)
    for v in (1.0, 2.0, 3.0):
        rows.append(np.full(n, v))
    if 3**n <= 243:
        grid = np.stack(np.meshgrid(*[np.arange(3.0)] * n, indexing="ij"), axis=-1).reshape(-1, n)
        rows.extend(grid[1:])
    unique = dict.fromkeys(tuple(r) for r in rows)
    return np.array(list(unique))


def lattice_points(n: int, with_zero: bool = True) -> np.ndarray:
    if 3**n > 243:
        pts = np.concatenate([np.zeros((1, n)), probe_points(n)])
    else:
        pts = np.stack(np.meshgrid(*[np.arange(3.0)] * n, indexing="ij"), axis=-1).reshape(-1, n)
    return pts if with_zero else pts[pts.any(axis=1)]


# ---------------------------------------------------------------------------
# Triplets
# ---------------------------------------------------------------------------


def c_bounds(cond: SemiTriangleCondition, a, b, mode: Mode | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Interval ``[c_lo, c_hi]`` of third sides completing positive ``(a, b)``."""
    mode = cond.default_mode if mode is None else Mode(mode)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sym = mode is Mode.SYMMETRIZED
    kind = cond.kind
    if kind is Kind.METRIC:
        return np.abs(a - b), a + b
    if kind is Kind.ULTRAMETRIC:
        m = np.maximum(a, b)
        return np.where(a == b, 0.0, m), m
    K = cond.K
    if kind is Kind.BMETRIC:
        lo = np.maximum(0.0, np.maximum(a / K - b, b / K - a))
        return lo, K * (a + b)
    if kind is Kind.STRONGB:
        lo = np.maximum(0.0, np.maximum(a - K * b, (b - a) / K))
        hi = K * a + b
        if sym:
            lo = np.maximum(lo, np.maximum((a - b) / K, b - K * a))
            hi = np.minimum(hi, K * b + a)
        return lo, hi
    return _c_bounds_bisect(cond, a, b, sym)


def _c_bounds_bisect(cond, a, b, sym):
    g = cond.g_batch
    hi = g(a, b)
    if sym:
        hi = np.minimum(hi, g(b, a))

    def lower(c):
        vals = [g(b, c), g(c, a)]
        if sym:
            vals += [g(c, b), g(a, c)]
        return vals

    def feasible(vals):
        ok = leq(a, vals[0]) & leq(b, vals[1])
        if sym:
            ok &= leq(a, vals[2]) & leq(b, vals[3])
        return ok

    f_hi = lower(hi)
    if not feasible(f_hi).all():
        raise SamplerUnsupported(f"generator {cond} admits no third side at c = g(a, b)")
    lo = np.zeros_like(hi)
    f_lo = lower(lo)
    done_zero = feasible(f_lo)
    top = hi.copy()
    for _ in range(_MAX_BISECTION_STEPS):
        active = ~done_zero & (top - lo > BISECTION_TOL * np.maximum(1.0, top))
        if not active.any():
            break
        mid = np.where(active, 0.5 * (lo + top), top)
        f_mid = lower(mid)
        for fl, fm, fh in zip(f_lo, f_mid, f_hi):
            if not (leq(fl, fm) & leq(fm, fh))[active].all():
                raise SamplerUnsupported(
                    f"generator {cond} is not nondecreasing in each argument; cannot bisect"
                )
        ok = feasible(f_mid) & active
        bad = ~feasible(f_mid) & active
        top = np.where(ok, mid, top)
        lo = np.where(bad, mid, lo)
        f_hi = [np.where(ok, fm, fh) for fm, fh in zip(f_mid, f_hi)]
        f_lo = [np.where(bad, fm, fl) for fm, fl in zip(f_mid, f_lo)]
    c_lo = np.where(done_zero, 0.0, top)
    return c_lo, hi


# Role permutations of (a, b, c); rotations come first.
_PERMS = np.array([[0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [2, 1, 0], [1, 0, 2]])


def _as_vector(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        return np.full(n, float(v))
    if v.shape != (n,):
        raise InputError(f"expected {n} values, got shape {v.shape}")
    return v


def boundary_triplet(conds: Sequence[SemiTriangleCondition], a, b) -> TripletND:
    """The triplet with ``c_i`` on the upper boundary ``g_i(a_i, b_i)``."""
    n = len(conds)
    a, b = _as_vector(a, n), _as_vector(b, n)
    c = np.array([c_bounds(cond, a[i : i + 1], b[i : i + 1])[1][0] for i, cond in enumerate(conds)])
    return TripletND(a, b, c)


def zero_triplet(conds: Sequence[SemiTriangleCondition], l) -> TripletND:
    """``((0, ..., 0), l, l)``: the zero pattern in every coordinate."""
    l = _as_vector(l, len(conds))
    return TripletND(np.zeros(len(conds)), l, l)


def _boundary_arrays(conds, A, B):
    C = np.empty_like(A)
    for i, cond in enumerate(conds):
        C[:, i] = c_bounds(cond, A[:, i], B[:, i])[1]
    return C


def probe_triplets(conds: Sequence[SemiTriangleCondition]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic triplets tried before any random draw.

    Boundary triplets on the diagonal ``(p, .., p), (q, .., q)`` first, then
    one boundary coordinate against zero-pattern coordinates, then the pure
    zero pattern.
    """
    n = len(conds)
    rows_a, rows_b = [], []
    pairs = [(1.0, 2.0), (2.0, 1.0), (1.0, 1.0), (1.0, 3.0), (3.0, 1.0), (1.0, 10.0), (10.0, 1.0)]
    for p, q in pairs:
        rows_a.append(np.full(n, p))
        rows_b.append(np.full(n, q))
    A = np.array(rows_a)
    B = np.array(rows_b)
    C = _boundary_arrays(conds, A, B)
    extra_a, extra_b, extra_c = [], [], []
    if n > 1:
        for i in range(n):
            for p, q in pairs[:3]:
                a, b, c = np.zeros(n), np.ones(n), np.ones(n)
                a[i], b[i] = p, q
                c[i] = c_bounds(conds[i], a[i : i + 1], b[i : i + 1])[1][0]
                extra_a.append(a)
                extra_b.append(b)
                extra_c.append(c)
    extra_a.append(np.zeros(n))
    extra_b.append(np.ones(n))
    extra_c.append(np.ones(n))
    A = np.concatenate([A, np.array(extra_a)])
    B = np.concatenate([B, np.array(extra_b)])
    C = np.concatenate([C, np.array(extra_c)])
    keep = triplet_nd_mask(conds, A, B, C)
    return A[keep], B[keep], C[keep]


def draw_triplets(
    conds: Sequence[SemiTriangleCondition],
    cfg: SearchConfig,
    rng: np.random.Generator,
    size: int,
    high: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``size`` random triplets; each row passes :func:`triplet_nd_mask`.

    A row is a zero draw (``(0, l, l)`` in every coordinate, one shared role
    order) with probability ``zero_fraction``, a boundary draw with
    probability ``boundary_fraction``, and otherwise a mixed draw whose
    coordinates are independently zero-pattern, boundary or interior.
    """
    n = len(conds)
    high = cfg.range_high if high is None else high
    A0 = log_uniform(rng, cfg.range_low, high, (size, n))
    B0 = log_uniform(rng, cfg.range_low, high, (size, n))
    row_u = rng.random(size)
    coord_u = rng.random((size, n))
    interior_u = rng.random((size, n))
    perm = rng.integers(0, 6, (size, n))

    zf, bf = cfg.zero_fraction, cfg.boundary_fraction
    zero_row = row_u < zf
    boundary_row = (row_u >= zf) & (row_u < zf + bf)
    mixed = ~(zero_row | boundary_row)
    zero_coord = zero_row[:, None] | (mixed[:, None] & (coord_u < zf))
    boundary_coord = boundary_row[:, None] | (mixed[:, None] & (coord_u >= zf) & (coord_u < zf + bf))
    perm = np.where(zero_row[:, None], perm[:, :1], perm)

    C0 = np.empty_like(A0)
    for i, cond in enumerate(conds):
        lo, hi = c_bounds(cond, A0[:, i], B0[:, i])
        c = lo + interior_u[:, i] * (hi - lo)
        c = np.where((c <= 0) | (c > hi), hi, c)
        C0[:, i] = np.where(boundary_coord[:, i], hi, c)
    A0, B0, C0 = (
        np.where(zero_coord, 0.0, A0),
        np.where(zero_coord, A0, B0),
        np.where(zero_coord, A0, C0),
    )
    stacked = np.stack([A0, B0, C0])  # (3, size, n)
    order = _PERMS[perm]  # (size, n, 3)
    rows = np.arange(size)[:, None]
    cols = np.arange(n)[None, :]
    A = stacked[order[..., 0], rows, cols]
    B = stacked[order[..., 1], rows, cols]
    C = stacked[order[..., 2], rows, cols]

    ok = triplet_nd_mask(conds, A, B, C)
    if not ok.all():
        # Float rounding at an interval end; fall back to the unpermuted boundary triplet.
        bad = ~ok
        Ab, Bb = np.where(zero_coord, 1.0, A0)[bad], np.where(zero_coord, 1.0, B0)[bad]
        A[bad], B[bad], C[bad] = Ab, Bb, _boundary_arrays(conds, Ab, Bb)
        if not triplet_nd_mask(conds, A[bad], B[bad], C[bad]).all():
            raise SamplerUnsupported("could not construct valid triplets for " + ",".join(map(str, conds)))
    return A, B, C


def iter_triplet_chunks(
    conds: Sequence[SemiTriangleCondition], cfg: SearchConfig, stream: str, total: int, stage: int = 0,
    high: float | None = None,
) -> Iterator[tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
    offset = 0
    for k, size in enumerate(chunk_sizes(total)):
        rng = chunk_rng(cfg.seed, stream, stage, k)
        yield offset, *draw_triplets(conds, cfg, rng, size, high)
        offset += size


def sample_triplet(conds: Sequence[SemiTriangleCondition], cfg: SearchConfig | None = None) -> TripletND:
    """One random triplet for the given per-coordinate conditions."""
    cfg = SearchConfig() if cfg is None else cfg
    if not conds:
        raise InputError("need at least one condition")
    A, B, C = draw_triplets(conds, cfg, chunk_rng(cfg.seed, "sample_triplet", 0, 0), 1)
    return TripletND(A[0], B[0], C[0])
