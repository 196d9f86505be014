"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import contextlib
import itertools
import time

import numpy as np
import pytest

from prodmetric.checkers import (
    CLASS_NAMES,
    PointWitness,
    SearchConfig,
    Status,
    TripletWitness,
    check_amenable,
    check_lattice,
    check_monotone,
    classify,
    estimate_quasi_subadditive,
    estimate_required_K,
    falsify,
)
from prodmetric.checkers.classify import CERT_HALF_RANGE, CERT_QSA, included
from prodmetric.core import Combiner, Kind, M, SemiTriangleCondition, Triplet1D
from prodmetric.errors import NotAmenableOnThisInstance
from prodmetric.spaces import (
    FiniteSemimetricSpace,
    glue_pair,
    min_relaxation,
    realize_triplet,
    realize_zero,
    space_from_triplet,
)
from prodmetric.topsis import DecisionProblem, rank

B2 = SemiTriangleCondition.bmetric(2)
LATTICE_BUILTINS = ("mean", "sum", "max", "sumsq", "euclid", "geomean", "exp_sum")


@pytest.fixture
def criterion(capsys):
    """Run a block and print ``PASS``/``FAIL`` for it, bypassing output capture."""

    @contextlib.contextmanager
    def run(number: int, title: str):
        try:
            yield
        except BaseException as exc:
            with capsys.disabled():
                print(f"\nFAIL  criterion {number}: {title} ({type(exc).__name__}: {exc})")
            raise
        with capsys.disabled():
            print(f"\nPASS  criterion {number}: {title}")

    return run


def named(name: str, n: int = 2) -> Combiner:
    return Combiner.named(name, n)


@pytest.fixture(scope="module")
def regression_witnesses():
    """Criterion-1 falsifier witnesses, shared with the realization loop."""
    return {
        "geomean": check_amenable(named("geomean")),
        "sumsq": falsify(named("sumsq"), [M, M], M),
        "mean": falsify(named("mean"), [B2, B2], M),
    }


@pytest.fixture(scope="module")
def lattice_reports():
    return {name: classify(named(name), 2) for name in LATTICE_BUILTINS}


# ---------------------------------------------------------------------------
# 1. Regression on the textbook examples
# ---------------------------------------------------------------------------


def test_1_example_regression(criterion):
    with criterion(1, "regression on the textbook examples, exact, under 1 s"):
        start = time.perf_counter()

        v = check_amenable(named("geomean"))
        assert v.refuted_ and v.witness.point == (1.0, 0.0)

        v = falsify(named("sumsq"), [M, M], M)
        t = v.witness.triplet
        assert (t.a, t.b, t.c) == ((1.0, 1.0), (2.0, 2.0), (3.0, 3.0))
        fa, fb, fc = v.witness.image
        assert fc == 18.0 and fa + fb == 10.0

        v = falsify(named("mean"), [B2, B2], M)
        t = v.witness.triplet
        assert (t.a, t.b, t.c) == ((1.0, 1.0), (2.0, 2.0), (6.0, 6.0))
        assert v.witness.image == (1.0, 2.0, 6.0)

        assert estimate_quasi_subadditive(named("exp_sum")).diverging

        v = falsify(named("step_pbm"), [B2, B2], M, SearchConfig(samples=100_000))
        assert v.status is Status.NO_VIOLATION_FOUND and v.stats["samples"] == 100_000

        F = named("step_bounded")
        mono = check_monotone(F)
        assert mono.refuted_ and mono.witness.replay(F)
        report = classify(F, 2)
        assert report.verdicts["P_BM"].proved_
        assert report.verdicts["P_BM"].certificate == CERT_HALF_RANGE

        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"took {elapsed:.3f} s"


# ---------------------------------------------------------------------------
# 2. Oracle exactness
# ---------------------------------------------------------------------------


def _random_space(rng) -> FiniteSemimetricSpace:
    m = int(rng.integers(3, 7))
    D = np.zeros((m, m))
    iu = np.triu_indices(m, 1)
    regime = rng.integers(3)
    if regime == 0:
        vals = rng.uniform(0.1, 10, len(iu[0]))
    elif regime == 1:
        vals = np.exp(rng.uniform(np.log(0.01), np.log(10), len(iu[0])))
    else:
        vals = rng.integers(1, 8, len(iu[0])).astype(float)
    D[iu] = vals
    return FiniteSemimetricSpace(range(m), D + D.T)


def test_2_oracle_exactness(criterion):
    with criterion(2, "min_relaxation exact on 1000 random 3-6 point spaces and on (1,2,6)"):
        p = min_relaxation(space_from_triplet(Triplet1D(1, 2, 6)))
        assert (p.k_b, p.k_s) == (2.0, 4.0)

        rng = np.random.default_rng(2024)
        tol = 1e-12
        for _ in range(1000):
            s = _random_space(rng)
            D = s.dist
            prof = min_relaxation(s)
            assert prof.k_b == max(1.0, prof.max_ratio_b) and prof.k_s == max(1.0, prof.max_ratio_s)
            for x, y, z in itertools.permutations(range(len(s)), 3):
                assert D[x, z] <= prof.k_b * (D[x, y] + D[y, z]) + tol
                assert D[x, z] <= prof.k_s * D[x, y] + D[y, z] + tol
            x, y, z = prof.worst_triple_b
            assert abs(D[x, z] - prof.max_ratio_b * (D[x, y] + D[y, z])) <= tol
            if prof.k_b > 1:
                assert abs(D[x, z] - prof.k_b * (D[x, y] + D[y, z])) <= tol
            x, y, z = prof.worst_triple_s
            assert abs(D[x, z] - (prof.max_ratio_s * D[x, y] + D[y, z])) <= tol


# ---------------------------------------------------------------------------
# 3. Gluing
# ---------------------------------------------------------------------------


def _block(rng, tag):
    kind = rng.integers(3)
    if kind == 0:
        a, b = rng.uniform(0.1, 10, 2)
        K = rng.uniform(1, 4)
        c = rng.uniform(abs(a - b) / K + 1e-3, K * (a + b))
        s = space_from_triplet(Triplet1D(a, b, c))
    elif kind == 1:
        m = int(rng.integers(1, 3))
        s = FiniteSemimetricSpace(range(m), [[0.0]] if m == 1 else [[0, 1.5], [1.5, 0]])
    else:
        s = _random_space(rng)
    return FiniteSemimetricSpace([(tag, label) for label in s.labels], s.dist)


def test_3_gluing(criterion):
    with criterion(3, "gluing properties on 500 random block pairs, under 10 s"):
        rng = np.random.default_rng(3)
        start = time.perf_counter()
        done = 0
        while done < 500:
            s1, s2 = _block(rng, 1), _block(rng, 2)
            if len(s1) + len(s2) < 3:
                continue
            g = glue_pair(s1, s2)
            m1 = len(s1)
            assert g.dist[:m1, :m1].tobytes() == s1.dist.tobytes()
            assert g.dist[m1:, m1:].tobytes() == s2.dist.tobytes()
            assert g.labels == s1.labels + s2.labels
            assert g.diameter == max(s1.diameter, s2.diameter)
            pg, p1, p2 = min_relaxation(g), min_relaxation(s1), min_relaxation(s2)
            assert pg.k_b <= max(p1.k_b, p2.k_b) + 1e-12
            assert pg.k_s <= max(p1.k_s, p2.k_s) + 1e-12
            done += 1
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"took {elapsed:.3f} s"


# ---------------------------------------------------------------------------
# 4. Witness realization
# ---------------------------------------------------------------------------


def _triple_constant(space, roles, family: Kind) -> float:
    """Smallest constant the three witness points need, over every role order."""
    idx = [space.index(r) for r in roles]
    D = space.dist
    best = 1.0
    for x, y, z in itertools.permutations(idx, 3):
        if len({x, y, z}) < 3:
            continue
        if family is Kind.STRONGB:
            best = max(best, (D[x, z] - D[y, z]) / D[x, y])
        else:
            best = max(best, D[x, z] / (D[x, y] + D[y, z]))
    return best


def _target_K(target: SemiTriangleCondition) -> tuple[Kind, float]:
    if target.kind is Kind.METRIC:
        return Kind.BMETRIC, 1.0
    return target.kind, target.K


def test_4_witness_realization(criterion, regression_witnesses, lattice_reports):
    with criterion(4, "every Refuted witness of suites 1 and 5 is realized by product spaces"):
        verdicts = [(name, v) for name, v in regression_witnesses.items()]
        for combiner, report in lattice_reports.items():
            verdicts += [(combiner, v) for v in report.verdicts.values() if v.refuted_]
        triplets = points = 0
        for combiner, v in verdicts:
            F = named(combiner)
            w = v.witness
            if isinstance(w, TripletWitness):
                space, roles = realize_triplet(F, w.triplet)
                family, K = _target_K(w.target)
                assert _triple_constant(space, roles, family) > K
                prof = min_relaxation(space)
                assert (prof.k_s if family is Kind.STRONGB else prof.k_b) > K
                triplets += 1
            else:
                assert isinstance(w, PointWitness)
                with pytest.raises(NotAmenableOnThisInstance):
                    realize_zero(F, w.point)
                points += 1
        assert triplets >= 6 and points >= 1


# ---------------------------------------------------------------------------
# 5. Lattice consistency
# ---------------------------------------------------------------------------


def test_5_lattice(criterion, lattice_reports):
    with criterion(5, "classification lattice consistent for seven built-ins"):
        for name, report in lattice_reports.items():
            v = report.verdicts
            check_lattice(v)
            if v["P_BM"].proved_:
                assert not v["P_M"].refuted_, name
            if v["P_M"].proved_:
                assert not v["P_MB"].refuted_, name
            assert v["P_B"] == v["P_MB"] and v["P_B"].to_dict() == v["P_MB"].to_dict(), name
            for a, b in itertools.permutations(CLASS_NAMES, 2):
                if included(a, b):
                    assert not (v[a].proved_ and v[b].refuted_), (name, a, b)
        assert lattice_reports["mean"].verdicts["P_BM"].refuted_
        assert lattice_reports["mean"].verdicts["P_M"].proved_
        assert all(v.refuted_ for v in lattice_reports["geomean"].verdicts.values())


# ---------------------------------------------------------------------------
# 6. Sufficient-condition constants
# ---------------------------------------------------------------------------


def test_6_constants(criterion, lattice_reports):
    with criterion(6, "s = 1 for mean, s = 2 for sumsq, required K of mean on (B_2,B_2) is 2 +- 0.01"):
        mean, sumsq = lattice_reports["mean"], lattice_reports["sumsq"]
        assert mean.verdicts["P_B"].proved_ and mean.verdicts["P_B"].certificate == CERT_QSA
        assert mean.constants["s"] == 1
        assert sumsq.verdicts["P_B"].proved_ and sumsq.verdicts["P_B"].certificate == CERT_QSA
        assert sumsq.constants["s"] == 2
        r = estimate_required_K(named("mean"), [B2, B2], "B", SearchConfig(samples=100_000))
        assert abs(r.sup_K - 2.0) <= 0.01 and not r.diverging and r.samples <= 100_002


# ---------------------------------------------------------------------------
# 7. Determinism
# ---------------------------------------------------------------------------


def test_7_determinism(criterion):
    with criterion(7, "classify byte-identical across runs and with 1 vs 8 threads"):
        for name in ("mean", "sumsq", "step_pbm"):
            runs = [
                classify(named(name), 2, SearchConfig(seed=11, threads=t))
                for t in (1, 1, 8)
            ]
            jsons = {r.to_json().encode() for r in runs}
            texts = {r.to_text().encode() for r in runs}
            assert len(jsons) == 1 and len(texts) == 1, name


# ---------------------------------------------------------------------------
# 8. TOPSIS
# ---------------------------------------------------------------------------


def _random_problem(rng, m, n):
    X = rng.uniform(0, 10, (m, n))
    X[0] += 1.0
    w = rng.uniform(0.1, 1, n)
    dirs = list(rng.choice(["benefit", "cost"], n))
    return DecisionProblem([f"A{i}" for i in range(m)], [f"C{j}" for j in range(n)], X, w / w.sum(), dirs)


def test_8_topsis(criterion):
    with criterion(8, "TOPSIS symmetric tie, dominance on 1000 instances, column-scale invariance"):
        p = DecisionProblem(["a", "b"], ["x", "y"], [[1, 2], [2, 1]], [0.5, 0.5], ["benefit", "benefit"])
        assert rank(p, Combiner.named("euclid", 2)).closeness.tolist() == [0.5, 0.5]

        rng = np.random.default_rng(8)
        for name in ("euclid", "mean", "max"):
            checked = 0
            while checked < 1000:
                m, n = int(rng.integers(2, 7)), int(rng.integers(1, 6))
                base = _random_problem(rng, m, n)
                X = base.matrix.copy()
                i, k = rng.choice(m, 2, replace=False)
                sign = np.where(np.array(base.directions) == "benefit", 1.0, -1.0)
                X[i] = np.maximum(X[k] + sign * rng.uniform(0, 3, n) * (rng.random(n) < 0.7), 0.0)
                if (X == 0).all(axis=0).any():
                    continue
                q = DecisionProblem(base.alternatives, base.criteria, X, base.weights, base.directions)
                V = rank(q, Combiner.named(name, n), check=False)
                Vi, Vk = V.normalized[i], V.normalized[k]
                assert np.where(sign > 0, Vi >= Vk, Vi <= Vk).all()
                assert V.closeness[i] >= V.closeness[k], (name, q.to_dict())
                checked += 1

        F = Combiner.named("euclid", 4)
        for _ in range(1000):
            base = _random_problem(rng, int(rng.integers(2, 7)), 4)
            lam = np.exp(rng.uniform(-5, 5, 4))
            scaled = DecisionProblem(base.alternatives, base.criteria, base.matrix * lam, base.weights, base.directions)
            r, s = rank(base, F, check=False), rank(scaled, F, check=False)
            assert np.abs(r.normalized - s.normalized).max() <= 1e-12
            assert np.abs(r.closeness - s.closeness).max() <= 1e-12
