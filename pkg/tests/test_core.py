from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prodmetric.core import (
    BUILTINS,
    Combiner,
    Kind,
    M,
    Mode,
    SemiTriangleCondition,
    TripletND,
    Triplet1D,
    U,
    combiner_eval,
    conditions_text,
    is_triplet_1d,
    is_triplet_nd,
    parse_combiner,
    parse_condition,
    parse_conditions,
    triplet_mask,
)
from prodmetric.errors import ArityError, EvaluationError, InputError, InvalidCombiner, InvalidCondition

B2 = SemiTriangleCondition.bmetric(2)
S3 = SemiTriangleCondition.strong_b(3)

nonneg = st.floats(min_value=0, max_value=1e6, allow_nan=False)
triplets = st.tuples(nonneg, nonneg, nonneg).map(lambda t: Triplet1D(*t))


def all_conditions():
    return [
        M,
        U,
        B2,
        SemiTriangleCondition.bmetric(1.5),
        S3,
        SemiTriangleCondition.strong_b(1),
        SemiTriangleCondition.triangle_fn("2*t"),
        SemiTriangleCondition.custom("a + b + a*b"),
    ]


# -- generators -----------------------------------------------------------


@pytest.mark.parametrize(
    "cond, a, b, expected",
    [(B2, 1, 2, 6), (S3, 1, 2, 5), (U, 3, 4, 4), (M, 1, 2, 3)],
)
def test_g_eval_examples(cond, a, b, expected):
    assert cond.g(a, b) == expected


def test_builtin_generators_are_nonreducing():
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 1e3, 10_000)
    b = rng.uniform(0, 1e3, 10_000)
    for cond in all_conditions():
        assert (cond.g_batch(a, b) >= np.maximum(a, b)).all(), cond


def test_relaxation_constant_must_be_at_least_one():
    with pytest.raises(InvalidCondition):
        SemiTriangleCondition.bmetric(0.5)
    with pytest.raises(InvalidCondition):
        parse_condition("S:nan")


def test_reducing_custom_generator_rejected():
    with pytest.raises(InvalidCondition, match="nonreducing"):
        SemiTriangleCondition.custom("a")
    with pytest.raises(InvalidCondition):
        SemiTriangleCondition.custom("(a + b) / 2")


def test_triangle_function_validation():
    with pytest.raises(InvalidCondition, match="psi\\(0\\)"):
        SemiTriangleCondition.triangle_fn("t + 1")
    with pytest.raises(InvalidCondition):
        SemiTriangleCondition.triangle_fn("if(t < 5, 2*t, t)")
    assert SemiTriangleCondition.triangle_fn("t").g(1, 2) == 3


def test_custom_generator_negative_value_is_evaluation_error():
    cond = SemiTriangleCondition.custom("a + b")
    assert cond.g(1, 2) == 3
    neg = SemiTriangleCondition.custom("if(a > 1e7, -1, a + b)")
    with pytest.raises(EvaluationError):
        neg.g(1e8, 1)


def test_symmetry_detection():
    assert M.symmetric and B2.symmetric
    assert not S3.symmetric
    assert SemiTriangleCondition.strong_b(1).symmetric
    assert not SemiTriangleCondition.custom("2*a + b").symmetric
    assert S3.default_mode is Mode.SYMMETRIZED
    assert B2.default_mode is Mode.LITERAL


@pytest.mark.parametrize(
    "text, kind, K",
    [("M", Kind.METRIC, None), (" u ", Kind.ULTRAMETRIC, None), ("B:2", Kind.BMETRIC, 2.0), ("S:1.5", Kind.STRONGB, 1.5)],
)
def test_parse_condition(text, kind, K):
    c = parse_condition(text)
    assert c.kind is kind and c.K == K


@pytest.mark.parametrize("text", ["X", "B", "M:2", "B:x", "", "T:", "G:a +"])
def test_parse_condition_rejects(text):
    with pytest.raises(InputError):
        parse_condition(text)


def test_condition_text_round_trip():
    for cond in all_conditions():
        assert parse_condition(str(cond)) == cond
    conds = parse_conditions("B:2,S:1.5,M,G:max(a, b) + a")
    assert len(conds) == 4
    assert parse_conditions(conditions_text(conds)) == conds
    with pytest.raises(InvalidCondition):
        parse_conditions("M,,M")


# -- triplets -------------------------------------------------------------


@pytest.mark.parametrize(
    "cond, t, expected",
    [
        (M, (1, 2, 3), True),
        (M, (0, 1, 2), False),
        (M, (0, 5, 5), True),
        (B2, (6, 1, 2), True),
        (M, (1, 2, 4), False),
        (U, (1, 2, 2), True),
        (U, (1, 2, 3), False),
    ],
)
def test_is_triplet_1d_examples(cond, t, expected):
    assert is_triplet_1d(cond, Triplet1D(*t), Mode.LITERAL) is expected


def test_strong_b_literal_versus_symmetrized():
    # c <= 3a + b holds, but c <= 3b + a does not.
    t = Triplet1D(2, 1, 6.5)
    assert is_triplet_1d(S3, t, Mode.LITERAL)
    assert not is_triplet_1d(S3, t, Mode.SYMMETRIZED)
    assert not is_triplet_1d(S3, t)


def test_boundary_triplets_pass_with_slack():
    a, b = 0.1, 0.2
    assert is_triplet_1d(M, Triplet1D(a, b, a + b))
    assert is_triplet_1d(B2, Triplet1D(a, b, 2 * (a + b)))
    assert not is_triplet_1d(M, Triplet1D(a, b, (a + b) * (1 + 1e-9)))


def test_zero_rule_is_exact():
    assert not is_triplet_1d(M, Triplet1D(0, 1, 1 + 1e-15))
    assert is_triplet_1d(B2, Triplet1D(3, 0, 3))


@pytest.mark.parametrize(
    "conds, a, b, c, expected",
    [
        ([M, M], (1, 1), (2, 2), (3, 3), True),
        ([B2, B2], (1, 1), (2, 2), (6, 6), True),
        ([M, M], (0, 0), (1, 1), (2, 2), False),
        ([M, B2], (0, 1), (4, 2), (4, 6), True),
    ],
)
def test_is_triplet_nd_examples(conds, a, b, c, expected):
    assert is_triplet_nd(conds, TripletND(a, b, c)) is expected


def test_triplet_nd_arity():
    with pytest.raises(ArityError):
        is_triplet_nd([M], TripletND((1, 1), (1, 1), (1, 1)))
    with pytest.raises(ArityError):
        TripletND((1,), (1, 2), (1,))
    with pytest.raises(InputError):
        TripletND((-1,), (1,), (1,))
    with pytest.raises(InputError):
        Triplet1D(1, float("inf"), 1)


@settings(max_examples=300, deadline=None)
@given(triplets, st.floats(min_value=1, max_value=50))
def test_metric_implies_b_metric(t, K):
    if is_triplet_1d(M, t):
        assert is_triplet_1d(SemiTriangleCondition.bmetric(K), t)
    if is_triplet_1d(U, t):
        assert is_triplet_1d(M, t)


@settings(max_examples=300, deadline=None)
@given(triplets)
def test_symmetric_generators_are_permutation_invariant(t):
    for cond in (M, U, B2, SemiTriangleCondition.triangle_fn("2*t")):
        results = {is_triplet_1d(cond, Triplet1D(*p)) for p in itertools.permutations(t.as_tuple())}
        assert len(results) == 1


def test_symmetrized_mode_is_permutation_invariant_for_strong_b():
    rng = np.random.default_rng(3)
    for _ in range(500):
        t = rng.uniform(0.1, 10, 3)
        results = {is_triplet_1d(S3, Triplet1D(*p)) for p in itertools.permutations(t)}
        assert len(results) == 1


@pytest.mark.parametrize("cond", all_conditions(), ids=str)
def test_all_zero_triplet_passes(cond):
    assert is_triplet_1d(cond, Triplet1D(0, 0, 0), Mode.LITERAL)
    assert is_triplet_1d(cond, Triplet1D(0, 0, 0), Mode.SYMMETRIZED)


def test_triplet_mask_matches_scalar():
    rng = np.random.default_rng(5)
    A, B, C = (rng.choice([0.0, 1.0, 2.0, 3.0, 6.0], 400) for _ in range(3))
    for cond in all_conditions():
        mask = triplet_mask(cond, A, B, C)
        scalar = [is_triplet_1d(cond, Triplet1D(a, b, c)) for a, b, c in zip(A, B, C)]
        assert mask.tolist() == scalar


# -- combiners ------------------------------------------------------------


@pytest.mark.parametrize(
    "name, x, expected",
    [
        ("mean", (1, 2, 3), 2),
        ("sumsq", (1, 1), 2),
        ("geomean", (1, 0), 0),
        ("sum", (1, 2), 3),
        ("max", (1, 5, 2), 5),
        ("min", (4, 5), 4),
        ("euclid", (3, 4), 5),
        ("exp_sum", (0, 0), 1),
    ],
)
def test_combiner_examples(name, x, expected):
    assert combiner_eval(Combiner.named(name, len(x)), x) == pytest.approx(expected, rel=1e-15)


def test_step_combiners():
    pbm = Combiner.named("step_pbm", 2)
    assert [pbm(x) for x in [(0, 0), (1, 0), (0, 1), (2, 2), (1, 1)]] == [0, 1, 3, 2, 2]
    assert pbm.facts.value_range == (1.0, 3.0)
    bounded = Combiner.named("step_bounded", 2)
    assert bounded((0, 0)) == 0
    assert {bounded(x) for x in [(1, 1), (2, 2), (0.5, 3)]} <= {1.0, 2.0}
    assert bounded((1, 1)) == 2 and bounded((2, 2)) == 1


def test_combiner_arity_and_errors():
    F = Combiner.named("mean", 2)
    with pytest.raises(ArityError):
        F((1, 2, 3))
    with pytest.raises(InvalidCombiner):
        Combiner.named("median", 2)
    with pytest.raises(InputError):
        Combiner.named("mean", 0)
    G = Combiner.from_expression("x1 - x2", 2)
    with pytest.raises(EvaluationError):
        G((1, 2))
    with pytest.raises(EvaluationError):
        Combiner.from_expression("log(x1)", 1)((0,))


def test_parse_combiner():
    assert parse_combiner("builtin:mean", 3) == Combiner.named("mean", 3)
    F = parse_combiner("expr:x1*x2", 2)
    assert F((2, 3)) == 6
    assert parse_combiner(F.text, 2)((2, 3)) == 6
    with pytest.raises(InputError):
        parse_combiner("mean", 2)
    with pytest.raises(InputError):
        parse_combiner("expr:x3", 2)


def test_builtin_facts():
    expected_s = {"mean": 1, "sum": 1, "max": 1, "euclid": 1, "sumsq": 2}
    for name, s in expected_s.items():
        facts = Combiner.named(name, 3).facts
        assert facts.qsa == s and facts.amenable and facts.monotone
    assert not Combiner.named("geomean", 2).facts.amenable
    assert Combiner.named("geomean", 1).facts.amenable
    assert not Combiner.named("step_bounded", 2).facts.monotone
    assert set(BUILTINS) >= {"mean", "sum", "max", "min", "sumsq", "euclid", "geomean", "exp_sum", "step_pbm", "step_bounded"}
