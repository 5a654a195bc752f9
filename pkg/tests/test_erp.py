import math
import random
import zlib
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import chisquare

from steeple.erp import (
    BETA,
    CRP_SEAT,
    FLIP,
    MULTINOMIAL,
    NEG_INF,
    NEW_TABLE,
    NORMAL,
    RANDOM,
    UNIFORM_DRAW,
    crp_next_table,
    sample,
    score,
)
from steeple.reader import read
from steeple.values import ChurchError, make_list, sym, to_str, values_equal


def lst(src):
    return read("'" + src)[0].rest.first


def test_fair_flip_is_fair():
    rng = random.Random(1)
    hits = sum(sample(FLIP, [], rng) for _ in range(20000))
    assert abs(hits / 20000 - 0.5) < 0.015


def test_degenerate_flip():
    rng = random.Random(2)
    assert all(sample(FLIP, [1.0], rng) is True for _ in range(1000))
    assert all(sample(FLIP, [0], rng) is False for _ in range(1000))


def test_multinomial_pcfg_rule():
    rng = random.Random(3)
    args = [lst("((S a) (T a))"), lst("(0.2 0.8)")]
    draws = Counter(to_str(sample(MULTINOMIAL, args, rng)) for _ in range(20000))
    assert abs(draws["(S a)"] / 20000 - 0.2) < 0.015


def test_score_examples():
    assert score(FLIP, [0.9], True) == math.log(0.9)
    assert score(FLIP, [], 7) == NEG_INF
    expected = -math.log(10.0 * math.sqrt(2.0 * math.pi))
    assert score(NORMAL, [0.0, 10.0], 0.0) == pytest.approx(expected, abs=1e-12)
    mass, _ = integrate.quad(lambda x: math.exp(score(NORMAL, [0.0, 10.0], x)), -100, 100)
    assert mass == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize(
    "erp, args",
    [
        (FLIP, [1.5]),
        (FLIP, [-0.1]),
        (FLIP, [True]),
        (FLIP, [0.5, 0.5]),
        (BETA, [0, 1]),
        (BETA, [1]),
        (NORMAL, [0, 0]),
        (NORMAL, [0, -1]),
        (MULTINOMIAL, ["(a b)", "(0.5 0.6)"]),
        (MULTINOMIAL, ["(a b)", "(1.0)"]),
        (MULTINOMIAL, ["(a b)", "(1.5 -0.5)"]),
        (UNIFORM_DRAW, ["()"]),
        (RANDOM, [1]),
    ],
)
def test_invalid_parameters(erp, args):
    args = [lst(a) if isinstance(a, str) else a for a in args]
    with pytest.raises(ChurchError):
        sample(erp, args, random.Random(0))
    with pytest.raises(ChurchError):
        score(erp, args, 0)


def test_invalid_parameters_evaluate_to_error():
    from steeple.core import Runtime
    from steeple.values import ERROR

    rt = Runtime(0)
    assert rt.execute("(flip 2) (beta -1 1) (multinomial '(a) '(0.3))") == [ERROR] * 3


def _finite_cases():
    return [
        (FLIP, (0.5,)),
        (FLIP, (0.9,)),
        (FLIP, (0.0,)),
        (MULTINOMIAL, ((sym("a"), sym("b"), sym("c")), (0.2, 0.3, 0.5))),
        (MULTINOMIAL, ((1, 1, 2), (0.25, 0.25, 0.5))),
        (UNIFORM_DRAW, ((sym("x"), sym("y"), sym("z"), sym("w")),)),
        (CRP_SEAT, ((3, 1, 2), 1.5, (0, 3, 4))),
        (CRP_SEAT, ((2,), 0.0, (0,))),
    ]


@pytest.mark.parametrize("erp, params", _finite_cases())
def test_sampler_matches_scorer(erp, params):
    rng = random.Random(zlib.crc32(f"{erp.name}{params}".encode()))
    support = erp.support(params)
    n = 100_000
    counts = Counter(to_str(erp.sample(params, rng)) for _ in range(n))
    observed = [counts[to_str(v)] for v, _ in support]
    assert sum(observed) == n
    if len(support) == 1:
        return
    expected = [n * math.exp(lp) for _, lp in support]
    assert chisquare(observed, expected).pvalue > 0.001


@pytest.mark.parametrize(
    "params",
    [(1.0, 1.0), (2.0, 5.0), (0.5, 0.5), (10.0, 3.0)],
)
def test_beta_density_integrates_to_one(params):
    mass, _ = integrate.quad(lambda x: math.exp(BETA.score(params, x)), 0.0, 1.0, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("params", [(0.0, 1.0), (3.0, 0.5), (-2.0, 10.0)])
def test_normal_density_integrates_to_one(params):
    mu, s = params
    mass, _ = integrate.quad(lambda x: math.exp(NORMAL.score(params, x)), mu - 10 * s, mu + 10 * s)
    assert mass == pytest.approx(1.0, abs=1e-3)


def test_random_density():
    assert RANDOM.score((), 0.3) == 0.0
    assert RANDOM.score((), 1.5) == NEG_INF


@pytest.mark.parametrize(
    "erp, args",
    [
        (FLIP, []),
        (FLIP, [0.3]),
        (RANDOM, []),
        (BETA, [1, 1]),
        (NORMAL, [0.0, 10.0]),
        (MULTINOMIAL, ["(a b c)", "(0.1 0.2 0.7)"]),
        (UNIFORM_DRAW, ["(1 2 3)"]),
    ],
)
def test_seed_determinism_and_positive_score(erp, args):
    args = [lst(a) if isinstance(a, str) else a for a in args]
    xs = [sample(erp, args, r) for r in [random.Random(42)] for _ in range(50)]
    ys = [sample(erp, args, r) for r in [random.Random(42)] for _ in range(50)]
    assert all(values_equal(x, y) for x, y in zip(xs, ys))
    assert all(score(erp, args, x) > NEG_INF for x in xs)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=8).filter(lambda w: sum(w) > 1e-3))
def test_multinomial_support_sums_to_one(weights):
    total = math.fsum(weights)
    probs = [w / total for w in weights]
    probs[-1] = max(0.0, 1.0 - math.fsum(probs[:-1]))
    values = make_list([sym(f"v{i % 3}") for i in range(len(probs))])
    params = MULTINOMIAL.check([values, make_list(probs)])
    mass = math.fsum(math.exp(lp) for _, lp in MULTINOMIAL.support(params))
    assert mass == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_flip_support_sums_to_one(p):
    mass = math.fsum(math.exp(lp) for _, lp in FLIP.support((p,)))
    assert mass == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 20), max_size=6), st.floats(0.0, 50.0))
def test_crp_support_sums_to_one(counts, alpha):
    if not counts and alpha == 0.0:
        return
    mass = math.fsum(math.exp(lp) for _, lp in CRP_SEAT.support(CRP_SEAT.check([counts, alpha])))
    assert mass == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.01, 0.99))
def test_sampled_values_score_finite(seed, p):
    rng = random.Random(seed)
    for erp, args in [(FLIP, [p]), (BETA, [p * 5, 1 + p]), (NORMAL, [p, p])]:
        v = sample(erp, args, rng)
        assert score(erp, args, v) > NEG_INF


def test_crp_seat_labels():
    params = ((2, 1), 1.0, (0, 5))
    assert CRP_SEAT.score(params, 5) == pytest.approx(math.log(0.25))
    assert CRP_SEAT.score(params, NEW_TABLE) == pytest.approx(math.log(0.25))
    assert CRP_SEAT.score(params, 1) == NEG_INF
    assert [v for v, _ in CRP_SEAT.support(params)] == [0, 5, NEW_TABLE]
    assert CRP_SEAT.score(((2,), float("inf"), (0,)), NEW_TABLE) == 0.0


def test_crp_next_table_examples():
    rng = random.Random(9)
    assert crp_next_table([], 0.5, rng) == 0
    assert all(crp_next_table([4, 2], 0.0, rng) in (0, 1) for _ in range(2000))
    n = 100_000
    reuse = sum(crp_next_table([3], 1.0, rng) == 0 for _ in range(n))
    assert abs(reuse / n - 0.75) < 0.005


def test_gensym_primitives_distinct():
    from steeple.core import Runtime

    rt = Runtime(0)
    assert rt.execute("(= (gensym) (gensym))") == [False]
    assert rt.execute("(let ((g (gensym))) (= g g))") == [True]
