import math
import random
from collections import Counter

import pytest

import oracles
from conftest import datum
from steeple import _backend
from steeple.core import Runtime
from steeple.inference import (
    InadmissibleConditioning,
    InferenceBudgetError,
    MHChain,
    UnsupportedModel,
    condition,
    enumerate_expression,
    enumerate_query,
    lex_query,
    mh_query,
    problem_from_form,
    rejection_query,
    rejection_samples,
)
from steeple.prelude import load_fixture
from steeple.trace import NestedQueryUnsupported
from steeple.values import ERROR, to_str


def problem(rt, src):
    return problem_from_form(rt, datum(src))


def fixture_problem(rt, name):
    [q] = load_fixture(rt, name)
    return problem_from_form(rt, q)


def frequencies(values):
    counts = Counter(to_str(v) for v in values)
    n = sum(counts.values())
    return {k: c / n for k, c in counts.items()}


def tv(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


TWO_FLIPS = {k: float(v) for k, v in oracles.two_flips_posterior().items()}


# rejection --------------------------------------------------------------------


def test_rejection_two_flips(rt):
    p = fixture_problem(rt, "two-flips")
    freqs = frequencies(rejection_query(p, 10000, random.Random(1)))
    assert tv(freqs, TWO_FLIPS) < 0.02


def test_rejection_attempts_are_geometric(rt):
    p = fixture_problem(rt, "two-flips")
    attempts = [a for _, a in rejection_samples(p, 8000, random.Random(2))]
    assert sum(attempts) / len(attempts) == pytest.approx(4 / 3, abs=0.04)


def test_rejection_budget_error(rt):
    p = problem(rt, "(query '(flip) (lambda (x) false))")
    with pytest.raises(InferenceBudgetError) as info:
        rejection_query(p, 1, random.Random(0), budget=200)
    assert info.value.attempts == 200
    assert "200 attempts" in str(info.value)


def test_unconditioned_query_is_forward_sampling(rt):
    p = problem(rt, "(query '(flip 0.3) (lambda (x) true))")
    xs = rejection_query(p, 10000, random.Random(3))
    assert sum(x is True for x in xs) / 10000 == pytest.approx(0.3, abs=0.015)


def test_query_form_in_program_returns_a_sample(rt):
    out = rt.execute("(query '(pair (flip) (flip)) (lambda (v) (and (first v) (rest v))))")
    assert to_str(out[0]) == "(true . true)"


def test_erroring_predicate_is_a_rejection(rt):
    p = problem(rt, "(query '(flip) (lambda (x) (if x (car 1) true)))")
    assert all(x is False for x in rejection_query(p, 200, random.Random(4)))


def test_shared_class_posterior_binomial():
    rt = Runtime(5)
    p = fixture_problem(rt, "infinite-mixture-binomial")
    xs = rejection_query(p, 300, random.Random(6))
    share = sum(x is True for x in xs) / len(xs)
    oracle = oracles.shared_class_posterior(
        oracles.BINOMIAL_FIXTURE_OBSERVATIONS, ["blond", "tall", "curly"])
    assert oracle == pytest.approx(80 / 123, abs=1e-12)
    assert share > 0.5
    assert abs(share - oracle) < 0.1


# enumeration ------------------------------------------------------------------


def test_enumerate_flip(rt):
    r = enumerate_expression(datum("(flip)"), rt)
    assert r.as_dict() == {"false": 0.5, "true": 0.5}
    assert r.residual == 0.0 and r.leaf_count == 2


def test_enumerate_constant(rt):
    r = enumerate_expression(datum("7"), rt)
    assert r.as_dict() == {"7": 1.0} and r.leaf_count == 1


def test_enumerate_geometric_truncation(rt):
    rt.execute("(define (geometric p) (if (flip p) 0 (+ 1 (geometric p))))")
    r = enumerate_expression(datum("(geometric 0.5)"), rt, min_path_prob=2.0**-20)
    ks = sorted(int(k) for k in r.as_dict())
    assert ks == list(range(19))
    for k in ks:
        assert r.probability(k) == pytest.approx(oracles.geometric_mass(k, 0.5), rel=1e-12)
    assert r.residual == pytest.approx(2.0**-19, rel=1e-12)
    assert r.total == pytest.approx(1.0, abs=1e-12)


def test_enumerate_residual_shrinks_as_limits_grow(rt):
    rt.execute("(define (geometric p) (if (flip p) 0 (+ 1 (geometric p))))")
    d = datum("(geometric 0.3)")
    by_choices = [enumerate_expression(d, rt, max_choices=m, min_path_prob=0.0).residual
                  for m in (2, 4, 8, 16)]
    by_prob = [enumerate_expression(d, rt, min_path_prob=t).residual
               for t in (1e-2, 1e-4, 1e-6, 1e-8)]
    for seq in (by_choices, by_prob):
        assert all(a > b for a, b in zip(seq, seq[1:]))
    assert by_choices[0] == pytest.approx(0.7**2, rel=1e-12)


def test_enumerate_continuous_is_unsupported(rt):
    with pytest.raises(UnsupportedModel):
        enumerate_expression(datum("(if (flip) (beta 1 1) 0)"), rt)


def test_enumerate_collects_errors(rt):
    r = enumerate_expression(datum("(if (flip 0.25) (car 1) 'ok)"), rt)
    assert r.probability(ERROR) == pytest.approx(0.25)
    assert r.as_dict() == {"error": 0.25, "ok": 0.75}


def test_enumerate_respects_memo(rt):
    r = enumerate_expression(datum("(let ((f (mem flip))) (list (f) (f)))"), rt)
    assert r.as_dict() == {"(false false)": 0.5, "(true true)": 0.5}


def test_enumerate_query_two_flips(rt):
    r = enumerate_query(fixture_problem(rt, "two-flips"))
    assert r.as_dict() == pytest.approx(TWO_FLIPS, abs=1e-15)


def test_enumerate_query_sprinkler(rt):
    r = enumerate_query(fixture_problem(rt, "sprinkler"))
    oracle = oracles.sprinkler_posterior()["true"]
    assert r.probability(True) == pytest.approx(oracle, abs=1e-9)
    assert r.total == pytest.approx(1.0, abs=1e-12)


def test_enumerate_query_inadmissible(rt):
    with pytest.raises(InadmissibleConditioning):
        enumerate_query(problem(rt, "(query '(flip) (lambda (x) (and x (not x))))"))


def test_predicate_marginalization(rt):
    """Conditioning the joint of (value, predicate) equals the query answer."""
    src_value = "(list (flip 0.3) (multinomial '(a b c) '(0.2 0.3 0.5)))"
    src_pred = "(lambda (v) (or (first v) (eq? (last v) 'c)))"
    direct = enumerate_query(problem(rt, f"(query '{src_value} {src_pred})"))
    joint = enumerate_expression(
        datum(f"(let ((v {src_value})) (pair v ({src_pred} v)))"), rt
    )
    via_joint = condition(joint)
    assert direct.as_dict() == pytest.approx(via_joint.as_dict(), abs=1e-15)


def test_predicate_with_its_own_randomness(rt):
    r = enumerate_query(problem(rt, "(query '(flip) (lambda (x) (if x (flip 0.8) (flip 0.2))))"))
    assert r.probability(True) == pytest.approx(0.8, abs=1e-15)


# lex-query --------------------------------------------------------------------


def test_lex_query_matches_manual_environment(rt):
    lexicon = [("a", datum("(flip 0.4)")), ("b", datum("(if a (flip 0.9) (flip 0.1))"))]
    via_lex = enumerate_query(lex_query(rt, lexicon, datum("a"), datum("b")))
    manual = enumerate_query(problem(
        rt, "(query '(let* ((a (flip 0.4)) (b (if a (flip 0.9) (flip 0.1)))) (pair a b))"
            " (lambda (v) (rest v)))"))
    a_true = sum(p for k, p in manual.as_dict().items() if k.startswith("(true"))
    assert via_lex.probability(True) == pytest.approx(a_true, abs=1e-15)
    assert a_true == pytest.approx(0.36 / 0.42, abs=1e-12)


def test_lex_query_entries_see_each_other(rt):
    p = problem(rt, "(lex-query '((f (lambda (n) (if (= n 0) 0 (+ 1 (g (- n 1))))))"
                    " (g (lambda (n) (f n)))) '(f 3) 'true)")
    assert enumerate_query(p).as_dict() == {"3": 1.0}


def test_lex_query_empty_lexicon(rt):
    p = problem(rt, "(lex-query '() '(flip 0.25) 'true)")
    assert enumerate_query(p).probability(True) == pytest.approx(0.25)


def test_malformed_lexicon_is_an_error(rt):
    assert rt.execute("(lex-query '((1 2)) 'x 'true)") == [ERROR]


# Metropolis-Hastings --------------------------------------------------------


def test_mh_deterministic_expression_is_constant(rt):
    xs = mh_query(problem(rt, "(query '(+ 1 2) (lambda (x) true))"), 200, rng=random.Random(0))
    assert xs == [3] * 200


def test_mh_single_conditioned_flip_never_moves(rt):
    chain = MHChain(problem(rt, "(query '(flip) (lambda (x) x))"), random.Random(1))
    assert all(v is True for v in chain.samples(500))


def test_mh_two_flips(rt):
    xs = mh_query(fixture_problem(rt, "two-flips"), 8000, burn_in=500, lag=2,
                  rng=random.Random(2), debug=True)
    assert tv(frequencies(xs), TWO_FLIPS) < 0.04


def test_mh_control_flow_change_bookkeeping(rt):
    """Debug mode asserts logp' - logp = fresh - stale + rescored on every step."""
    rt.execute("(define (geometric p) (if (flip p) 0 (+ 1 (geometric p))))")
    p = problem(rt, "(query '(let ((k (geometric 0.4))) (if (flip) k (list k (flip 0.3))))"
                    " (lambda (v) true))")
    chain = MHChain(p, random.Random(3), debug=True)
    for _ in range(3000):
        chain.step()
    assert 0.0 < chain.acceptance_rate < 1.0


def test_mh_geometric_marginal(rt):
    rt.execute("(define (geometric p) (if (flip p) 0 (+ 1 (geometric p))))")
    p = problem(rt, "(query '(geometric 0.5) (lambda (k) true))")
    xs = mh_query(p, 10000, burn_in=500, lag=2, rng=random.Random(4), debug=True)
    mean = sum(xs) / len(xs)
    assert mean == pytest.approx(1.0, abs=0.1)


def test_mh_sprinkler(rt):
    p = fixture_problem(rt, "sprinkler")
    xs = mh_query(p, 8000, burn_in=500, lag=3, rng=random.Random(5))
    assert sum(x is True for x in xs) / len(xs) == pytest.approx(
        oracles.sprinkler_posterior()["true"], abs=0.04)


def test_mh_collapsed_matches_enumeration(rt):
    p = problem(rt, "(query '(multinomial '(a b c) '(0.2 0.3 0.5))"
                    " (lambda (x) (flip (if (eq? x 'a) 0.9 0.1))))")
    exact = enumerate_query(p).as_dict()
    xs = mh_query(p, 8000, burn_in=200, rng=random.Random(6), collapse=True, debug=True)
    assert tv(frequencies(xs), exact) < 0.03


def test_mh_initialization_budget(rt):
    p = problem(rt, "(query '(flip) (lambda (x) false))")
    with pytest.raises(InferenceBudgetError):
        MHChain(p, random.Random(0), init_budget=50)


def test_mh_lag_must_be_positive(rt):
    chain = MHChain(problem(rt, "(query '(flip) (lambda (x) true))"), random.Random(0))
    with pytest.raises(ValueError):
        list(chain.samples(1, lag=0))


# nested query -----------------------------------------------------------------


NESTED = {"(true . false)": 0.5, "(true . true)": 0.5}


def test_nested_query_enumeration(rt):
    r = enumerate_query(fixture_problem(rt, "nested-query"))
    assert r.as_dict() == pytest.approx(NESTED, abs=1e-15)


def test_nested_query_rejection(rt):
    xs = rejection_query(fixture_problem(rt, "nested-query"), 4000, random.Random(7))
    assert tv(frequencies(xs), NESTED) < 0.03


def test_nested_query_mh(rt):
    p = fixture_problem(rt, "nested-query")
    xs = mh_query(p, 4000, rng=random.Random(8), debug=True)
    assert tv(frequencies(xs), NESTED) < 0.04


def test_nested_query_conditioned_on_outer_world(rt):
    """The inner query sees the outer memo table."""
    src = ("(query '(let* ((coin (mem (lambda () (flip 0.3))))"
           "              (outer (coin))"
           "              (inner (query '(coin) (lambda (x) true))))"
           "         (list outer inner))"
           " (lambda (v) true))")
    r = enumerate_query(problem(rt, src))
    assert r.as_dict() == pytest.approx({"(false false)": 0.7, "(true true)": 0.3}, abs=1e-12)


def test_nested_continuous_query_under_mh_is_unsupported(rt):
    p = problem(rt, "(query '(query '(beta 1 1) (lambda (x) true)) (lambda (v) true))")
    with pytest.raises(NestedQueryUnsupported):
        MHChain(p, random.Random(0))


# backends ---------------------------------------------------------------------


def test_backends_agree_on_enumeration():
    results = {}
    for name, kernel in _backend.available().items():
        rt = Runtime(0, backend=kernel)
        results[name] = enumerate_query(fixture_problem(rt, "sprinkler")).as_dict()
    first = next(iter(results.values()))
    for r in results.values():
        assert r == pytest.approx(first, abs=1e-15)


def test_backends_agree_on_rejection():
    freqs = {}
    for name, kernel in _backend.available().items():
        rt = Runtime(0, backend=kernel)
        xs = rejection_query(fixture_problem(rt, "sprinkler"), 20000, random.Random(9))
        freqs[name] = frequencies(xs)
    values = list(freqs.values())
    assert all(tv(values[0], f) <= 0.02 for f in values[1:])


def test_mh_weight_of_a_step_is_one(rt):
    """Exact transition rows are stochastic."""
    from steeple.inference import exact_transition_row

    chain = MHChain(fixture_problem(rt, "two-flips"), random.Random(1))
    for _ in range(20):
        row = exact_transition_row(chain)
        assert math.fsum(row.values()) == pytest.approx(1.0, abs=1e-12)
        chain.step()
