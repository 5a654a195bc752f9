"""Implementations of ``query``: rejection, exact enumeration, and trace MH.

A :class:`QueryProblem` packages the query expression, the predicate and the
environment.  Running it in a context builds the lexicon (for ``lex-query``),
evaluates the expression, then the predicate, all in one random world.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable

from .erp import CONTINUOUS, NEG_INF, DiscreteDistribution
from .memo import snapshot
from .trace import (
    ComputationTrace,
    Context,
    TraceError,
    UnsupportedModel,
    replay,
    run_traced,
)
from .values import (
    ERROR,
    ChurchError,
    Pair,
    Symbol,
    is_procedure,
    to_pylist,
    to_str,
    value_key,
    values_equal,
)

DEFAULT_BUDGET = 10**6
DEFAULT_MAX_CHOICES = 1000
DEFAULT_MIN_PATH_PROB = 1e-9


class InferenceBudgetError(ChurchError):
    """No accepted sample within the attempt budget."""

    def __init__(self, attempts, accepted=0, what="rejection query"):
        self.attempts = attempts
        self.accepted = accepted
        rate = accepted / attempts if attempts else 0.0
        super().__init__(
            f"{what}: no accepted sample after {attempts} attempts "
            f"(observed acceptance rate {rate:.3g})"
        )


class InadmissibleConditioning(ChurchError):
    """The predicate holds with probability zero."""


# Problems --------------------------------------------------------------------


@dataclass
class QueryProblem:
    """A conditional-sampling problem.

    ``predicate`` is a procedure applied to the query value, an expression
    evaluated in the lexicon environment (``predicate_is_expression``), or
    ``None`` for an unconditioned query.
    """

    runtime: Any
    expression: Any
    predicate: Any = None
    env: Any = None
    lexicon: list = field(default_factory=list)
    predicate_is_expression: bool = False

    def __post_init__(self):
        rt = self.runtime
        if self.env is None:
            self.env = rt.global_env
        self._expr = rt.analyzer.compile(self.expression)
        self._lexicon = [(name, rt.analyzer.compile(d)) for name, d in self.lexicon]
        self._pred = (
            rt.analyzer.compile(self.predicate) if self.predicate_is_expression else None
        )

    def world(self, ctx, root, depth=0):
        """The environment in which expression and predicate run."""
        if not self._lexicon:
            return self.env
        k = ctx.kernel
        env = k.Environment({}, self.env)
        # Later entries may refer to earlier ones and vice versa (letrec*).
        for i, (name, node) in enumerate(self._lexicon):
            env.define(name, k.evaluate(node, env, (root, ("lex", i)), ctx, depth))
        return env

    def value(self, ctx, env, root, depth=0):
        return ctx.kernel.evaluate(self._expr, env, (root, "expr"), ctx, depth)

    def check(self, ctx, env, value, root, depth=0):
        """The predicate's value for ``value`` (``True`` when unconditioned)."""
        if self._pred is not None:
            return ctx.kernel.evaluate(self._pred, env, (root, "pred"), ctx, depth)
        if self.predicate is None:
            return True
        return ctx.kernel.apply_procedure(self.predicate, [value], (root, "pred"), ctx, depth)

    def run(self, ctx, root, depth=0, collapse=False):
        """Evaluate once: ``(value, log_weight)``.

        Without collapsing the weight is 0 or -inf by the sampled predicate;
        with it, the log-probability that the predicate holds.
        """
        env = self.world(ctx, root, depth)
        value = self.value(ctx, env, root, depth)
        if collapse:
            return value, predicate_log_probability(self, ctx, env, value, root, depth)
        ok = self.check(ctx, env, value, root, depth)
        return value, (0.0 if ok is not False else NEG_INF)

    def joint(self, ctx, root, depth=0):
        """``(value, predicate-value)`` for joint enumeration."""
        env = self.world(ctx, root, depth)
        value = self.value(ctx, env, root, depth)
        return value, self.check(ctx, env, value, root, depth)


def make_query_problem(runtime, form, args, env=None) -> QueryProblem:
    """Build a problem from the evaluated arguments of a query form.

    ``(query 'expr predicate-procedure [env])`` or
    ``(lex-query '((name definition) ...) 'expr 'predicate-expr)``.
    """
    if form == "query":
        if len(args) not in (2, 3):
            raise ChurchError("query takes an expression, a predicate and an optional environment")
        if not is_procedure(args[1]):
            raise ChurchError("query predicate must be a procedure")
        target = args[2] if len(args) == 3 else env
        return QueryProblem(runtime, args[0], args[1], target)
    if len(args) != 3:
        raise ChurchError("lex-query takes a lexicon, an expression and a predicate expression")
    lexicon = []
    for entry in to_pylist(args[0]):
        parts = to_pylist(entry) if type(entry) is Pair else None
        if not parts or len(parts) != 2 or type(parts[0]) is not Symbol:
            raise ChurchError(f"malformed lexicon entry {to_str(entry)}")
        lexicon.append((parts[0], parts[1]))
    return QueryProblem(runtime, args[1], args[2], env, lexicon, True)


# Rejection -------------------------------------------------------------------


def rejection_sample(
    problem: QueryProblem,
    rng: random.Random,
    root=("query",),
    depth=0,
    budget=DEFAULT_BUDGET,
    collapse=False,
    base_memo=None,
):
    """One sample from the conditional: ``(value, attempts)``.

    Every attempt is a full evaluation with its own memo tables, seeded from
    ``base_memo`` (the memo state of the surrounding world).
    """
    runtime = problem.runtime
    for attempt in range(1, budget + 1):
        ctx = Context(runtime, rng, snapshot(base_memo) if base_memo else None)
        try:
            value, lw = problem.run(ctx, root, depth, collapse)
        except ChurchError:
            continue
        if lw == 0.0 or (lw > NEG_INF and rng.random() < math.exp(lw)):
            return value, attempt
    raise InferenceBudgetError(budget)


def rejection_samples(problem, n, rng=None, **kw):
    """Iterator of ``(value, attempts)`` for ``n`` independent samples."""
    rng = rng or problem.runtime.rng
    for _ in range(n):
        yield rejection_sample(problem, rng, **kw)


def rejection_query(problem, n, rng=None, **kw) -> list:
    return [v for v, _ in rejection_samples(problem, n, rng, **kw)]


# Enumeration -----------------------------------------------------------------


class _Branch(Exception):
    def __init__(self, ctx, support):
        self.ctx = ctx
        self.support = support


class _Truncated(Exception):
    def __init__(self, ctx):
        self.ctx = ctx


class EnumContext(Context):
    """Replays a fixed prefix of choice values, then stops at the next choice."""

    def __init__(self, runtime, prefix, max_choices, limits, memo=None):
        super().__init__(runtime, runtime.rng, memo)
        self.prefix = prefix
        self.index = 0
        self.max_choices = max_choices
        self.limits = limits

    def choose(self, addr, erp, params):
        i = self.index
        if i < len(self.prefix):
            self.index = i + 1
            return self.prefix[i]
        if i >= self.max_choices:
            raise _Truncated(self)
        if erp.support_kind == CONTINUOUS:
            raise UnsupportedModel(f"enumeration cannot branch on continuous {erp.name}")
        raise _Branch(self, erp.support(params))

    def nested_query(self, problem, addr, depth):
        erp = query_distribution(problem, self.memo, (addr, "query"), depth, *self.limits)
        return self.choose(addr, erp, ())


def query_distribution(
    problem,
    base_memo,
    root,
    depth=0,
    max_choices=DEFAULT_MAX_CHOICES,
    min_path_prob=DEFAULT_MIN_PATH_PROB,
) -> DiscreteDistribution:
    """The exact answer of a query as a finite elementary random procedure."""
    inner = enumerate_query(problem, max_choices, min_path_prob, base_memo, root, depth)
    table = [(v, math.log(p)) for v, p in inner.items() if p > 0.0]
    return DiscreteDistribution("query", table)


def _error_key():
    return ("error",)


def _key(v):
    return _error_key() if v is ERROR else value_key(v)


@dataclass
class EnumerationResult:
    """Finite map value -> probability, plus the mass of truncated paths."""

    table: dict
    residual: float
    leaf_count: int

    def probability(self, value) -> float:
        entry = self.table.get(_key(value))
        return entry[1] if entry else 0.0

    def items(self) -> list:
        """``(value, probability)`` pairs sorted by printed value."""
        return sorted(self.table.values(), key=lambda e: to_str(e[0]))

    def as_dict(self) -> dict:
        return {to_str(v): p for v, p in self.items()}

    @property
    def total(self) -> float:
        return math.fsum(p for _, p in self.table.values()) + self.residual


def _logsumexp(xs) -> float:
    m = max(xs)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(math.fsum(math.exp(x - m) for x in xs))


def enumerate_program(
    program: Callable,
    runtime,
    max_choices=DEFAULT_MAX_CHOICES,
    min_path_prob=DEFAULT_MIN_PATH_PROB,
    base_memo=None,
):
    """Depth-first enumeration of every execution path of ``program(ctx)``.

    Returns ``(leaves, residual_logs, leaf_count)`` where ``leaves`` maps a
    key to ``[value, [path log-probs]]``.  A path is truncated (its mass goes
    to the residual) when it needs more than ``max_choices`` choices or
    when its probability falls to ``min_path_prob`` or below.  Paths that
    raise a Church error are collected under ``ERROR``.
    """
    log_min = math.log(min_path_prob) if min_path_prob > 0.0 else NEG_INF
    limits = (max_choices, min_path_prob)
    leaves: dict = {}
    residual: list = []
    stack = [((), 0.0)]
    count = 0
    while stack:
        prefix, lp = stack.pop()
        ctx = EnumContext(
            runtime, prefix, max_choices, limits, snapshot(base_memo) if base_memo else None
        )
        try:
            value = program(ctx)
        except _Branch as b:
            if b.ctx is not ctx:
                raise
            total = math.fsum(math.exp(l) for _, l in b.support)
            if total < 1.0 - 1e-12:
                residual.append(lp + math.log1p(-total))
            children = []
            for v, l in b.support:
                cl = lp + l
                if cl <= log_min:
                    residual.append(cl)
                else:
                    children.append((prefix + (v,), cl))
            stack.extend(reversed(children))
            continue
        except _Truncated as t:
            if t.ctx is not ctx:
                raise
            residual.append(lp)
            continue
        except ChurchError:
            value = ERROR
        count += 1
        entry = leaves.get(_key(value))
        if entry is None:
            leaves[_key(value)] = [value, [lp]]
        else:
            entry[1].append(lp)
    return leaves, residual, count


def enumerate_expression(
    expr,
    runtime,
    env=None,
    max_choices=DEFAULT_MAX_CHOICES,
    min_path_prob=DEFAULT_MIN_PATH_PROB,
) -> EnumerationResult:
    """Exact distribution of ``expr`` (a datum) up to the truncation limits."""
    node = runtime.analyzer.compile(expr)
    env = runtime.global_env if env is None else env
    base = runtime.program_ctx.memo

    def program(ctx):
        return ctx.kernel.evaluate(node, env, ("enumerate",), ctx, 0)

    leaves, residual, count = enumerate_program(
        program, runtime, max_choices, min_path_prob, base
    )
    table = {k: (v, math.exp(_logsumexp(lps))) for k, (v, lps) in leaves.items()}
    res = math.exp(_logsumexp(residual)) if residual else 0.0
    return EnumerationResult(table, res, count)


def enumerate_query(
    problem: QueryProblem,
    max_choices=DEFAULT_MAX_CHOICES,
    min_path_prob=DEFAULT_MIN_PATH_PROB,
    base_memo=None,
    root=("query",),
    depth=0,
) -> EnumerationResult:
    """Conditional distribution of the query value given the predicate.

    Joint enumeration over expression and predicate; paths whose predicate
    is false or which raise are dropped.  Accepted mass and residual are
    renormalized together, so ``total`` is 1 and the residual bounds the
    error from truncation.
    """
    if base_memo is None:
        base_memo = problem.runtime.program_ctx.memo

    def program(ctx):
        return problem.joint(ctx, root, depth)

    leaves, residual, count = enumerate_program(
        program, problem.runtime, max_choices, min_path_prob, base_memo
    )
    accepted: dict = {}
    for _, (pair, lps) in leaves.items():
        if pair is ERROR or pair[1] is False:
            continue
        value = pair[0]
        k = _key(value)
        if k in accepted:
            accepted[k][1].extend(lps)
        else:
            accepted[k] = [value, list(lps)]
    if not accepted:
        raise InadmissibleConditioning("the query predicate holds with probability zero")
    log_res = _logsumexp(residual) if residual else NEG_INF
    log_z = _logsumexp([_logsumexp(lps) for _, lps in accepted.values()] + [log_res])
    table = {
        k: (v, math.exp(_logsumexp(lps) - log_z)) for k, (v, lps) in accepted.items()
    }
    res = math.exp(log_res - log_z) if residual else 0.0
    return EnumerationResult(table, res, count)


def condition(joint: EnumerationResult) -> EnumerationResult:
    """Exact conditioning of an enumerated ``(value . predicate)`` distribution."""
    kept: dict = {}
    for v, p in joint.table.values():
        if v is ERROR or type(v) is not Pair or v.rest is False:
            continue
        k = _key(v.first)
        prev = kept.get(k)
        kept[k] = (v.first, (prev[1] if prev else 0.0) + p)
    z = math.fsum(p for _, p in kept.values()) + joint.residual
    if not kept:
        raise InadmissibleConditioning("the query predicate holds with probability zero")
    table = {k: (v, p / z) for k, (v, p) in kept.items()}
    return EnumerationResult(table, joint.residual / z, joint.leaf_count)


def predicate_log_probability(problem, ctx, env, value, root, depth=0) -> float:
    """log P(predicate holds | world so far), by enumerating the predicate.

    The predicate runs from a copy of the current memo tables on every path,
    without any probability cutoff.  Continuous randomness inside the
    predicate raises :class:`UnsupportedModel`.
    """

    def program(ectx):
        return problem.check(ectx, env, value, root, depth)

    leaves, _, _ = enumerate_program(
        program, problem.runtime, DEFAULT_MAX_CHOICES, 0.0, ctx.memo
    )
    logs = [lp for _, (v, lps) in leaves.items() if v is not ERROR and v is not False for lp in lps]
    return _logsumexp(logs) if logs else NEG_INF


# Metropolis-Hastings -----------------------------------------------------------


class MHStepMismatch(AssertionError):
    """Debug-mode bookkeeping check failed."""


class MHChain:
    """Single-site Metropolis-Hastings over computation traces.

    Each step picks one recorded choice uniformly, resamples it from its
    prior given its recorded parameters, and replays the program reusing
    every other choice whose address is reached again by the same ERP.
    The proposal is accepted with probability ``min(1, R)`` where

        log R = (logp' + w') - (logp + w) + log|C| - log|C'| + stale - fresh

    ``w`` is the predicate log-weight (0 unless collapsed), ``C`` the choice
    sets, ``fresh`` the log-probability of newly sampled values (the
    proposed value included) and ``stale`` that of dropped values (the old
    value at the proposed site included).
    """

    def __init__(
        self,
        problem: QueryProblem,
        rng: random.Random | None = None,
        collapse=False,
        debug=False,
        init_budget=DEFAULT_BUDGET,
        root=("query",),
        base_memo=None,
    ):
        self.problem = problem
        self.rng = rng or problem.runtime.rng
        self.collapse = collapse
        self.debug = debug
        self.root = root
        self.base_memo = problem.runtime.program_ctx.memo if base_memo is None else base_memo
        self.proposals = 0
        self.accepts = 0
        self.trace = self._initialize(init_budget)

    def _program(self, ctx):
        return self.problem.run(ctx, self.root, 0, self.collapse)

    def _memo(self):
        return snapshot(self.base_memo) if self.base_memo else None

    def _initialize(self, budget) -> ComputationTrace:
        runtime = self.problem.runtime
        for _ in range(budget):
            trace = run_traced(self._program, runtime, self.rng, self._memo())
            if trace.accepted:
                return trace
        raise InferenceBudgetError(budget, what="mh initialization")

    @property
    def value(self):
        return self.trace.result

    @property
    def acceptance_rate(self) -> float:
        return self.accepts / self.proposals if self.proposals else 0.0

    def propose(self, addr, new_value, rng=None, allow_fresh=True):
        """Replay with ``addr`` forced to ``new_value``: ``(trace', log R)``."""
        cur = self.trace
        new, rctx = replay(
            self._program,
            self.problem.runtime,
            cur.choices,
            rng or self.rng,
            forced=(addr, new_value),
            allow_fresh=allow_fresh,
            memo=self._memo(),
        )
        if not new.accepted:
            return new, NEG_INF
        fresh = math.fsum(r.logp for r in rctx.fresh)
        stale_records = rctx.stale()
        stale = math.fsum(r.logp for r in stale_records)
        if self.debug:
            self._check(cur, new, rctx, fresh, stale)
        log_r = (
            new.score
            - cur.score
            + math.log(len(cur.choices))
            - math.log(len(new.choices))
            + stale
            - fresh
        )
        return new, log_r

    @staticmethod
    def _check(cur, new, rctx, fresh, stale):
        rescored = math.fsum(
            new.choices[a].logp - old.logp for a, old in rctx.reused.items()
        )
        lhs = new.logp - cur.logp
        rhs = fresh - stale + rescored
        if not (lhs == rhs or abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))):
            raise MHStepMismatch(f"logp delta {lhs} != fresh - stale + rescored {rhs}")

    def step(self) -> bool:
        """One transition; returns whether the proposal was accepted."""
        choices = self.trace.choices
        if not choices:
            return False
        self.proposals += 1
        records = list(choices.values())
        rec = records[int(self.rng.random() * len(records))]
        new_value = rec.erp.sample(rec.params, self.rng)
        if type(new_value) is type(rec.value) and values_equal(new_value, rec.value):
            # Replay would rebuild the same trace with log R = 0: a certain accept.
            self.accepts += 1
            return True
        new, log_r = self.propose(rec.address, new_value)
        if log_r == NEG_INF:
            return False
        if log_r >= 0.0 or self.rng.random() < math.exp(log_r):
            self.trace = new
            self.accepts += 1
            return True
        return False

    def samples(self, n, burn_in=0, lag=1):
        """Iterator of ``n`` values: every ``lag``-th state after ``burn_in`` steps."""
        if lag < 1:
            raise ValueError("lag must be at least 1")
        for _ in range(burn_in):
            self.step()
        for _ in range(n):
            for _ in range(lag):
                self.step()
            yield self.trace.result


def mh_query(
    problem,
    n,
    burn_in=None,
    lag=1,
    rng=None,
    collapse=False,
    debug=False,
    init_budget=DEFAULT_BUDGET,
) -> list:
    """``n`` values from a chain run for ``burn_in + n * lag`` steps."""
    chain = MHChain(problem, rng, collapse, debug, init_budget)
    if burn_in is None:
        burn_in = n // 10
    return list(chain.samples(n, burn_in, lag))


def mh_step(chain: MHChain) -> ComputationTrace:
    chain.step()
    return chain.trace


def exact_transition_row(chain: MHChain) -> dict:
    """Exact one-step transition probabilities from the chain's current trace.

    Keys are printed result values.  Every site is proposed with probability
    ``1/|C|`` and every support value of its ERP with its prior probability.
    Requires finite-discrete choices and proposals that need no fresh
    choices.
    """
    cur = chain.trace
    records = list(cur.choices.values())
    here = to_str(cur.result)
    row: dict = {}
    stay = []
    for rec in records:
        for v, lq in rec.erp.support(rec.params):
            q = math.exp(lq) / len(records)
            try:
                new, log_r = chain.propose(rec.address, v, allow_fresh=False)
            except TraceError as exc:
                raise UnsupportedModel(str(exc)) from None
            a = 1.0 if log_r >= 0.0 else math.exp(log_r)
            key = to_str(new.result) if new.accepted else here
            row.setdefault(key, []).append(q * a)
            stay.append(q * (1.0 - a))
    out = {k: math.fsum(ps) for k, ps in row.items()}
    out[here] = out.get(here, 0.0) + math.fsum(stay)
    return out


def lex_query(runtime, lexicon, expression, predicate, env=None) -> QueryProblem:
    """Problem for ``(lex-query lexicon 'expr 'predicate)`` from Python data."""
    return QueryProblem(runtime, expression, predicate, env, list(lexicon), True)


def problem_from_form(runtime, datum, env=None) -> QueryProblem:
    """Problem for a top-level ``(query ...)`` or ``(lex-query ...)`` form.

    The arguments are evaluated in ``env`` (default: the global environment).
    """
    env = runtime.global_env if env is None else env
    items = to_pylist(datum)
    form = str(items[0])
    args = [runtime.evaluate_raising(a, env) for a in items[1:]]
    return make_query_problem(runtime, form, args, env)
