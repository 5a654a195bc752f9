"""Computation traces: addressed random choices and their log-probabilities.

A context decides how each random choice is made.  ``Context`` just samples,
``TraceContext`` also records every choice, and ``ReplayContext`` re-runs a
program reusing the choices of an earlier trace wherever the same address is
reached by the same elementary random procedure.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable

from .erp import NEG_INF, Erp
from .values import ChurchError, to_str


class TraceError(RuntimeError):
    """Internal invariant violation, e.g. two choices at one address."""


class UnsupportedModel(Exception):
    """The model needs an exact distribution that cannot be computed.

    Not a Church error: it reports a limitation of the chosen inference
    method, so it must not be mistaken for a rejected sample.
    """


class NestedQueryUnsupported(UnsupportedModel):
    pass


class OffSupport(ChurchError):
    """A replayed value has probability zero under its new parameters."""


@dataclass(slots=True)
class ChoiceRecord:
    address: Any
    erp: Erp
    params: tuple
    value: Any
    logp: float

    @property
    def erp_name(self) -> str:
        return self.erp.name


class Context:
    """State owned by one evaluation: rng stream, memo tables, gensym labels."""

    def __init__(self, runtime, rng: random.Random, memo: dict | None = None):
        self.runtime = runtime
        self.kernel = runtime.kernel
        self.rng = rng
        self.memo = {} if memo is None else memo

    def choose(self, addr, erp: Erp, params):
        return erp.sample(params, self.rng)

    def nested_query(self, problem, addr, depth):
        from .inference import rejection_sample

        value, _ = rejection_sample(
            problem, self.rng, root=(addr, "query"), depth=depth, base_memo=self.memo
        )
        return value


class TraceContext(Context):
    """Records every random choice with its log-probability."""

    def __init__(self, runtime, rng, memo=None):
        super().__init__(runtime, rng, memo)
        self.choices: dict = {}
        self.logp = 0.0

    def record(self, addr, erp, params, value, logp):
        if addr in self.choices:
            raise TraceError(f"duplicate choice address {format_address(addr)}")
        self.choices[addr] = ChoiceRecord(addr, erp, params, value, logp)
        self.logp += logp

    def choose(self, addr, erp, params):
        value = erp.sample(params, self.rng)
        self.record(addr, erp, params, value, erp.score(params, value))
        return value

    def nested_query(self, problem, addr, depth):
        """An inner query becomes one recorded choice from its exact answer."""
        from .inference import query_distribution

        try:
            erp = query_distribution(problem, self.memo, (addr, "query"), depth)
        except UnsupportedModel as exc:
            raise NestedQueryUnsupported(
                f"a nested query must be enumerable to be traced: {exc}"
            ) from None
        return self.choose(addr, erp, ())


def _same_params(a, b) -> bool:
    """Equal and of identical types throughout (so ``True`` never matches ``1``)."""
    if a is b:
        return True
    if type(a) is not type(b):
        return False
    if type(a) is tuple:
        return len(a) == len(b) and all(_same_params(x, y) for x, y in zip(a, b))
    return a == b


def record_choice(ctx: TraceContext, address, erp, params, value, logp) -> None:
    ctx.record(address, erp, params, value, logp)


class ReplayContext(TraceContext):
    """Re-runs a program against the choices of an earlier trace.

    ``constraints`` maps addresses to earlier records; one address may be
    forced to a proposed value.  A constrained choice is reused (and
    rescored under the current parameters) when the same ERP reaches its
    address; anything else is sampled fresh.  The forced choice counts as both
    stale (old value) and fresh (new value).
    """

    def __init__(self, runtime, rng, constraints, forced=None, allow_fresh=True, memo=None):
        super().__init__(runtime, rng, memo)
        self.constraints = constraints
        self.forced_addr, self.forced_value = forced if forced else (None, None)
        self.allow_fresh = allow_fresh
        self.fresh: list[ChoiceRecord] = []
        self.reused: dict = {}

    def choose(self, addr, erp, params):
        old = self.constraints.get(addr)
        if old is not None and old.erp.name == erp.name:
            if self.forced_addr is not None and addr == self.forced_addr:
                value = self.forced_value
                logp = erp.score(params, value)
                self.record(addr, erp, params, value, logp)
                self.fresh.append(self.choices[addr])
                return value
            value = old.value
            if _same_params(params, old.params):
                if addr in self.choices:
                    raise TraceError(f"duplicate choice address {format_address(addr)}")
                self.choices[addr] = old
                self.logp += old.logp
                self.reused[addr] = old
                return value
            logp = erp.score(params, value)
            if logp == NEG_INF:
                raise OffSupport(f"{erp.name} cannot return {to_str(value)} here")
            self.record(addr, erp, params, value, logp)
            self.reused[addr] = old
            return value
        if not self.allow_fresh:
            raise TraceError(f"replay needed a fresh choice at {format_address(addr)}")
        value = erp.sample(params, self.rng)
        self.record(addr, erp, params, value, erp.score(params, value))
        self.fresh.append(self.choices[addr])
        return value

    def stale(self) -> list[ChoiceRecord]:
        return [r for a, r in self.constraints.items() if a not in self.reused]


@dataclass
class ComputationTrace:
    """One evaluation: its choices, its result and its total log-probability.

    ``log_weight`` is the log-probability that the predicate holds when the
    predicate's own randomness is summed out (0 when it is part of the trace).
    """

    choices: dict
    result: Any
    logp: float
    log_weight: float = 0.0
    memo: dict = field(default_factory=dict)
    accepted: bool = True
    error: str | None = None

    @property
    def score(self) -> float:
        return self.logp + self.log_weight

    def dump(self) -> str:
        return dump_choices(self.choices)


def total_log_probability(trace: ComputationTrace) -> float:
    return math.fsum(r.logp for r in trace.choices.values())


def rescore(trace: ComputationTrace) -> float:
    """Recompute every record's score from its stored (erp, params, value)."""
    return math.fsum(r.erp.score(r.params, r.value) for r in trace.choices.values())


def _finish(ctx: TraceContext, run: Callable[[TraceContext], Any]) -> ComputationTrace:
    try:
        out = run(ctx)
    except ChurchError as exc:
        return ComputationTrace(
            ctx.choices, None, ctx.logp, NEG_INF, ctx.memo, False, str(exc)
        )
    if isinstance(out, tuple):
        result, log_weight = out
    else:
        result, log_weight = out, 0.0
    accepted = log_weight > NEG_INF and ctx.logp > NEG_INF
    return ComputationTrace(ctx.choices, result, ctx.logp, log_weight, ctx.memo, accepted)


def run_traced(
    program: Callable, runtime, rng: random.Random, memo=None
) -> ComputationTrace:
    """Evaluate ``program(ctx)`` once, recording every random choice.

    ``program`` returns either a value or ``(value, log_weight)``.
    """
    return _finish(TraceContext(runtime, rng, memo), program)


def replay(
    program: Callable,
    runtime,
    constraints: dict,
    rng: random.Random,
    forced=None,
    allow_fresh=True,
    memo=None,
):
    """Re-run ``program`` reusing ``constraints`` (address -> ChoiceRecord).

    Returns ``(trace, ctx)``; the context carries the fresh and stale sets.
    """
    ctx = ReplayContext(runtime, rng, constraints, forced, allow_fresh, memo)
    return _finish(ctx, program), ctx


def format_address(addr) -> str:
    parts = []
    while isinstance(addr, tuple) and len(addr) == 2 and isinstance(addr[0], (tuple, str)):
        addr, comp = addr
        parts.append(_format_component(comp))
    parts.append(_format_component(addr))
    return "/".join(reversed(parts))


def _format_component(c) -> str:
    if isinstance(c, tuple):
        return "(" + " ".join(_format_component(x) for x in c) + ")"
    return str(c)


def dump_choices(choices: dict) -> str:
    """One line per choice: address, erp, params, value, logp; sorted by address."""
    lines = []
    for rec in choices.values():
        params = " ".join(_format_param(p) for p in rec.params)
        lines.append(
            f"{format_address(rec.address)}\t{rec.erp.name}\t[{params}]\t"
            f"{to_str(rec.value)}\t{rec.logp!r}"
        )
    lines.sort()
    return "\n".join(lines)


def _format_param(p) -> str:
    if isinstance(p, tuple):
        return "(" + " ".join(_format_param(x) for x in p) + ")"
    return to_str(p)
