"""Runtime: global environment, primitives, and top-level evaluation.

Source data are desugared by the reader and compiled by :class:`Analyzer` into
the node classes of the active evaluator kernel.  Program-facing operations
never raise; failures surface as the ``ERROR`` value.
"""

from __future__ import annotations

import math
import random
import sys
from functools import reduce

from . import _backend
from . import values as _values
from .erp import BUILTIN_ERPS, gensym_primitive
from .memo import dpmem_primitive, mem_primitive
from .reader import desugar, read
from .trace import Context
from .values import (
    ERROR,
    NIL,
    Char,
    ChurchError,
    ContextPrimitive,
    Gensym,
    Pair,
    Primitive,
    Symbol,
    is_number,
    is_procedure,
    make_list,
    sym,
    to_pylist,
    to_str,
    value_key,
    values_equal,
)

# Deep Church recursion nests several Python frames per Church call.
if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)

_QUOTE, _LAMBDA, _IF, _DEFINE = sym("quote"), sym("lambda"), sym("if"), sym("define")


class Analyzer:
    """Compiles desugared Church data into kernel nodes.

    Every application and lambda gets a site number unique within the
    runtime.  Compiled forms are cached by structure, so evaluating the same
    quoted expression twice yields the same sites and therefore the same
    choice addresses.
    """

    def __init__(self, kernel):
        self.kernel = kernel
        self.next_site = 0
        self.cache: dict = {}

    def compile(self, datum):
        """Desugar and analyze ``datum``, memoized on its structure."""
        key = value_key(datum)
        node = self.cache.get(key)
        if node is None:
            node = self.cache[key] = self.analyze(desugar(datum))
        return node

    def _site(self):
        self.next_site += 1
        return self.next_site

    def analyze(self, d):
        k = self.kernel
        t = type(d)
        if t is Symbol:
            return k.Var(d)
        if t is not Pair:
            return k.Const(d)
        head = d.first
        if head is _QUOTE:
            return k.Const(d.rest.first)
        if head is _IF:
            test, then, else_ = to_pylist(d.rest)
            return k.If(self.analyze(test), self.analyze(then), self.analyze(else_))
        if head is _LAMBDA:
            formals, body = to_pylist(d.rest)
            params = []
            while type(formals) is Pair:
                params.append(formals.first)
                formals = formals.rest
            rest = None if formals is NIL else formals
            site = self._site()
            return k.Lambda(tuple(params), rest, self.analyze(body), site)
        if head is _DEFINE:
            name, expr = to_pylist(d.rest)
            return k.Define(name, self.analyze(expr))
        items = to_pylist(d)
        op = self.analyze(items[0])
        args = tuple(self.analyze(a) for a in items[1:])
        return k.App(op, args, self._site())


# Primitives ------------------------------------------------------------------


def _num(x, who):
    if not is_number(x):
        raise ChurchError(f"{who}: expected a number, got {to_str(x)}")
    return x


def _nums(args, who):
    for a in args:
        if not is_number(a):
            raise ChurchError(f"{who}: expected a number, got {to_str(a)}")
    return args


def _add(*a):
    return sum(_nums(a, "+"))


def _mul(*a):
    return reduce(lambda x, y: x * y, _nums(a, "*"), 1)


def _sub(*a):
    _nums(a, "-")
    if not a:
        raise ChurchError("-: needs at least one argument")
    if len(a) == 1:
        return -a[0]
    return reduce(lambda x, y: x - y, a)


def _div(*a):
    _nums(a, "/")
    if not a:
        raise ChurchError("/: needs at least one argument")
    if len(a) == 1:
        a = (1,) + a
    out = float(a[0])
    for y in a[1:]:
        if y == 0:
            raise ChurchError("/: division by zero")
        out /= y
    return out


def _compare(name, op):
    def fn(*a):
        _nums(a, name)
        return all(op(x, y) for x, y in zip(a, a[1:]))

    return fn


def _equal(*a):
    return all(values_equal(x, y) for x, y in zip(a, a[1:]))


def _first(p):
    if type(p) is not Pair:
        raise ChurchError(f"first of a non-pair {to_str(p)}")
    return p.first


def _rest(p):
    if type(p) is not Pair:
        raise ChurchError(f"rest of a non-pair {to_str(p)}")
    return p.rest


def _last(p):
    # The final element of a proper list; the final cdr of an improper one.
    if type(p) is not Pair:
        raise ChurchError(f"last of a non-pair {to_str(p)}")
    while type(p.rest) is Pair:
        p = p.rest
    return p.first if p.rest is NIL else p.rest


def _list_ref(lst, k):
    items = to_pylist(lst)
    if type(k) is not int or not 0 <= k < len(items):
        raise ChurchError("list-ref index out of range")
    return items[k]


def _append(*lists):
    if not lists:
        return NIL
    out = lists[-1]
    for lst in reversed(lists[:-1]):
        out = make_list(to_pylist(lst), out)
    return out


def _member(x, lst):
    p = lst
    while type(p) is Pair:
        if values_equal(x, p.first):
            return p
        p = p.rest
    return False


def _sum(lst):
    items = _nums(to_pylist(lst), "sum")
    return math.fsum(items) if any(type(x) is float for x in items) else sum(items)


def _log(x):
    _num(x, "log")
    if x <= 0:
        raise ChurchError("log of a non-positive number")
    return math.log(x)


def _sqrt(x):
    _num(x, "sqrt")
    if x < 0:
        raise ChurchError("sqrt of a negative number")
    return math.sqrt(x)


def _error(*args):
    raise ChurchError(" ".join(to_str(a) for a in args) or "error")


def _is_list(v):
    while type(v) is Pair:
        v = v.rest
    return v is NIL


_PRIMITIVES = {
    "+": _add,
    "-": _sub,
    "*": _mul,
    "/": _div,
    "<": _compare("<", lambda x, y: x < y),
    ">": _compare(">", lambda x, y: x > y),
    "<=": _compare("<=", lambda x, y: x <= y),
    ">=": _compare(">=", lambda x, y: x >= y),
    "=": _equal,
    "eq?": _equal,
    "equal?": _equal,
    "not": lambda x: x is False,
    "and": lambda *a: a[-1] if a and all(x is not False for x in a) else (not a),
    "or": lambda *a: next((x for x in a if x is not False), False),
    "pair": lambda a, b: Pair(a, b),
    "cons": lambda a, b: Pair(a, b),
    "first": _first,
    "car": _first,
    "rest": _rest,
    "cdr": _rest,
    "second": lambda p: _first(_rest(p)),
    "third": lambda p: _first(_rest(_rest(p))),
    "last": _last,
    "list": lambda *a: make_list(list(a)),
    "null?": lambda v: v is NIL,
    "pair?": lambda v: type(v) is Pair,
    "list?": _is_list,
    "length": lambda lst: len(to_pylist(lst)),
    "sum": _sum,
    "append": _append,
    "reverse": lambda lst: make_list(to_pylist(lst)[::-1]),
    "list-ref": _list_ref,
    "member": _member,
    "number?": is_number,
    "integer?": lambda v: type(v) is int,
    "boolean?": lambda v: type(v) is bool,
    "symbol?": lambda v: type(v) is Symbol,
    "char?": lambda v: type(v) is Char,
    "procedure?": is_procedure,
    "gensym?": lambda v: type(v) is Gensym,
    "exp": lambda x: math.exp(_num(x, "exp")),
    "log": _log,
    "sqrt": _sqrt,
    "abs": lambda x: abs(_num(x, "abs")),
    "min": lambda *a: min(_nums(a, "min")),
    "max": lambda *a: max(_nums(a, "max")),
    "expt": lambda x, y: _num(x, "expt") ** _num(y, "expt"),
    "square": lambda x: _num(x, "square") * x,
    "floor": lambda x: math.floor(_num(x, "floor")),
    "error": _error,
}


def _apply(args, addr, ctx, env, depth):
    if len(args) != 2:
        raise ChurchError("apply takes a procedure and an argument list")
    return ctx.kernel.apply_procedure(args[0], to_pylist(args[1]), addr, ctx, depth)


def _eval(args, addr, ctx, env, depth):
    if len(args) not in (1, 2):
        raise ChurchError("eval takes an expression and an optional environment")
    target = args[1] if len(args) == 2 else (env or ctx.runtime.global_env)
    if not isinstance(target, _values.environment_types):
        raise ChurchError("eval needs an environment")
    node = ctx.runtime.analyzer.compile(args[0])
    return ctx.kernel.evaluate(node, target, addr, ctx, depth)


def _current_environment(args, addr, ctx, env, depth):
    if args:
        raise ChurchError("get-current-environment takes no arguments")
    return env or ctx.runtime.global_env


def _query(args, addr, ctx, env, depth):
    from .inference import make_query_problem

    problem = make_query_problem(ctx.runtime, "query", args, env)
    return ctx.nested_query(problem, addr, depth)


def _lex_query(args, addr, ctx, env, depth):
    from .inference import make_query_problem

    problem = make_query_problem(ctx.runtime, "lex-query", args, env)
    return ctx.nested_query(problem, addr, depth)


_CONTEXT_PRIMITIVES = {
    "apply": _apply,
    "eval": _eval,
    "get-current-environment": _current_environment,
    "mem": mem_primitive,
    "DPmem": dpmem_primitive,
    "gensym": gensym_primitive,
    "query": _query,
    "lex-query": _lex_query,
}

QUERY_FORMS = ("query", "lex-query")


def primitive_frame() -> dict:
    frame = {sym(n): Primitive(n, fn) for n, fn in _PRIMITIVES.items()}
    frame.update({sym(n): ContextPrimitive(n, fn) for n, fn in _CONTEXT_PRIMITIVES.items()})
    frame.update({sym(n): erp for n, erp in BUILTIN_ERPS.items()})
    return frame


_PRIMITIVE_FRAME = primitive_frame()


# Runtime ---------------------------------------------------------------------


class Runtime:
    """One interpreter instance: global environment, rng and compiled code.

    Top-level definitions mutate the single global frame, so prelude
    procedures see later user definitions (the prelude's ``unfold`` calls
    whatever ``terminal?`` is current).
    """

    def __init__(self, seed: int = 0, backend=None, prelude: bool = True):
        self.kernel = backend if backend is not None else _backend.kernel
        self.analyzer = Analyzer(self.kernel)
        self.rng = random.Random(seed)
        self.primitives = self.kernel.Environment(dict(_PRIMITIVE_FRAME), None)
        self.global_env = self.kernel.Environment({}, self.primitives)
        self.program_ctx = Context(self, self.rng)
        self._gensym_labels: dict = {}
        self._top = 0
        if prelude:
            from .prelude import load_prelude

            load_prelude(self)

    def seed(self, seed: int) -> None:
        self.rng.seed(seed)

    def gensym_label(self, tag) -> int:
        label = self._gensym_labels.get(tag)
        if label is None:
            label = self._gensym_labels[tag] = len(self._gensym_labels) + 1
        return label

    def next_top_address(self):
        self._top += 1
        return ("top", self._top)

    def context(self, rng=None, memo=None) -> Context:
        return Context(self, rng or self.rng, memo)

    # Library API

    def lookup(self, env, name):
        try:
            return env.lookup(sym(name) if type(name) is str else name)
        except ChurchError:
            return ERROR

    def extend(self, env, names, values):
        """Child environment binding ``names``; a single symbol binds the whole list."""
        if type(names) in (str, Symbol):
            return self.kernel.Environment({sym(names): make_list(list(values))}, env)
        names = [sym(n) for n in names]
        if len(names) != len(values):
            raise ChurchError(f"extend: {len(names)} names for {len(values)} values")
        return self.kernel.Environment(dict(zip(names, values)), env)

    def evaluate(self, datum, env=None, ctx=None, addr=None):
        """Evaluate one datum; ``ERROR`` on failure."""
        try:
            return self.evaluate_raising(datum, env, ctx, addr)
        except ChurchError:
            return ERROR

    def evaluate_raising(self, datum, env=None, ctx=None, addr=None):
        node = self.analyzer.compile(datum)
        return self.kernel.evaluate(
            node,
            self.global_env if env is None else env,
            self.next_top_address() if addr is None else addr,
            self.program_ctx if ctx is None else ctx,
            0,
        )

    def apply(self, proc, args, ctx=None, addr=None):
        try:
            return self.kernel.apply_procedure(
                proc,
                list(args),
                self.next_top_address() if addr is None else addr,
                self.program_ctx if ctx is None else ctx,
                0,
            )
        except ChurchError:
            return ERROR

    def define(self, name, value) -> None:
        self.global_env.define(sym(name), value)

    def run_form(self, datum):
        """Evaluate one top-level form; a ``define`` extends the global frame.

        Returns ``(is_define, value)``.
        """
        try:
            node = self.analyzer.compile(datum)
        except ChurchError:
            return False, ERROR
        addr = self.next_top_address()
        if type(node) is self.kernel.Define:
            try:
                value = self.kernel.evaluate(
                    node.expr, self.global_env, addr, self.program_ctx, 0
                )
            except ChurchError:
                return True, ERROR
            self.global_env.define(node.name, value)
            return True, value
        try:
            return False, self.kernel.evaluate(node, self.global_env, addr, self.program_ctx, 0)
        except ChurchError:
            return False, ERROR

    def run_top_level(self, forms) -> list:
        """Values of the non-define forms, in order; errors are collected."""
        out = []
        for datum in forms:
            is_define, value = self.run_form(datum)
            if not is_define:
                out.append(value)
        return out

    def execute(self, source: str) -> list:
        return self.run_top_level(read(source))

    def print_value(self, v) -> str:
        return to_str(v)
