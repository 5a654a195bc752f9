"""Runtime data for Church programs.

Church data and Church code share one representation: symbols, numbers,
booleans, characters and pair chains ending in ``NIL``.  Procedures are
closures (defined by the evaluator backend), primitives, elementary random
procedures, memoized procedures and gensym tags.
"""

from __future__ import annotations

import math


class ChurchError(Exception):
    """Raised inside the evaluator; surfaces to programs as the ``error`` value."""


class Symbol(str):
    __slots__ = ()

    def __repr__(self):
        return f"Symbol({str.__repr__(self)})"


_symbols: dict[str, Symbol] = {}


def sym(name: str) -> Symbol:
    s = _symbols.get(name)
    if s is None:
        s = _symbols[name] = Symbol(name)
    return s


class Char(str):
    __slots__ = ()

    def __repr__(self):
        return f"Char({str.__repr__(self)})"


class _Nil:
    __slots__ = ()

    def __repr__(self):
        return "NIL"

    def __bool__(self):
        return True

    def __reduce__(self):
        return "NIL"


NIL = _Nil()


class _Error:
    __slots__ = ()

    def __repr__(self):
        return "ERROR"

    def __reduce__(self):
        return "ERROR"


ERROR = _Error()


class Pair:
    __slots__ = ("first", "rest", "pos")

    def __init__(self, first, rest, pos=None):
        self.first = first
        self.rest = rest
        self.pos = pos

    def __iter__(self):
        p = self
        while type(p) is Pair:
            yield p.first
            p = p.rest
        if p is not NIL:
            raise ChurchError("improper list")

    def __eq__(self, other):
        return isinstance(other, Pair) and values_equal(self, other)

    def __hash__(self):
        return hash(value_key(self))

    def __repr__(self):
        return f"Pair<{to_str(self)}>"


def make_list(items, tail=NIL):
    out = tail
    for x in reversed(items):
        out = Pair(x, out)
    return out


def to_pylist(v) -> list:
    out = []
    while type(v) is Pair:
        out.append(v.first)
        v = v.rest
    if v is not NIL:
        raise ChurchError("expected a proper list")
    return out


class Primitive:
    """Deterministic built-in; ``fn`` takes the argument values positionally."""

    __slots__ = ("name", "fn")

    def __init__(self, name, fn):
        self.name = name
        self.fn = fn

    def __repr__(self):
        return f"#<primitive {self.name}>"


class ContextPrimitive:
    """Built-in that needs the evaluation context (eval, apply, query...)."""

    __slots__ = ("name", "fn")

    def __init__(self, name, fn):
        self.name = name
        self.fn = fn

    def invoke(self, args, addr, ctx, env, depth):
        return self.fn(args, addr, ctx, env, depth)

    def __repr__(self):
        return f"#<primitive {self.name}>"


class Gensym:
    """A unique tag.

    Applied to one argument it answers whether that argument is this very
    tag, so ``((gensym) (gensym))`` is false.  The tag is the creation
    address, which keeps it stable when a trace is replayed.
    """

    __slots__ = ("tag", "label")

    def __init__(self, tag, label):
        self.tag = tag
        self.label = label

    def invoke(self, args, addr, ctx, env, depth):
        if len(args) != 1:
            raise ChurchError("gensym predicate takes one argument")
        other = args[0]
        return type(other) is Gensym and other.tag == self.tag

    def __eq__(self, other):
        return type(other) is Gensym and other.tag == self.tag

    def __hash__(self):
        return hash(self.tag)

    def __repr__(self):
        return f"#<gensym {self.label}>"


# Backends register their Closure and Environment types here so that the
# printer and equality can recognise them without importing either backend.
closure_types: tuple = ()
environment_types: tuple = ()


def register_backend_types(closure_cls, env_cls):
    global closure_types, environment_types
    closure_types = closure_types + (closure_cls,)
    environment_types = environment_types + (env_cls,)


def is_procedure(v) -> bool:
    return (
        isinstance(v, closure_types)
        or type(v) is Primitive
        or hasattr(v, "invoke")
    )


def is_number(v) -> bool:
    t = type(v)
    return t is int or t is float


def values_equal(a, b) -> bool:
    """Structural equality; procedures compare by identity, numbers numerically."""
    while True:
        if a is b:
            return True
        ta, tb = type(a), type(b)
        if ta is Pair:
            if tb is not Pair or not values_equal(a.first, b.first):
                return False
            a, b = a.rest, b.rest
            continue
        if ta is bool or tb is bool:
            return ta is tb and a == b
        if (ta is int or ta is float) and (tb is int or tb is float):
            return a == b
        if ta is Symbol or ta is Char:
            return ta is tb and str.__eq__(a, b)
        if ta is Gensym:
            return tb is Gensym and a.tag == b.tag
        return False


def value_key(v):
    """Hashable key consistent with :func:`values_equal`, used by memo tables."""
    t = type(v)
    if t is bool:
        return ("b", v)
    if t is int or t is float:
        return ("n", v)
    if t is Symbol:
        return ("s", str(v))
    if t is Pair:
        items = []
        while type(v) is Pair:
            items.append(value_key(v.first))
            v = v.rest
        return ("l", tuple(items), value_key(v))
    if v is NIL:
        return ("nil",)
    if t is Char:
        return ("c", str(v))
    if t is Gensym:
        return ("g", v.tag)
    key = getattr(v, "memo_key", None)
    if key is not None:
        return key
    return ("id", id(v))


def _format_real(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


_CHAR_NAMES = {" ": "space", "\n": "newline", "\t": "tab"}


def to_str(v) -> str:
    """Canonical printed form of a value (also used as the CLI output format)."""
    t = type(v)
    if t is bool:
        return "true" if v else "false"
    if t is int:
        return str(v)
    if t is float:
        return _format_real(v)
    if t is Symbol:
        return str(v)
    if v is NIL:
        return "()"
    if t is Pair:
        if (
            type(v.first) is Symbol
            and v.first == "quote"
            and type(v.rest) is Pair
            and v.rest.rest is NIL
        ):
            return "'" + to_str(v.rest.first)
        parts = []
        while type(v) is Pair:
            parts.append(to_str(v.first))
            v = v.rest
        if v is not NIL:
            parts.append(".")
            parts.append(to_str(v))
        return "(" + " ".join(parts) + ")"
    if t is Char:
        return "#\\" + _CHAR_NAMES.get(str(v), str(v))
    if v is ERROR:
        return "error"
    if t is Gensym:
        return f"#<gensym {v.label}>"
    if isinstance(v, environment_types):
        return "#<env>"
    if is_procedure(v):
        return "#<procedure>"
    return f"#<{type(v).__name__}>"
