"""Pure-Python evaluator kernel.

``_ceval.pyx`` implements the same interface; ``steeple._backend`` picks one
at import time.  Keep the two in step.

Every frame of evaluation carries an address, a nested tuple
``(parent, site)``.  An application at syntactic site ``s`` inside the frame
at address ``a`` runs its callee in frame ``(a, s)``, and a random choice made
by an elementary random procedure applied there is recorded under that same
address.  A site runs at most once per frame, so addresses are unique within
one evaluation and stable when it is replayed.
"""

from .values import ChurchError, Primitive, make_list, register_backend_types

NAME = "python"

MAX_DEPTH = 2500

_MISSING = object()


class Environment:
    __slots__ = ("frame", "parent")

    def __init__(self, frame=None, parent=None):
        self.frame = {} if frame is None else frame
        self.parent = parent

    def lookup(self, name):
        e = self
        while e is not None:
            v = e.frame.get(name, _MISSING)
            if v is not _MISSING:
                return v
            e = e.parent
        raise ChurchError(f"unbound symbol: {name}")

    def define(self, name, value):
        self.frame[name] = value

    def __repr__(self):
        return "#<env>"


class Closure:
    __slots__ = ("params", "rest", "body", "env", "addr", "site")

    def __init__(self, params, rest, body, env, addr, site):
        self.params = params
        self.rest = rest
        self.body = body
        self.env = env
        self.addr = addr
        self.site = site

    @property
    def memo_key(self):
        return ("lambda", self.addr, self.site)

    def __repr__(self):
        return "#<procedure>"


register_backend_types(Closure, Environment)


class Const:
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value


class Var:
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name


class If:
    __slots__ = ("test", "then", "else_")

    def __init__(self, test, then, else_):
        self.test = test
        self.then = then
        self.else_ = else_


class Lambda:
    __slots__ = ("params", "rest", "body", "site")

    def __init__(self, params, rest, body, site):
        self.params = params
        self.rest = rest
        self.body = body
        self.site = site


class Define:
    __slots__ = ("name", "expr")

    def __init__(self, name, expr):
        self.name = name
        self.expr = expr


class App:
    __slots__ = ("op", "args", "site")

    def __init__(self, op, args, site):
        self.op = op
        self.args = args
        self.site = site


_WRAPPED = (TypeError, ValueError, ArithmeticError, IndexError, AttributeError, KeyError)


def _bind(proc, args):
    params = proc.params
    n = len(params)
    if proc.rest is None:
        if len(args) != n:
            raise ChurchError(f"procedure expects {n} arguments, got {len(args)}")
        return dict(zip(params, args))
    if len(args) < n:
        raise ChurchError(f"procedure expects at least {n} arguments, got {len(args)}")
    frame = dict(zip(params, args))
    frame[proc.rest] = make_list(args[n:])
    return frame


def _call_primitive(proc, args):
    try:
        return proc.fn(*args)
    except ChurchError:
        raise
    except _WRAPPED as exc:
        raise ChurchError(f"{proc.name}: {exc}") from None


def _lookup(env, name):
    e = env
    while e is not None:
        v = e.frame.get(name, _MISSING)
        if v is not _MISSING:
            return v
        e = e.parent
    raise ChurchError(f"unbound symbol: {name}")


def evaluate(node, env, addr, ctx, depth=0):
    """Evaluate a core-form node; raises ChurchError where the result is ``error``."""
    if depth > MAX_DEPTH:
        raise ChurchError("maximum recursion depth exceeded")
    while True:
        t = type(node)
        if t is App:
            d = depth + 1
            op = node.op
            to = type(op)
            if to is Var:
                proc = _lookup(env, op.name)
            else:
                proc = evaluate(op, env, addr, ctx, d)
            args = []
            for a in node.args:
                ta = type(a)
                if ta is Const:
                    args.append(a.value)
                elif ta is Var:
                    e = env
                    name = a.name
                    while e is not None:
                        v = e.frame.get(name, _MISSING)
                        if v is not _MISSING:
                            break
                        e = e.parent
                    else:
                        raise ChurchError(f"unbound symbol: {name}")
                    args.append(v)
                else:
                    args.append(evaluate(a, env, addr, ctx, d))
            tp = type(proc)
            if tp is Closure:
                env = Environment(_bind(proc, args), proc.env)
                addr = (addr, node.site)
                node = proc.body
                continue
            if tp is Primitive:
                return _call_primitive(proc, args)
            invoke = getattr(proc, "invoke", None)
            if invoke is None:
                raise ChurchError("application of a non-procedure")
            return invoke(args, (addr, node.site), ctx, env, d)
        if t is Var:
            return _lookup(env, node.name)
        if t is Const:
            return node.value
        if t is If:
            if evaluate(node.test, env, addr, ctx, depth + 1) is False:
                node = node.else_
            else:
                node = node.then
            continue
        if t is Lambda:
            return Closure(node.params, node.rest, node.body, env, addr, node.site)
        if t is Define:
            child = Environment({}, env)
            child.frame[node.name] = evaluate(node.expr, child, addr, ctx, depth + 1)
            return child
        raise ChurchError(f"cannot evaluate {node!r}")


def apply_procedure(proc, args, addr, ctx, depth=0):
    """Apply ``proc`` in the frame at ``addr`` (already extended by the caller)."""
    tp = type(proc)
    if tp is Closure:
        env = Environment(_bind(proc, list(args)), proc.env)
        return evaluate(proc.body, env, addr, ctx, depth + 1)
    if tp is Primitive:
        return _call_primitive(proc, list(args))
    invoke = getattr(proc, "invoke", None)
    if invoke is None:
        raise ChurchError("application of a non-procedure")
    return invoke(list(args), addr, ctx, None, depth + 1)
