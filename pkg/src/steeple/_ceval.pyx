# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled evaluator kernel; same interface as ``_pyeval``."""

from .values import ChurchError, Primitive, make_list, register_backend_types

NAME = "compiled"

MAX_DEPTH = 2500

cdef object _MISSING = object()


cdef class Environment:
    cdef public dict frame
    cdef public object parent

    def __init__(self, frame=None, parent=None):
        self.frame = {} if frame is None else frame
        self.parent = parent

    def lookup(self, name):
        return _lookup(self, name)

    def define(self, name, value):
        self.frame[name] = value

    def __repr__(self):
        return "#<env>"


cdef class Closure:
    cdef public tuple params
    cdef public object rest
    cdef public object body
    cdef public Environment env
    cdef public object addr
    cdef public object site

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


cdef class Const:
    cdef public object value

    def __init__(self, value):
        self.value = value


cdef class Var:
    cdef public object name

    def __init__(self, name):
        self.name = name


cdef class If:
    cdef public object test
    cdef public object then
    cdef public object else_

    def __init__(self, test, then, else_):
        self.test = test
        self.then = then
        self.else_ = else_


cdef class Lambda:
    cdef public tuple params
    cdef public object rest
    cdef public object body
    cdef public object site

    def __init__(self, params, rest, body, site):
        self.params = params
        self.rest = rest
        self.body = body
        self.site = site


cdef class Define:
    cdef public object name
    cdef public object expr

    def __init__(self, name, expr):
        self.name = name
        self.expr = expr


cdef class App:
    cdef public object op
    cdef public tuple args
    cdef public object site

    def __init__(self, op, args, site):
        self.op = op
        self.args = tuple(args)
        self.site = site


_WRAPPED = (TypeError, ValueError, ArithmeticError, IndexError, AttributeError, KeyError)


cdef dict _bind(Closure proc, list args):
    cdef tuple params = proc.params
    cdef Py_ssize_t n = len(params)
    cdef Py_ssize_t m = len(args)
    cdef dict frame
    cdef Py_ssize_t i
    if proc.rest is None:
        if m != n:
            raise ChurchError(f"procedure expects {n} arguments, got {m}")
    elif m < n:
        raise ChurchError(f"procedure expects at least {n} arguments, got {m}")
    frame = {}
    for i in range(n):
        frame[params[i]] = args[i]
    if proc.rest is not None:
        frame[proc.rest] = make_list(args[n:])
    return frame


cdef object _call_primitive(proc, list args):
    try:
        return proc.fn(*args)
    except ChurchError:
        raise
    except _WRAPPED as exc:
        raise ChurchError(f"{proc.name}: {exc}") from None


cdef inline object _lookup(Environment env, object name):
    cdef Environment e = env
    cdef object v
    while e is not None:
        v = e.frame.get(name, _MISSING)
        if v is not _MISSING:
            return v
        e = e.parent
    raise ChurchError(f"unbound symbol: {name}")


cpdef object evaluate(object node, Environment env, object addr, object ctx, long depth=0):
    """Evaluate a core-form node; raises ChurchError where the result is ``error``."""
    cdef long d
    cdef list args
    cdef object proc, op, a, t, tp, ta, invoke
    if depth > MAX_DEPTH:
        raise ChurchError("maximum recursion depth exceeded")
    while True:
        t = type(node)
        if t is App:
            d = depth + 1
            op = (<App>node).op
            if type(op) is Var:
                proc = _lookup(env, (<Var>op).name)
            else:
                proc = evaluate(op, env, addr, ctx, d)
            args = []
            for a in (<App>node).args:
                ta = type(a)
                if ta is Const:
                    args.append((<Const>a).value)
                elif ta is Var:
                    args.append(_lookup(env, (<Var>a).name))
                else:
                    args.append(evaluate(a, env, addr, ctx, d))
            tp = type(proc)
            if tp is Closure:
                env = Environment(_bind(<Closure>proc, args), (<Closure>proc).env)
                addr = (addr, (<App>node).site)
                node = (<Closure>proc).body
                continue
            if tp is Primitive:
                return _call_primitive(proc, args)
            invoke = getattr(proc, "invoke", None)
            if invoke is None:
                raise ChurchError("application of a non-procedure")
            return invoke(args, (addr, (<App>node).site), ctx, env, d)
        if t is Var:
            return _lookup(env, (<Var>node).name)
        if t is Const:
            return (<Const>node).value
        if t is If:
            if evaluate((<If>node).test, env, addr, ctx, depth + 1) is False:
                node = (<If>node).else_
            else:
                node = (<If>node).then
            continue
        if t is Lambda:
            return Closure(
                (<Lambda>node).params, (<Lambda>node).rest, (<Lambda>node).body,
                env, addr, (<Lambda>node).site,
            )
        if t is Define:
            child = Environment({}, env)
            child.frame[(<Define>node).name] = evaluate(
                (<Define>node).expr, child, addr, ctx, depth + 1
            )
            return child
        raise ChurchError(f"cannot evaluate {node!r}")


cpdef object apply_procedure(object proc, object args, object addr, object ctx, long depth=0):
    """Apply ``proc`` in the frame at ``addr`` (already extended by the caller)."""
    cdef object tp = type(proc)
    cdef list argl = list(args)
    if tp is Closure:
        env = Environment(_bind(<Closure>proc, argl), (<Closure>proc).env)
        return evaluate((<Closure>proc).body, env, addr, ctx, depth + 1)
    if tp is Primitive:
        return _call_primitive(proc, argl)
    invoke = getattr(proc, "invoke", None)
    if invoke is None:
        raise ChurchError("application of a non-procedure")
    return invoke(argl, addr, ctx, None, depth + 1)
