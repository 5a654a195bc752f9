"""Elementary random procedures: each pairs a sampler with an exact scorer.

Scores are natural-log probabilities (pmf for discrete, pdf for continuous),
``-inf`` outside the support.  An ERP is itself a Church procedure value;
applying it asks the evaluation context to make (or replay) the choice.
"""

from __future__ import annotations

import math
import random

from .values import (
    ChurchError,
    Gensym,
    is_number,
    to_pylist,
    values_equal,
)

NEG_INF = float("-inf")
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

FINITE = "finite-discrete"
COUNTABLE = "countable-discrete"
CONTINUOUS = "continuous"


def _log(p: float) -> float:
    return math.log(p) if p > 0.0 else NEG_INF


def _real(x, what):
    if not is_number(x):
        raise ChurchError(f"{what} must be a number")
    return float(x)


class Erp:
    """Descriptor for one elementary random procedure."""

    name = "erp"
    support_kind = FINITE

    def check(self, args) -> tuple:
        """Validate Church arguments and return normalized parameters."""
        raise NotImplementedError

    def sample(self, params, rng: random.Random):
        raise NotImplementedError

    def score(self, params, value) -> float:
        raise NotImplementedError

    def support(self, params) -> list:
        """``[(value, logp), ...]`` with zero-probability values left out."""
        raise ChurchError(f"{self.name} does not have a finite support")

    def invoke(self, args, addr, ctx, env, depth):
        return ctx.choose(addr, self, self.check(args))

    @property
    def memo_key(self):
        return ("erp", self.name)

    def __repr__(self):
        return f"#<erp {self.name}>"


class Flip(Erp):
    name = "flip"

    def check(self, args):
        if not args:
            return (0.5,)
        if len(args) != 1:
            raise ChurchError("flip takes at most one argument")
        p = _real(args[0], "flip weight")
        if not 0.0 <= p <= 1.0:
            raise ChurchError(f"flip weight {p} outside [0, 1]")
        return (p,)

    def sample(self, params, rng):
        return rng.random() < params[0]

    def score(self, params, value):
        if value is True:
            return _log(params[0])
        if value is False:
            return _log(1.0 - params[0])
        return NEG_INF

    def support(self, params):
        p = params[0]
        return [(v, lp) for v, lp in ((True, _log(p)), (False, _log(1.0 - p))) if lp > NEG_INF]


class UniformUnit(Erp):
    """``(random)``: uniform on [0, 1)."""

    name = "random"
    support_kind = CONTINUOUS

    def check(self, args):
        if args:
            raise ChurchError("random takes no arguments")
        return ()

    def sample(self, params, rng):
        return rng.random()

    def score(self, params, value):
        if type(value) is float and 0.0 <= value < 1.0:
            return 0.0
        return NEG_INF


class Beta(Erp):
    name = "beta"
    support_kind = CONTINUOUS

    def check(self, args):
        if len(args) != 2:
            raise ChurchError("beta takes two arguments")
        a, b = _real(args[0], "beta a"), _real(args[1], "beta b")
        if not (a > 0.0 and b > 0.0):
            raise ChurchError("beta parameters must be positive")
        return (a, b)

    def sample(self, params, rng):
        return rng.betavariate(params[0], params[1])

    def score(self, params, value):
        if not is_number(value) or not 0.0 <= value <= 1.0:
            return NEG_INF
        a, b = params
        x = float(value)
        lognorm = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        out = lognorm
        for shape, v in ((a, x), (b, 1.0 - x)):
            if shape != 1.0:
                if v == 0.0:
                    return NEG_INF if shape > 1.0 else math.inf
                out += (shape - 1.0) * math.log(v)
        return out


class Normal(Erp):
    """``(normal mean stddev)``."""

    name = "normal"
    support_kind = CONTINUOUS

    def check(self, args):
        if len(args) != 2:
            raise ChurchError("normal takes a mean and a standard deviation")
        mu, sigma = _real(args[0], "normal mean"), _real(args[1], "normal stddev")
        if not sigma > 0.0:
            raise ChurchError("normal stddev must be positive")
        return (mu, sigma)

    def sample(self, params, rng):
        return rng.gauss(params[0], params[1])

    def score(self, params, value):
        if not is_number(value):
            return NEG_INF
        mu, sigma = params
        z = (value - mu) / sigma
        return -0.5 * z * z - math.log(sigma) - _LOG_SQRT_2PI


def _merge_support(values, probs):
    out = []
    for v, p in zip(values, probs):
        if p <= 0.0:
            continue
        for i, (w, q) in enumerate(out):
            if values_equal(v, w):
                out[i] = (w, q + p)
                break
        else:
            out.append((v, p))
    return [(v, math.log(p)) for v, p in out]


class Multinomial(Erp):
    """``(multinomial values probs)``: draw one of ``values``."""

    name = "multinomial"

    def check(self, args):
        if len(args) != 2:
            raise ChurchError("multinomial takes a value list and a probability list")
        values = tuple(to_pylist(args[0]))
        probs = tuple(_real(p, "multinomial probability") for p in to_pylist(args[1]))
        if len(values) != len(probs) or not values:
            raise ChurchError("multinomial value and probability lists differ in length")
        if any(p < 0.0 for p in probs) or abs(math.fsum(probs) - 1.0) > 1e-6:
            raise ChurchError("multinomial probabilities must be non-negative and sum to 1")
        return (values, probs)

    def sample(self, params, rng):
        values, probs = params
        u = rng.random()
        acc = 0.0
        for v, p in zip(values, probs):
            acc += p
            if u < acc:
                return v
        for v, p in zip(reversed(values), reversed(probs)):
            if p > 0.0:
                return v
        return values[-1]

    def score(self, params, value):
        values, probs = params
        return _log(math.fsum(p for v, p in zip(values, probs) if values_equal(v, value)))

    def support(self, params):
        return _merge_support(*params)


class UniformDraw(Erp):
    """``(uniform-draw list)``."""

    name = "uniform-draw"

    def check(self, args):
        if len(args) != 1:
            raise ChurchError("uniform-draw takes one list")
        values = tuple(to_pylist(args[0]))
        if not values:
            raise ChurchError("uniform-draw of an empty list")
        return (values,)

    def sample(self, params, rng):
        values = params[0]
        return values[int(rng.random() * len(values))]

    def score(self, params, value):
        values = params[0]
        k = sum(1 for v in values if values_equal(v, value))
        return _log(k / len(values))

    def support(self, params):
        values = params[0]
        return _merge_support(values, [1.0 / len(values)] * len(values))


NEW_TABLE = -1


class CrpSeat(Erp):
    """Seating of one customer in a Chinese restaurant.

    Parameters are ``(counts, alpha, labels)``.  The value is the label of the
    table joined, or ``NEW_TABLE``.  Labels stay attached to their tables, so
    when MH removes or adds an earlier table, later seats keep their meaning.
    Zero counts mark tables whose dish is still being computed; they cannot
    be joined.
    """

    name = "crp-seat"

    def check(self, args):
        counts, alpha = args[0], args[1]
        labels = args[2] if len(args) > 2 else range(len(counts))
        return (tuple(counts), float(alpha), tuple(labels))

    def sample(self, params, rng):
        counts, alpha, labels = params
        i = crp_next_table(counts, alpha, rng)
        return NEW_TABLE if i == len(counts) else labels[i]

    def score(self, params, value):
        counts, alpha, labels = params
        if type(value) is not int:
            return NEG_INF
        n = sum(counts)
        if value == NEW_TABLE:
            w = alpha
        elif value in labels:
            w = counts[labels.index(value)]
        else:
            return NEG_INF
        if math.isinf(alpha):
            return 0.0 if value == NEW_TABLE else NEG_INF
        return _log(w / (n + alpha)) if n + alpha > 0 else NEG_INF

    def support(self, params):
        out = [(v, self.score(params, v)) for v in params[2] + (NEW_TABLE,)]
        return [(v, lp) for v, lp in out if lp > NEG_INF]


def crp_next_table(counts, alpha: float, rng: random.Random) -> int:
    """Index of the table the next customer joins; ``len(counts)`` is a new table."""
    n = sum(counts)
    if n == 0 or math.isinf(alpha):
        return len(counts)
    u = rng.random() * (n + alpha)
    acc = 0.0
    for i, c in enumerate(counts):
        acc += c
        if u < acc:
            return i
    if alpha > 0.0:
        return len(counts)
    # Rounding pushed u past the last occupied table.
    return max(i for i, c in enumerate(counts) if c > 0)


class DiscreteDistribution(Erp):
    """A finite distribution known only by its table, e.g. a nested query's answer."""

    support_kind = FINITE

    def __init__(self, name, table):
        self.name = name
        self.table = list(table)

    def check(self, args):
        return ()

    def sample(self, params, rng):
        u = rng.random()
        acc = 0.0
        for v, lp in self.table:
            acc += math.exp(lp)
            if u < acc:
                return v
        return self.table[-1][0]

    def score(self, params, value):
        for v, lp in self.table:
            if values_equal(v, value):
                return lp
        return NEG_INF

    def support(self, params):
        return list(self.table)


FLIP = Flip()
RANDOM = UniformUnit()
BETA = Beta()
NORMAL = Normal()
MULTINOMIAL = Multinomial()
UNIFORM_DRAW = UniformDraw()
CRP_SEAT = CrpSeat()

BUILTIN_ERPS = {e.name: e for e in (FLIP, RANDOM, BETA, NORMAL, MULTINOMIAL, UNIFORM_DRAW)}


def sample(erp: Erp, args, rng: random.Random):
    return erp.sample(erp.check(list(args)), rng)


def score(erp: Erp, args, value) -> float:
    return erp.score(erp.check(list(args)), value)


def fresh_gensym(ctx, addr) -> Gensym:
    """A tag unequal to every other gensym made in this evaluation."""
    return Gensym(addr, ctx.runtime.gensym_label(addr))


def gensym_primitive(args, addr, ctx, env, depth):
    if args:
        raise ChurchError("gensym takes no arguments")
    return fresh_gensym(ctx, addr)
