"""Stochastic memoization: ``mem`` and the Dirichlet-process memoizer ``DPmem``.

Tables live in the evaluation context, not in the procedure object, so every
independent evaluation (each rejection sample, each MH replay) starts with
empty tables and draws its own random world.
"""

from __future__ import annotations

import math

from .erp import CRP_SEAT, NEW_TABLE, crp_next_table
from .values import ChurchError, is_number, is_procedure, value_key

__all__ = [
    "MemoizedProcedure",
    "DPMemoizedProcedure",
    "crp_next_table",
    "memoize",
    "dp_memoize",
]

_MISSING = object()


class MemoizedProcedure:
    """Returns the stored value for argument lists it has seen before."""

    __slots__ = ("proc", "addr")

    def __init__(self, proc, addr):
        self.proc = proc
        self.addr = addr

    @property
    def memo_key(self):
        return ("mem", self.addr)

    def invoke(self, args, addr, ctx, env, depth):
        key = tuple([value_key(a) for a in args])
        table = ctx.memo.get(self)
        if table is None:
            table = ctx.memo[self] = {}
        v = table.get(key, _MISSING)
        if v is _MISSING:
            # The underlying call is addressed by (procedure, arguments), not by
            # whichever call site happened to ask first.
            v = ctx.kernel.apply_procedure(
                self.proc, args, (self.addr, ("mem", key)), ctx, depth
            )
            table[key] = v
        return v

    def __repr__(self):
        return "#<procedure>"


class Restaurant:
    """Tables for one argument list: parallel lists of counts, dishes and labels.

    A table's label is the arrival number of the customer who opened it.
    """

    __slots__ = ("counts", "dishes", "labels", "arrivals")

    def __init__(self, counts=None, dishes=None, labels=None, arrivals=None):
        self.counts = [] if counts is None else counts
        self.dishes = [] if dishes is None else dishes
        self.labels = list(range(len(self.counts))) if labels is None else labels
        self.arrivals = sum(self.counts) if arrivals is None else arrivals

    def copy(self):
        return Restaurant(list(self.counts), list(self.dishes), list(self.labels), self.arrivals)

    @property
    def customers(self):
        return sum(self.counts)


class DPMemoizedProcedure:
    """Each call reuses a previous value or draws afresh, by CRP seating."""

    __slots__ = ("alpha", "proc", "addr")

    def __init__(self, alpha, proc, addr):
        self.alpha = alpha
        self.proc = proc
        self.addr = addr

    @property
    def memo_key(self):
        return ("dpmem", self.addr)

    def restaurant(self, ctx, key) -> Restaurant:
        rooms = ctx.memo.get(self)
        if rooms is None:
            rooms = ctx.memo[self] = {}
        r = rooms.get(key)
        if r is None:
            r = rooms[key] = Restaurant()
        return r

    def invoke(self, args, addr, ctx, env, depth):
        key = tuple([value_key(a) for a in args])
        r = self.restaurant(ctx, key)
        counts = r.counts
        arrival = r.arrivals
        r.arrivals = arrival + 1
        occupied = sum(1 for c in counts if c > 0)
        if occupied == 0 or math.isinf(self.alpha):
            table = len(counts)
        elif self.alpha == 0.0 and occupied == 1:
            table = next(i for i, c in enumerate(counts) if c > 0)
        else:
            seat = ctx.choose(addr, CRP_SEAT, (tuple(counts), self.alpha, tuple(r.labels)))
            if seat == NEW_TABLE:
                table = len(counts)
            elif seat in r.labels:
                table = r.labels.index(seat)
            else:
                raise ChurchError(f"no table labelled {seat} in this restaurant")
        if table < len(counts):
            if counts[table] <= 0:
                raise ChurchError("joined a table that has no dish yet")
            counts[table] += 1
            return r.dishes[table]
        # Reserve the slot first: the dish may call this procedure recursively.
        counts.append(0)
        r.dishes.append(None)
        r.labels.append(arrival)
        dish = ctx.kernel.apply_procedure(
            self.proc, args, (self.addr, ("dp", key, arrival)), ctx, depth
        )
        counts[table] = 1
        r.dishes[table] = dish
        return dish

    def __repr__(self):
        return "#<procedure>"


def memoize(proc, addr) -> MemoizedProcedure:
    if not is_procedure(proc):
        raise ChurchError("mem needs a procedure")
    return MemoizedProcedure(proc, addr)


def dp_memoize(alpha, proc, addr) -> DPMemoizedProcedure:
    if not is_number(alpha) or alpha < 0:
        raise ChurchError("DPmem concentration must be a non-negative number")
    if not is_procedure(proc):
        raise ChurchError("DPmem needs a procedure")
    return DPMemoizedProcedure(float(alpha), proc, addr)


def mem_primitive(args, addr, ctx, env, depth):
    if len(args) != 1:
        raise ChurchError("mem takes one procedure")
    return memoize(args[0], addr)


def dpmem_primitive(args, addr, ctx, env, depth):
    if len(args) != 2:
        raise ChurchError("DPmem takes a concentration and a procedure")
    return dp_memoize(args[0], args[1], addr)


def snapshot(memo: dict) -> dict:
    """Copy of a context's memo state, deep enough to be mutated independently."""
    out = {}
    for proc, table in memo.items():
        if type(proc) is DPMemoizedProcedure:
            out[proc] = {k: r.copy() for k, r in table.items()}
        else:
            out[proc] = dict(table)
    return out
