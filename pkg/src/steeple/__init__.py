"""Interpreter and inference engine for the Church probabilistic programming language.

    >>> from steeple import Runtime
    >>> Runtime(seed=1).execute("(define (twice f x) (f (f x))) (twice (lambda (n) (* n 3)) 2)")
    [18]
"""

from ._backend import NAME as BACKEND
from .core import Runtime
from .inference import (
    EnumerationResult,
    InadmissibleConditioning,
    InferenceBudgetError,
    MHChain,
    QueryProblem,
    UnsupportedModel,
    enumerate_expression,
    enumerate_query,
    lex_query,
    mh_query,
    problem_from_form,
    rejection_query,
)
from .prelude import Fixture, fixture_names, get_fixture, load_fixture
from .reader import ReadError, read
from .trace import ComputationTrace, run_traced
from .values import ERROR, NIL, ChurchError, to_str

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChurchError",
    "ComputationTrace",
    "ERROR",
    "EnumerationResult",
    "Fixture",
    "InadmissibleConditioning",
    "InferenceBudgetError",
    "MHChain",
    "NIL",
    "QueryProblem",
    "ReadError",
    "Runtime",
    "UnsupportedModel",
    "enumerate_expression",
    "enumerate_query",
    "fixture_names",
    "get_fixture",
    "lex_query",
    "load_fixture",
    "mh_query",
    "problem_from_form",
    "read",
    "rejection_query",
    "run_traced",
    "to_str",
]
