"""Command-line runner and REPL.

    steeple run FILE [options]        run a program; top-level queries use --method
    steeple run --fixture NAME        run a bundled example program
    steeple run -e SOURCE             run inline source
    steeple repl                      interactive session
    steeple fixtures                  list bundled example programs

Output starts with a JSON header recording the configuration.  Exit status is
2 for read errors and 3 when an inference budget is exhausted.
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from collections import Counter
from dataclasses import asdict, dataclass

from .core import Runtime
from .inference import (
    DEFAULT_BUDGET,
    DEFAULT_MAX_CHOICES,
    DEFAULT_MIN_PATH_PROB,
    InferenceBudgetError,
    MHChain,
    UnsupportedModel,
    enumerate_query,
    problem_from_form,
    rejection_samples,
)
from .prelude import fixture_names, get_fixture, is_query_form
from .reader import ReadError, read
from .values import ERROR, ChurchError, to_str

METHODS = ("rejection", "mh", "enumerate")
FORMATS = ("jsonl", "csv", "summary")

EXIT_OK, EXIT_ERROR, EXIT_PARSE, EXIT_BUDGET = 0, 1, 2, 3


@dataclass
class RunConfig:
    method: str = "rejection"
    samples: int = 1000
    burn_in: int | None = None
    lag: int = 1
    seed: int = 0
    max_choices: int = DEFAULT_MAX_CHOICES
    min_path_prob: float = DEFAULT_MIN_PATH_PROB
    format: str = "jsonl"
    budget: int = DEFAULT_BUDGET
    collapse: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {', '.join(METHODS)}")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {', '.join(FORMATS)}")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if self.lag < 1:
            raise ValueError("lag must be at least 1")
        if not 0.0 < self.min_path_prob < 1.0:
            raise ValueError("min-path-prob must lie in (0, 1)")
        if self.burn_in is None:
            self.burn_in = self.samples // 10
        if self.burn_in < 0:
            raise ValueError("burn-in must be non-negative")

    def header(self) -> dict:
        return {"config": asdict(self)}


class Emitter:
    """Writes records in one of the output formats."""

    def __init__(self, config: RunConfig, out):
        self.config = config
        self.out = out
        self.rows: list = []
        self._csv = csv.writer(out, lineterminator="\n") if config.format == "csv" else None

    def header(self):
        self.out.write(json.dumps(self.config.header(), sort_keys=True) + "\n")
        if self._csv:
            self._csv.writerow(["query", "index", "value", "probability", "accepted_attempts"])

    def sample(self, query, index, value, attempts=None):
        if self.config.format == "summary":
            self.rows.append((query, to_str(value)))
            return
        rec = {"query": query, "index": index, "value": to_str(value)}
        if attempts is not None:
            rec["accepted_attempts"] = attempts
        self._write(rec)

    def probability(self, query, value, p):
        rec = {"query": query, "value": value, "probability": p}
        if self.config.format == "summary":
            self.out.write(f"query {query}\t{value}\t{p!r}\n")
            return
        self._write(rec)

    def value(self, form, value):
        if self.config.format == "summary":
            self.out.write(f"value {form}\t{to_str(value)}\n")
            return
        self._write({"form": form, "value": to_str(value)})

    def _write(self, rec):
        if self._csv:
            self._csv.writerow(
                [
                    rec.get("query", ""),
                    rec.get("index", rec.get("form", "")),
                    rec["value"],
                    rec.get("probability", ""),
                    rec.get("accepted_attempts", ""),
                ]
            )
        else:
            self.out.write(json.dumps(rec, sort_keys=True) + "\n")

    def flush_summary(self, query):
        if self.config.format != "summary":
            return
        counts = Counter(v for q, v in self.rows if q == query)
        n = sum(counts.values())
        self.out.write(f"query {query}\tsamples {n}\n")
        for value, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
            self.out.write(f"{value}\t{c}\t{c / n:.6f}\n")
        self.rows = [r for r in self.rows if r[0] != query]


def run_query(runtime, datum, config: RunConfig, emit: Emitter, qindex: int, rng):
    problem = problem_from_form(runtime, datum)
    root = (("top-query", qindex), "query")
    if config.method == "enumerate":
        result = enumerate_query(
            problem, config.max_choices, config.min_path_prob, root=root
        )
        for value, p in result.items():
            emit.probability(qindex, to_str(value), p)
        emit.probability(qindex, "<residual>", result.residual)
        return
    if config.method == "rejection":
        samples = rejection_samples(
            problem, config.samples, rng, root=root, budget=config.budget,
            collapse=config.collapse, base_memo=runtime.program_ctx.memo,
        )
        for i, (value, attempts) in enumerate(samples):
            emit.sample(qindex, i, value, attempts)
    else:
        chain = MHChain(
            problem, rng, collapse=config.collapse, init_budget=config.budget, root=root
        )
        for i, value in enumerate(chain.samples(config.samples, config.burn_in, config.lag)):
            emit.sample(qindex, i, value)
    emit.flush_summary(qindex)


def run_source(source: str, config: RunConfig, out=None, err=None) -> int:
    """Run a whole program; returns the exit status."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        forms = read(source)
    except ReadError as exc:
        err.write(f"read error: {exc}\n")
        return EXIT_PARSE
    runtime = Runtime(config.seed)
    rng = random.Random(config.seed)
    emit = Emitter(config, out)
    emit.header()
    status = EXIT_OK
    qindex = 0
    for k, datum in enumerate(forms):
        if is_query_form(datum):
            try:
                run_query(runtime, datum, config, emit, qindex, rng)
            except InferenceBudgetError as exc:
                err.write(f"query {qindex}: {exc}\n")
                return EXIT_BUDGET
            except (ChurchError, UnsupportedModel) as exc:
                err.write(f"query {qindex}: {exc}\n")
                status = EXIT_ERROR
            qindex += 1
            continue
        is_define, value = runtime.run_form(datum)
        if value is ERROR:
            err.write(f"form {k}: evaluated to error\n")
        if not is_define:
            emit.value(k, value)
    return status


# REPL ------------------------------------------------------------------------


_DIRECTIVES = {":method": "method", ":samples": "samples", ":seed": "seed"}


def repl(inp=None, out=None, config: RunConfig | None = None) -> int:
    inp = sys.stdin if inp is None else inp
    out = sys.stdout if out is None else out
    config = config or RunConfig()
    runtime = Runtime(config.seed)
    rng = random.Random(config.seed)
    interactive = inp.isatty() if hasattr(inp, "isatty") else False
    buffer = ""
    qindex = 0
    while True:
        if interactive:
            out.write("church> " if not buffer else "...     ")
            out.flush()
        line = inp.readline()
        if not line:
            return EXIT_OK
        stripped = line.strip()
        if not buffer and stripped.startswith(":"):
            parts = stripped.split()
            if parts[0] == ":quit":
                return EXIT_OK
            field = _DIRECTIVES.get(parts[0])
            if field is None or len(parts) != 2:
                out.write(f"unknown directive {stripped}\n")
                continue
            try:
                value = parts[1] if field == "method" else int(parts[1])
                config = RunConfig(**{**asdict(config), field: value})
            except ValueError as exc:
                out.write(f"{exc}\n")
                continue
            if field == "seed":
                runtime.seed(value)
                rng.seed(value)
            continue
        buffer += line
        try:
            forms = read(buffer)
        except ReadError as exc:
            if "unbalanced '('" in str(exc) or "end of input" in str(exc):
                continue
            out.write(f"read error: {exc}\n")
            buffer = ""
            continue
        buffer = ""
        for datum in forms:
            if is_query_form(datum):
                emit = Emitter(config, out)
                try:
                    run_query(runtime, datum, config, emit, qindex, rng)
                except (ChurchError, UnsupportedModel) as exc:
                    out.write(f"error: {exc}\n")
                qindex += 1
                continue
            is_define, value = runtime.run_form(datum)
            if not is_define:
                out.write(to_str(value) + "\n")


# Entry point -----------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="steeple", description="Church interpreter")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a program")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("file", nargs="?", help="program file ('-' for stdin)")
    src.add_argument("-e", "--eval", dest="inline", help="inline program source")
    src.add_argument("--fixture", help="bundled example program")
    for target in (run, sub.add_parser("repl", help="interactive session")):
        target.add_argument("--method", choices=METHODS, default="rejection")
        target.add_argument("--samples", type=int, default=1000)
        target.add_argument("--burn-in", type=int, default=None)
        target.add_argument("--lag", type=int, default=1)
        target.add_argument("--seed", type=int, default=0)
        target.add_argument("--max-choices", type=int, default=DEFAULT_MAX_CHOICES)
        target.add_argument("--min-path-prob", type=float, default=DEFAULT_MIN_PATH_PROB)
        target.add_argument("--format", choices=FORMATS, default="jsonl")
        target.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                            help="attempts per rejection sample")
        target.add_argument("--collapse", action="store_true",
                            help="sum out the predicate's randomness")
    sub.add_parser("fixtures", help="list bundled example programs")
    return p


def _config(args) -> RunConfig:
    return RunConfig(
        method=args.method, samples=args.samples, burn_in=args.burn_in, lag=args.lag,
        seed=args.seed, max_choices=args.max_choices, min_path_prob=args.min_path_prob,
        format=args.format, budget=args.budget, collapse=args.collapse,
    )


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "fixtures":
        for name in fixture_names():
            fx = get_fixture(name)
            print(f"{name}\t{fx.kind}\t{fx.description}")
        return EXIT_OK
    try:
        config = _config(args)
    except ValueError as exc:
        print(f"steeple: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.command == "repl":
        return repl(config=config)
    if args.fixture:
        try:
            source = get_fixture(args.fixture).source
        except ChurchError as exc:
            print(f"steeple: {exc}", file=sys.stderr)
            return EXIT_ERROR
    elif args.inline is not None:
        source = args.inline
    elif args.file == "-":
        source = sys.stdin.read()
    else:
        with open(args.file, encoding="utf-8") as fh:
            source = fh.read()
    return run_source(source, config)


if __name__ == "__main__":
    sys.exit(main())
