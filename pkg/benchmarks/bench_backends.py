"""Times the compiled and pure-Python evaluator kernels on the same workloads.

    python benchmarks/bench_backends.py [--repeat N]

Each workload runs N times per kernel; the best time is reported.
"""

import argparse
import random
import time

from steeple import _backend
from steeple.core import Runtime
from steeple.inference import MHChain, enumerate_query, problem_from_form, rejection_query
from steeple.prelude import load_fixture
from steeple.reader import read


def fib(kernel):
    rt = Runtime(0, backend=kernel)
    rt.execute("(define (fib n) (if (< n 2) n (+ (fib (- n 1)) (fib (- n 2)))))")
    [d] = read("(fib 20)")
    return lambda: rt.evaluate(d)


def crp_draws(kernel):
    rt = Runtime(0, backend=kernel)
    [d] = read("(repeat 50 (DPmem 1.0 gensym))")
    return lambda: [rt.evaluate(d, ctx=rt.context()) for _ in range(200)]


def _problem(kernel, name):
    rt = Runtime(0, backend=kernel)
    [q] = load_fixture(rt, name)
    return problem_from_form(rt, q)


def sprinkler_rejection(kernel):
    problem = _problem(kernel, "sprinkler")
    return lambda: rejection_query(problem, 5000, random.Random(0))


def sprinkler_enumeration(kernel):
    problem = _problem(kernel, "sprinkler")
    return lambda: [enumerate_query(problem) for _ in range(50)]


def mixture_mh(kernel):
    problem = _problem(kernel, "gaussian-mixture")

    def run():
        chain = MHChain(problem, random.Random(0), collapse=True)
        for _ in range(1000):
            chain.step()

    return run


WORKLOADS = {
    "fib 20": fib,
    "200 x 50 CRP draws": crp_draws,
    "sprinkler rejection 5k": sprinkler_rejection,
    "sprinkler enumeration x50": sprinkler_enumeration,
    "mixture MH 1k steps": mixture_mh,
}


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    kernels = _backend.available()
    if "compiled" not in kernels:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
    names = sorted(kernels)
    print(f"{'workload':<28}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    for label, make in WORKLOADS.items():
        row = {n: best_time(make(kernels[n]), args.repeat) for n in names}
        speedup = row["python"] / row["compiled"] if "compiled" in row else 1.0
        print(f"{label:<28}" + "".join(f"{row[n]:>11.3f}s" for n in names) + f"{speedup:>9.2f}x")


if __name__ == "__main__":
    main()
