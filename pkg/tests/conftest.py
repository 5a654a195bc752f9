import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from steeple import _backend
from steeple.core import Runtime
from steeple.reader import read

KERNELS = _backend.available()

_acceptance_lines: list[str] = []


def record_acceptance(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_acceptance_lines, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)


@pytest.fixture(params=sorted(KERNELS))
def kernel(request):
    return KERNELS[request.param]


@pytest.fixture
def rt(kernel):
    """A fresh runtime on each available evaluator kernel."""
    return Runtime(seed=7, backend=kernel)


def run1(runtime, source):
    """Value of the last non-define form of ``source``."""
    return runtime.execute(source)[-1]


def datum(source):
    [d] = read(source)
    return d
