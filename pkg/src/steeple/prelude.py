"""Church standard library and the registry of example programs.

Fixtures live as ``.church`` files next to a ``manifest.json`` that maps each
name to its file, kind and oracle recipe.  ``STEEPLE_FIXTURE_DIR`` points the
registry at another directory with the same layout.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .reader import read
from .values import ChurchError, Pair, Symbol

QUERY_HEADS = ("query", "lex-query")


@lru_cache(maxsize=1)
def prelude_source() -> str:
    return resources.files(__package__).joinpath("prelude.church").read_text("utf-8")


@lru_cache(maxsize=1)
def _prelude_forms():
    return read(prelude_source())


def load_prelude(runtime):
    """Define the library in the runtime's global environment."""
    runtime.run_top_level(_prelude_forms())
    return runtime.global_env


def fixture_dir() -> Path:
    override = os.environ.get("STEEPLE_FIXTURE_DIR")
    if override:
        return Path(override)
    return Path(str(resources.files(__package__).joinpath("fixtures")))


@dataclass(frozen=True)
class Fixture:
    name: str
    source: str
    kind: str
    description: str = ""
    oracle: str | None = None

    def forms(self) -> list:
        return read(self.source)


def _manifest(directory: Path) -> dict:
    path = directory / "manifest.json"
    try:
        return json.loads(path.read_text("utf-8"))
    except FileNotFoundError:
        raise ChurchError(f"no fixture manifest at {path}") from None


def fixture_names() -> list[str]:
    return sorted(_manifest(fixture_dir()))


def get_fixture(name: str) -> Fixture:
    directory = fixture_dir()
    manifest = _manifest(directory)
    entry = manifest.get(name)
    if entry is None:
        raise ChurchError(
            f"unknown fixture {name!r}; registry: {', '.join(sorted(manifest))}"
        )
    source = (directory / entry["path"]).read_text("utf-8")
    return Fixture(
        name, source, entry.get("kind", "model"), entry.get("description", ""),
        entry.get("oracle"),
    )


def is_query_form(datum) -> bool:
    return (
        type(datum) is Pair
        and type(datum.first) is Symbol
        and str(datum.first) in QUERY_HEADS
    )


def load_fixture(runtime, name: str) -> list:
    """Run a fixture's non-query forms; return its query forms unevaluated."""
    queries = []
    for datum in get_fixture(name).forms():
        if is_query_form(datum):
            queries.append(datum)
        else:
            runtime.run_form(datum)
    return queries
