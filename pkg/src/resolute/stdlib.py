"""The bundled standard library, loaded ahead of user libraries."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

STDLIB_FILENAME = "<stdlib>"


@lru_cache(maxsize=None)
def stdlib_source() -> str:
    return resources.files("resolute").joinpath("data/stdlib.resolute").read_text(encoding="utf-8")


def stdlib_library():
    from .lang import parse_library

    return parse_library(stdlib_source(), STDLIB_FILENAME)
