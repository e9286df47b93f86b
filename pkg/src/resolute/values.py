"""Runtime values of the computation language and how they are displayed.

Values are plain Python objects: ``bool``, ``int``, ``float``, ``str``,
model references, and :class:`VSet`.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Union

from .model import ComponentRef, ConnectionRef, FeatureRef, MODEL_REF_TYPES


class VSet:
    """Finite, duplicate-free set that iterates in insertion order.

    Equality and hashing ignore order, so two sets built in different
    orders compare equal, but enumeration stays deterministic.
    """

    __slots__ = ("_items", "_members")

    def __init__(self, items: Iterable[object] = ()):
        self._items = tuple(dict.fromkeys(items))
        self._members = frozenset(self._items)

    def __iter__(self) -> Iterator[object]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item: object) -> bool:
        return item in self._members

    def __eq__(self, other: object) -> bool:
        return isinstance(other, VSet) and self._members == other._members

    def __hash__(self) -> int:
        return hash(self._members)

    def __repr__(self) -> str:
        return f"VSet({list(self._items)!r})"

    @property
    def items(self) -> tuple[object, ...]:
        return self._items

    def union(self, other: VSet) -> VSet:
        return VSet(self._items + other._items)


Value = Union[bool, int, float, str, ComponentRef, ConnectionRef, FeatureRef, VSet]


def display(value: object) -> str:
    """Human-readable form used in claim text and argument lists."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, str)):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, MODEL_REF_TYPES):
        return value.path
    if isinstance(value, VSet):
        return "{" + ", ".join(display(v) for v in value) + "}"
    raise TypeError(f"not a value: {value!r}")


def to_json(value: object) -> object:
    """Encoding used on the external-tool wire: references become path strings."""
    if isinstance(value, MODEL_REF_TYPES):
        return value.path
    if isinstance(value, VSet):
        return [to_json(v) for v in value]
    return value


def model_refs(value: object) -> list[str]:
    """Qualified paths of every model element mentioned by `value`."""
    if isinstance(value, MODEL_REF_TYPES):
        return [value.path]
    if isinstance(value, VSet):
        out: list[str] = []
        for v in value:
            out.extend(model_refs(v))
        return out
    return []
