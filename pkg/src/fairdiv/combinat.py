"""Enumeration of subsets and of set partitions into ``k`` unlabeled parts.

Partitions are generated in canonical form: each nonempty part is keyed by its
smallest item, parts appear in increasing order of that key, and empty parts
(allowed) come last. Generation is lazy so that searches can stop at the first
hit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

from .core import ItemSet, ResourceError, UsageError, items_of

__all__ = [
    "Partition",
    "subsets",
    "partitions_into",
    "first_partition",
    "MAX_SUBSET_GROUND",
    "MAX_PARTITION_GROUND",
]

MAX_SUBSET_GROUND = 24
MAX_PARTITION_GROUND = 14


@dataclass(frozen=True)
class Partition:
    """``k`` pairwise disjoint parts whose union is ``ground``."""

    parts: tuple[ItemSet, ...]
    ground: ItemSet

    def __init__(self, parts: Sequence[ItemSet], ground: ItemSet | None = None):
        parts = tuple(int(p) for p in parts)
        union = 0
        for p in parts:
            if p < 0 or p & union:
                raise UsageError("partition parts must be disjoint bitmasks")
            union |= p
        if ground is None:
            ground = union
        elif union != ground:
            raise UsageError("partition parts do not cover the ground set")
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "ground", ground)

    @property
    def k(self) -> int:
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)

    def __getitem__(self, j):
        return self.parts[j]

    def canonical(self) -> "Partition":
        nonempty = sorted((p for p in self.parts if p), key=lambda p: p & -p)
        return Partition(nonempty + [0] * (self.k - len(nonempty)), self.ground)

    def as_lists(self) -> list[list[int]]:
        return [items_of(p) for p in self.parts]


def _size(ground: ItemSet) -> int:
    if ground < 0:
        raise UsageError("ground set must be a nonnegative bitmask")
    return ground.bit_count()


def subsets(ground: ItemSet) -> Iterator[ItemSet]:
    """All subsets of ``ground`` in ascending bitmask order.

    >>> list(subsets(0b101))
    [0, 1, 4, 5]
    """
    if _size(ground) > MAX_SUBSET_GROUND:
        raise ResourceError(f"|ground| > {MAX_SUBSET_GROUND}")
    sub = 0
    while True:
        yield sub
        if sub == ground:
            return
        sub = (sub - ground) & ground


def _canonical(rest: ItemSet, k: int, ok) -> Iterator[tuple[ItemSet, ...]]:
    if rest == 0:
        if k == 0 or ok is None or ok(0):
            yield (0,) * k
        return
    if k == 0:
        return
    low = rest & -rest
    others = rest ^ low
    for sub in subsets(others):
        part = low | sub
        if ok is not None and not ok(part):
            continue
        for tail in _canonical(others ^ sub, k - 1, ok):
            yield (part,) + tail


def partitions_into(ground: ItemSet, k: int) -> Iterator[Partition]:
    """Every partition of ``ground`` into ``k`` unlabeled parts, empties allowed.

    >>> [p.as_lists() for p in partitions_into(0b11, 2)]
    [[[0], [1]], [[0, 1], []]]
    """
    if k < 1:
        raise UsageError("k must be at least 1")
    if _size(ground) > MAX_PARTITION_GROUND:
        raise ResourceError(f"|ground| > {MAX_PARTITION_GROUND} for partition enumeration")
    for parts in _canonical(ground, k, None):
        yield Partition(parts, ground)


def first_partition(
    ground: ItemSet, k: int, part_ok: Callable[[ItemSet], bool]
) -> Partition | None:
    """First partition in canonical order whose parts all satisfy ``part_ok``.

    Equivalent to filtering :func:`partitions_into`, but prunes a branch as
    soon as one part fails, so ``part_ok`` must judge each part on its own
    (empty parts included).
    """
    if k < 0:
        raise UsageError("k must be nonnegative")
    if _size(ground) > MAX_PARTITION_GROUND:
        raise ResourceError(f"|ground| > {MAX_PARTITION_GROUND} for partition search")
    for parts in _canonical(ground, k, part_ok):
        return Partition(parts, ground)
    return None
