"""EFX partitions for a single additive valuation.

A partition ``(P_1, ..., P_k)`` is EFX for weights ``w`` when
``w(P_j) >= w(P_l - g)`` for every pair of parts and every ``g`` in ``P_l``.
:func:`efx_partition` finds one by local search; the brute-force version
returns a leximin-optimal partition and serves as a test oracle.
"""

from __future__ import annotations

from typing import Iterator, Sequence

from .combinat import Partition, partitions_into
from .core import InvariantViolation, ItemSet, ResourceError, UsageError, items_of

__all__ = [
    "is_efx_partition",
    "efx_local_search",
    "efx_partition",
    "efx_partition_bruteforce",
    "leximin_key",
    "leximinpp_key",
]


def _val(w: Sequence, mask: ItemSet):
    return sum((w[g] for g in items_of(mask)), 0)


def is_efx_partition(w: Sequence, parts: Sequence[ItemSet]) -> bool:
    """Check the EFX-partition predicate directly, pair by pair and item by item."""
    vals = [_val(w, p) for p in parts]
    for p in parts:
        for g in items_of(p):
            drop = _val(w, p) - w[g]
            if any(v < drop for v in vals):
                return False
    return True


def leximin_key(w: Sequence, parts: Sequence[ItemSet]) -> tuple:
    """Part values sorted ascending; larger tuples are leximin-better."""
    return tuple(sorted(_val(w, p) for p in parts))


def leximinpp_key(w: Sequence, parts: Sequence[ItemSet]) -> tuple:
    """Sorted ``(value, size)`` pairs: leximin, with ties broken towards larger poor parts."""
    return tuple(sorted((_val(w, p), p.bit_count()) for p in parts))


def _round_robin(w: Sequence, items: list[int], k: int) -> list[ItemSet]:
    parts = [0] * k
    order = sorted(items, key=lambda g: (-w[g], g))
    for r, g in enumerate(order):
        parts[r % k] |= 1 << g
    return parts


def efx_local_search(w: Sequence, ground: ItemSet, k: int) -> Iterator[list[ItemSet]]:
    """Yield each intermediate partition of the local search, ending with an EFX one.

    Zero-weight items are set aside and dropped into a minimum-value part at
    the end; moving them would not change any part value. Among the
    positive items, starting from a round-robin deal by descending weight,
    each step takes the (part, item) pair with the largest value after
    removing the item (ties: lower part index, then lower item index) and,
    if that value exceeds the current minimum part, moves the item into the
    first minimum-value part. Both touched parts end strictly above the old
    minimum, so the sorted value vector rises lexicographically at every
    move, and :func:`leximinpp_key` rises at every yielded step, the final
    placement of zero-weight items included.
    """
    if k < 1:
        raise UsageError("k must be at least 1")
    if any(w[g] < 0 for g in items_of(ground)):
        raise UsageError("weights must be nonnegative")
    zeros = [g for g in items_of(ground) if w[g] == 0]
    positive = [g for g in items_of(ground) if w[g] != 0]
    parts = _round_robin(w, positive, k)
    vals = [_val(w, p) for p in parts]
    yield list(parts)
    while True:
        low = min(range(k), key=lambda j: (vals[j], j))
        best = None
        for j in range(k):
            for g in items_of(parts[j]):
                drop = vals[j] - w[g]
                if best is None or drop > best[0]:
                    best = (drop, j, g)
        if best is None or best[0] <= vals[low]:
            break
        before = leximinpp_key(w, parts)
        _, j, g = best
        parts[j] ^= 1 << g
        parts[low] |= 1 << g
        vals[j] -= w[g]
        vals[low] += w[g]
        if not leximinpp_key(w, parts) > before:
            raise InvariantViolation("EFX local search failed to improve the leximin vector")
        yield list(parts)
    if zeros:
        low = min(range(k), key=lambda j: (vals[j], j))
        for g in zeros:
            parts[low] |= 1 << g
        yield list(parts)


def efx_partition(w: Sequence, ground: ItemSet, k: int) -> Partition:
    """An EFX partition of ``ground`` into ``k`` parts under weights ``w``.

    >>> efx_partition([4, 3, 3], 0b111, 2).as_lists()
    [[0], [1, 2]]
    """
    parts = None
    for parts in efx_local_search(w, ground, k):
        pass
    return Partition(parts, ground)


def efx_partition_bruteforce(w: Sequence, ground: ItemSet, k: int) -> Partition:
    """Leximin-optimal partition by exhaustive search (``|ground| <= 12``).

    Ties between leximin-optimal partitions go to the one whose sorted
    (value, size) pairs are larger, so that zero-weight items land in a
    minimum-value part, as in the leximin++ rule. The first such partition
    in canonical order is returned.
    """
    if ground.bit_count() > 12:
        raise ResourceError("brute-force EFX partition needs |ground| <= 12")
    best, best_key = None, None
    for p in partitions_into(ground, k):
        key = leximinpp_key(w, p)
        if best_key is None or key > best_key:
            best, best_key = p, key
    return best
