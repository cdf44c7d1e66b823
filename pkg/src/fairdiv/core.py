"""Instances with exact additive valuations.

Values are stored as :class:`fractions.Fraction`. Internally every instance
also carries an integer-scaled copy of its valuation matrix (all entries
multiplied by the least common denominator), so the exhaustive searches in
the rest of the package compare plain Python ints and never touch floats.

Item sets are plain ``int`` bitmasks: bit ``j`` set means item ``j`` is in the
set. Items are 0-indexed in code and printed as ``g1 .. gm``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import lcm
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ExactValue",
    "ItemSet",
    "MAX_ITEMS",
    "UsageError",
    "ResourceError",
    "InvariantViolation",
    "Instance",
    "Allocation",
    "as_exact",
    "itemset",
    "items_of",
    "format_items",
    "format_value",
    "full_set",
    "value",
    "perturb",
    "scale_to_integers",
    "is_non_degenerate",
]

ExactValue = Fraction
ItemSet = int

#: Hard cap on the number of items; most exhaustive routines document a lower one.
MAX_ITEMS = 24
# subset-value tables are cached only up to this many items
_TABLE_ITEMS = 20


class UsageError(ValueError):
    """Bad input: out-of-range index, malformed set, violated precondition."""


class ResourceError(RuntimeError):
    """Input exceeds the size cap of an exhaustive routine."""


class InvariantViolation(RuntimeError):
    """An internal guarantee failed. Indicates a bug, never bad input."""


def as_exact(x) -> Fraction:
    """Convert ``x`` to a Fraction without going through binary floating point.

    Accepts ints, Fractions and strings such as ``"3"``, ``"1.25"`` or ``"7/4"``.
    """
    if isinstance(x, bool):
        raise UsageError(f"not a valuation: {x!r}")
    if isinstance(x, float):
        raise UsageError(f"floats are not accepted, pass {x!r} as a string or Fraction")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise UsageError(f"cannot parse {x!r} as an exact number") from exc
    raise UsageError(f"not a valuation: {x!r}")


def itemset(items: Iterable[int]) -> ItemSet:
    """Bitmask for an iterable of 0-based item indices."""
    mask = 0
    for g in items:
        if g < 0:
            raise UsageError(f"negative item index {g}")
        mask |= 1 << g
    return mask


def items_of(mask: ItemSet) -> list[int]:
    """Sorted 0-based item indices contained in ``mask``."""
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return out


def format_items(mask: ItemSet) -> str:
    """Render a bundle with 1-based item names, e.g. ``{g1,g2}``."""
    return "{" + ",".join(f"g{g + 1}" for g in items_of(mask)) + "}"


def format_value(x: Fraction) -> str:
    """Integer-or-fraction string, e.g. ``"303"`` or ``"607/2"``."""
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def full_set(m: int) -> ItemSet:
    return (1 << m) - 1


@dataclass(frozen=True)
class Instance:
    """``n`` agents, ``m`` items, additive valuations ``values[i][g]`` (exact, >= 0).

    >>> inst = Instance([[1, 2], [3, 0]])
    >>> inst.n, inst.m
    (2, 2)
    """

    values: tuple[tuple[Fraction, ...], ...]
    label: str | None = None

    def __init__(self, values: Sequence[Sequence], label: str | None = None):
        rows = tuple(tuple(as_exact(x) for x in row) for row in values)
        if not rows:
            raise UsageError("an instance needs at least one agent")
        m = len(rows[0])
        if any(len(r) != m for r in rows):
            raise UsageError("ragged valuation matrix")
        if m > MAX_ITEMS:
            raise ResourceError(f"m={m} exceeds the hard cap of {MAX_ITEMS} items")
        if any(x < 0 for r in rows for x in r):
            raise UsageError("valuations must be nonnegative")
        object.__setattr__(self, "values", rows)
        object.__setattr__(self, "label", label)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def m(self) -> int:
        return len(self.values[0])

    @property
    def all_items(self) -> ItemSet:
        return full_set(self.m)

    @cached_property
    def denominator(self) -> int:
        """Least common denominator of all entries."""
        return lcm(1, *(x.denominator for r in self.values for x in r))

    @cached_property
    def int_values(self) -> tuple[tuple[int, ...], ...]:
        """The valuation matrix scaled by :attr:`denominator` to integers."""
        d = self.denominator
        return tuple(tuple(int(x * d) for x in r) for r in self.values)

    def weights(self, agent: int) -> tuple[int, ...]:
        self.check_agent(agent)
        return self.int_values[agent]

    @cached_property
    def _memo(self) -> dict:
        return {}

    def memo(self, key, factory):
        """Per-instance cache for derived tables. ``factory()`` runs once per key."""
        try:
            return self._memo[key]
        except KeyError:
            out = self._memo[key] = factory()
            return out

    def subset_values(self, agent: int) -> list[int]:
        """Scaled value of every bundle, indexed by bitmask (cached, m <= 20)."""
        self.check_agent(agent)
        if self.m > _TABLE_ITEMS:
            raise ResourceError(f"subset table needs m <= {_TABLE_ITEMS}, got {self.m}")
        return self.memo(("subset", agent), lambda: _subset_sums(self.int_values[agent]))

    def ivalue(self, agent: int, mask: ItemSet) -> int:
        """Scaled (integer) value of a bundle; exact, comparable within the instance."""
        if self.m <= 16:
            return self.subset_values(agent)[mask]
        w = self.int_values[agent]
        return sum(w[g] for g in items_of(mask))

    def check_agent(self, agent: int) -> None:
        if not 0 <= agent < self.n:
            raise UsageError(f"agent index {agent} out of range for n={self.n}")

    def check_set(self, mask: ItemSet) -> None:
        if mask < 0 or mask >> self.m:
            raise UsageError(f"item set {mask:#x} has bits outside 0..{self.m - 1}")


def _subset_sums(weights: Sequence[int]) -> list[int]:
    table = [0]
    for w in weights:
        table += [s + w for s in table]
    return table


def value(inst: Instance, agent: int, s: ItemSet) -> Fraction:
    """Exact additive value of bundle ``s`` for ``agent``."""
    inst.check_agent(agent)
    inst.check_set(s)
    return Fraction(inst.ivalue(agent, s), inst.denominator)


def scale_to_integers(inst: Instance) -> tuple[Instance, int]:
    """Multiply every entry by the common denominator. Returns ``(scaled, factor)``."""
    d = inst.denominator
    if d == 1:
        return inst, 1
    return Instance(inst.int_values, label=inst.label), d


def perturb(inst: Instance) -> Instance:
    """Add ``(1/2)**(j+1)`` to every agent's value of item ``j``.

    The result is non-degenerate for every agent, and every strict preference
    between bundles in ``inst`` is kept. Inputs must be integer-valued; use
    :func:`scale_to_integers` on rational instances first.
    """
    if any(x.denominator != 1 for r in inst.values for x in r):
        raise UsageError("perturb needs integer valuations; call scale_to_integers first")
    bumps = [Fraction(1, 2 ** (j + 1)) for j in range(inst.m)]
    rows = [[x + b for x, b in zip(r, bumps)] for r in inst.values]
    label = f"{inst.label} (perturbed)" if inst.label else None
    return Instance(rows, label=label)


def is_non_degenerate(inst: Instance, agent: int) -> bool:
    """True iff the agent gives pairwise distinct values to all ``2**m`` bundles."""
    inst.check_agent(agent)
    w = inst.int_values[agent]
    if inst.m <= _TABLE_ITEMS:
        sums = inst.subset_values(agent)
        return len(set(sums)) == len(sums)
    if sum(w) < 2**62:
        sums = np.zeros(1, dtype=np.int64)
        for x in w:
            sums = np.concatenate([sums, sums + x])
        return np.unique(sums).size == sums.size
    # beyond int64 and beyond the table cap; slow but exact
    sums = _subset_sums(w)
    return len(set(sums)) == len(sums)


@dataclass(frozen=True)
class Allocation:
    """Per-agent bundles over ``m`` items; partial when some items are unassigned."""

    bundles: tuple[ItemSet, ...]
    m: int

    def __init__(self, bundles: Sequence[ItemSet], m: int):
        bundles = tuple(int(b) for b in bundles)
        seen = 0
        for b in bundles:
            if b < 0 or b >> m:
                raise UsageError(f"bundle {b:#x} has items outside 0..{m - 1}")
            if b & seen:
                raise UsageError("bundles overlap")
            seen |= b
        object.__setattr__(self, "bundles", bundles)
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return len(self.bundles)

    @property
    def allocated(self) -> ItemSet:
        out = 0
        for b in self.bundles:
            out |= b
        return out

    @property
    def complete(self) -> bool:
        return self.allocated == full_set(self.m)

    def check_against(self, inst: Instance) -> None:
        if self.n != inst.n or self.m != inst.m:
            raise UsageError(
                f"allocation shape ({self.n} bundles, {self.m} items) does not match "
                f"instance ({inst.n} agents, {inst.m} items)"
            )

    def as_lists(self) -> list[list[int]]:
        return [items_of(b) for b in self.bundles]

    @classmethod
    def from_lists(cls, bundles: Sequence[Iterable[int]], m: int) -> "Allocation":
        return cls([itemset(b) for b in bundles], m)
