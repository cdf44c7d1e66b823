"""Envy-based fairness checks and EEFX feasibility of bundles.

A bundle ``B`` is EEFX feasible for agent ``i`` when the remaining items can
be split into ``n - 1`` parts such that ``i``, holding ``B``, does not strongly
envy any of them. The split is returned as a :class:`Certificate`.

Two routes decide feasibility:

* :func:`is_eefx_feasible` walks the canonical partitions of ``M \\ B`` and
  returns the first valid certificate. This is the reference semantics.
* :func:`feasibility_table` answers all ``2**m`` bundles at once with a
  min-max partition recurrence. Shares and sweeps use it; the test-suite
  checks it bundle by bundle against the exhaustive search.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .combinat import MAX_PARTITION_GROUND, Partition, first_partition
from .core import (
    Allocation,
    Instance,
    ItemSet,
    ResourceError,
    UsageError,
    items_of,
)
from .efxpart import efx_partition

__all__ = [
    "Certificate",
    "PairVerdict",
    "EnvyReport",
    "Verdict",
    "max_removal_value",
    "strong_envy_witness",
    "strongly_envies",
    "check_allocation",
    "is_eefx_feasible",
    "is_eefx_feasible_fast",
    "is_allocation_eefx",
    "feasibility_table",
    "removal_table",
]

MAX_TABLE_ITEMS = 12


def _min_item(w, mask: ItemSet) -> int | None:
    """Index of the lowest-valued item in ``mask`` (smallest index on ties)."""
    best = None
    for g in items_of(mask):
        if best is None or w[g] < w[best]:
            best = g
    return best


def max_removal_value(inst: Instance, agent: int, mask: ItemSet) -> int:
    """Largest scaled value of ``mask`` minus one item (0 for the empty set)."""
    if not mask:
        return 0
    w = inst.int_values[agent]
    return inst.ivalue(agent, mask) - w[_min_item(w, mask)]


def removal_table(inst: Instance, agent: int) -> list[int]:
    """:func:`max_removal_value` for every bitmask, cached."""

    def build():
        w = inst.int_values[agent]
        sums = inst.subset_values(agent)
        size = 1 << inst.m
        low_w = [0] * size
        rem = [0] * size
        for mask in range(1, size):
            low = mask & -mask
            wg = w[low.bit_length() - 1]
            rest = mask ^ low
            low_w[mask] = wg if not rest else min(wg, low_w[rest])
            rem[mask] = sums[mask] - low_w[mask]
        return rem

    return inst.memo(("removal", agent), build)


def strong_envy_witness(inst: Instance, i: int, own: ItemSet, other: ItemSet) -> int | None:
    """An item ``g`` of ``other`` with ``v_i(other - g) > v_i(own)``, or None."""
    inst.check_agent(i)
    inst.check_set(own)
    inst.check_set(other)
    if own & other:
        raise UsageError("own and other bundles overlap")
    if not other:
        return None
    w = inst.int_values[i]
    g = _min_item(w, other)
    if inst.ivalue(i, other) - w[g] > inst.ivalue(i, own):
        return g
    return None


def strongly_envies(inst: Instance, i: int, own: ItemSet, other: ItemSet) -> bool:
    """True iff agent ``i`` holding ``own`` strongly envies ``other``."""
    return strong_envy_witness(inst, i, own, other) is not None


@dataclass(frozen=True)
class PairVerdict:
    """How agent ``i`` sees agent ``j``'s bundle.

    ``ef1_item`` / ``efl_item`` name the removed item that satisfies the
    corresponding clause (None when no removal was needed or none works).
    ``efl_clause`` is 1 when the envied bundle has at most one positively
    valued item, 2 when the removal clause holds. ``efx_violator`` is an item
    whose removal still leaves envy.
    """

    ef: bool
    ef1: bool
    efl: bool
    efx: bool
    ef1_item: int | None = None
    efl_item: int | None = None
    efl_clause: int | None = None
    efx_violator: int | None = None


@dataclass(frozen=True)
class EnvyReport:
    pairs: dict[tuple[int, int], PairVerdict]

    def holds(self, notion: str) -> bool:
        return all(getattr(p, notion) for p in self.pairs.values())

    @property
    def ef(self) -> bool:
        return self.holds("ef")

    @property
    def ef1(self) -> bool:
        return self.holds("ef1")

    @property
    def efl(self) -> bool:
        return self.holds("efl")

    @property
    def efx(self) -> bool:
        return self.holds("efx")

    def failures(self, notion: str) -> list[tuple[int, int]]:
        return [ij for ij, p in self.pairs.items() if not getattr(p, notion)]


def _pair_verdict(inst: Instance, i: int, own: ItemSet, other: ItemSet) -> PairVerdict:
    w = inst.int_values[i]
    mine = inst.ivalue(i, own)
    theirs = inst.ivalue(i, other)
    goods = items_of(other)
    ef = mine >= theirs

    ef1_item = None
    ef1 = ef
    if not ef:
        for g in goods:
            if mine >= theirs - w[g]:
                ef1, ef1_item = True, g
                break

    efl_item, efl_clause = None, None
    if sum(1 for g in goods if w[g] > 0) <= 1:
        efl_clause = 1
    else:
        for g in goods:
            if mine >= theirs - w[g] and mine >= w[g]:
                efl_item, efl_clause = g, 2
                break
    efl = efl_clause is not None

    efx_violator = None
    for g in goods:
        if mine < theirs - w[g]:
            efx_violator = g
            break
    efx = efx_violator is None

    return PairVerdict(ef, ef1, efl, efx, ef1_item, efl_item, efl_clause, efx_violator)


def check_allocation(inst: Instance, alloc: Allocation) -> EnvyReport:
    """EF, EF1, EFL and EFX verdicts for every ordered pair of distinct agents."""
    alloc.check_against(inst)
    pairs = {}
    for i in range(inst.n):
        for j in range(inst.n):
            if i != j:
                pairs[i, j] = _pair_verdict(inst, i, alloc.bundles[i], alloc.bundles[j])
    return EnvyReport(pairs)


@dataclass(frozen=True)
class Certificate:
    """A split of ``M \\ bundle`` into ``n - 1`` parts none of which ``owner`` strongly envies."""

    owner: int
    bundle: ItemSet
    parts: Partition

    def is_valid(self, inst: Instance) -> bool:
        if self.bundle & self.parts.ground:
            return False
        if self.bundle | self.parts.ground != inst.all_items:
            return False
        if self.parts.k != inst.n - 1:
            return False
        own = inst.ivalue(self.owner, self.bundle)
        return all(max_removal_value(inst, self.owner, p) <= own for p in self.parts)


def _check_size(inst: Instance, cap: int) -> None:
    if inst.m > cap:
        raise ResourceError(f"exhaustive feasibility needs m <= {cap}, got {inst.m}")


def is_eefx_feasible(inst: Instance, agent: int, bundle: ItemSet) -> Certificate | None:
    """First EEFX certificate for ``bundle`` in canonical partition order, or None.

    The search is complete, so None means the bundle is infeasible. With a
    single agent only ``M`` itself is feasible (with zero parts).
    """
    inst.check_agent(agent)
    inst.check_set(bundle)
    _check_size(inst, MAX_PARTITION_GROUND)
    rest = inst.all_items ^ bundle
    own = inst.ivalue(agent, bundle)
    parts = first_partition(rest, inst.n - 1, lambda p: max_removal_value(inst, agent, p) <= own)
    if parts is None:
        return None
    return Certificate(agent, bundle, parts)


class Verdict(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE_HINT = "infeasible_hint"
    UNKNOWN = "unknown"


def is_eefx_feasible_fast(
    inst: Instance, agent: int, bundle: ItemSet
) -> tuple[Verdict, Certificate | None]:
    """Cheap sufficient test for feasibility, plus a cheap necessary one.

    FEASIBLE comes with a certificate built from an EFX partition of the
    remaining items. INFEASIBLE_HINT means a counting bound already rules the
    bundle out: each part can exceed the owner's value by at most its own
    smallest item, so the rest can be worth at most ``(n-1) * v(B)`` plus the
    ``n-1`` largest remaining items. Otherwise UNKNOWN.
    """
    inst.check_agent(agent)
    inst.check_set(bundle)
    n = inst.n
    rest = inst.all_items ^ bundle
    if n == 1:
        if rest:
            return Verdict.INFEASIBLE_HINT, None
        return Verdict.FEASIBLE, Certificate(agent, bundle, Partition((), 0))
    w = inst.int_values[agent]
    own = inst.ivalue(agent, bundle)
    parts = efx_partition(w, rest, n - 1)
    if all(max_removal_value(inst, agent, p) <= own for p in parts):
        return Verdict.FEASIBLE, Certificate(agent, bundle, parts)
    top = sorted((w[g] for g in items_of(rest)), reverse=True)[: n - 1]
    if inst.ivalue(agent, rest) > (n - 1) * own + sum(top):
        return Verdict.INFEASIBLE_HINT, None
    return Verdict.UNKNOWN, None


def is_allocation_eefx(inst: Instance, alloc: Allocation) -> tuple[bool, list[Certificate | None]]:
    """Whether every bundle is EEFX feasible for its owner, with the certificates."""
    alloc.check_against(inst)
    certs = [is_eefx_feasible(inst, i, b) for i, b in enumerate(alloc.bundles)]
    return all(c is not None for c in certs), certs


def _minmax_partition(cost: list[int], m: int, k: int) -> list[int]:
    """``out[C]`` = min over splits of ``C`` into ``k`` parts of the max part cost.

    ``cost`` must satisfy ``cost[0] == 0``; empty parts are allowed.
    """
    level = list(cost)
    size = 1 << m
    for _ in range(min(k, m) - 1):
        nxt = [0] * size
        for C in range(1, size):
            low = C & -C
            others = C ^ low
            best = level[C]
            sub = others
            while sub:
                sub = (sub - 1) & others
                c = cost[low | sub]
                if c < best:
                    r = level[others ^ sub]
                    if r > c:
                        c = r
                    if c < best:
                        best = c
            nxt[C] = best
        level = nxt
    return level


def feasibility_table(inst: Instance, agent: int) -> list[bool]:
    """EEFX feasibility of every bundle for ``agent``, indexed by bitmask (m <= 12).

    A part is acceptable exactly when its largest single-removal value is at
    most the owner's value, and acceptability is closed under taking subsets.
    So ``B`` is feasible iff ``M \\ B`` splits into ``n - 1`` parts whose worst
    removal value is at most ``v(B)``, which one min-max recurrence over all
    subsets answers for every ``B`` at once.
    """
    inst.check_agent(agent)
    _check_size(inst, MAX_TABLE_ITEMS)

    def build():
        m, n = inst.m, inst.n
        full = inst.all_items
        if n == 1:
            return [b == full for b in range(1 << m)]
        sums = inst.subset_values(agent)
        worst = _minmax_partition(removal_table(inst, agent), m, n - 1)
        return [worst[full ^ b] <= sums[b] for b in range(1 << m)]

    return inst.memo(("feasible", agent), build)
