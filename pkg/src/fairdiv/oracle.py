"""Brute-force ground truth and verification suites.

Nothing here shares code paths with the solver beyond the basic valuation
and checker primitives: allocations are found by scanning every labelled
assignment, and the residual feasibility of ``theta`` is checked by listing
removal families one by one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .core import (
    Allocation,
    Instance,
    ItemSet,
    ResourceError,
    UsageError,
    format_items,
    format_value,
    is_non_degenerate,
    perturb,
    scale_to_integers,
)
from .divider import divide_bruteforce, divide_constructive, solve_efl_eefx
from .fairness import check_allocation, feasibility_table
from .shares import mms_value, mxs, residual_self_feasible, rmms, theta

__all__ = [
    "PREDICATES",
    "brute_force_solve",
    "random_instance",
    "removal_families",
    "ShareChainReport",
    "ResidualReport",
    "InstanceReport",
    "SuiteReport",
    "verify_share_chain",
    "verify_theorem2",
    "verify_instance",
    "verify_suite",
]

PREDICATES = ("EF", "EF1", "EFL", "EFX", "EEFX", "EFL+EEFX")

DEFAULT_BUDGET = 10**7


def brute_force_solve(
    inst: Instance, predicate: str, budget: int = DEFAULT_BUDGET
) -> Allocation | None:
    """First complete allocation satisfying ``predicate``, scanning all ``n**m`` assignments.

    Assignments are visited in lexicographic order of the owner vector
    ``(owner of g1, owner of g2, ...)``.

    >>> brute_force_solve(Instance([[1], [1]]), "EF") is None
    True
    >>> brute_force_solve(Instance([[1], [1]]), "EF1").as_lists()
    [[0], []]
    """
    if predicate not in PREDICATES:
        raise UsageError(f"predicate must be one of {', '.join(PREDICATES)}")
    n, m = inst.n, inst.m
    if n**m > budget:
        raise ResourceError(f"{n}**{m} assignments exceed the budget of {budget}")
    need_eefx = "EEFX" in predicate
    envy_notion = {"EF": "ef", "EF1": "ef1", "EFL": "efl", "EFX": "efx", "EFL+EEFX": "efl"}.get(predicate)
    feas = [feasibility_table(inst, a) for a in range(n)] if need_eefx else None
    for owners in itertools.product(range(n), repeat=m):
        bundles = [0] * n
        for g, a in enumerate(owners):
            bundles[a] |= 1 << g
        if need_eefx and not all(feas[a][bundles[a]] for a in range(n)):
            continue
        alloc = Allocation(bundles, m)
        if envy_notion is None or check_allocation(inst, alloc).holds(envy_notion):
            return alloc
    return None


def random_instance(seed: int, n: int, m: int, vmax: int = 20, non_degenerate: bool = False) -> Instance:
    """Uniform integer valuations in ``[0, vmax]``; the same seed gives the same instance."""
    if n < 1 or m < 0 or vmax < 0:
        raise UsageError("need n >= 1, m >= 0 and vmax >= 0")
    rows = np.random.default_rng(seed).integers(0, vmax + 1, size=(n, m)).tolist()
    inst = Instance(rows, label=f"random seed={seed} n={n} m={m} vmax={vmax}")
    return perturb(inst) if non_degenerate else inst


def removal_families(inst: Instance, agent: int, k: int, below) -> Iterator[tuple[ItemSet, ...]]:
    """Every unordered family of ``k`` pairwise disjoint bundles each worth less than ``below``.

    Bundles may be empty. Each family is produced once, with its nonempty
    bundles ordered by lowest item and the empty ones last.
    """
    bound = Fraction(below) * inst.denominator
    m = inst.m
    parts: list[ItemSet] = []

    def rec(g):
        if g == m:
            yield tuple(parts) + (0,) * (k - len(parts))
            return
        yield from rec(g + 1)  # item g stays in the pool
        bit = 1 << g
        for j in range(len(parts)):
            if inst.ivalue(agent, parts[j] | bit) < bound:
                parts[j] |= bit
                yield from rec(g + 1)
                parts[j] ^= bit
        if len(parts) < k and inst.ivalue(agent, bit) < bound:
            parts.append(bit)
            yield from rec(g + 1)
            parts.pop()

    if k == 0 or bound > 0:
        yield from rec(0)


@dataclass
class ShareChainReport:
    """MXS <= theta <= RMMS <= MMS for each agent, on the perturbed instance if needed."""

    perturbed: bool
    rows: list[dict]
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _working(inst: Instance) -> tuple[Instance, bool]:
    work, _ = scale_to_integers(inst)
    if all(is_non_degenerate(work, a) for a in range(work.n)):
        return inst, False
    return perturb(work), True


def verify_share_chain(inst: Instance) -> ShareChainReport:
    """Compute the four shares per agent and check their order exactly.

    Degenerate instances are scaled and perturbed first, since ``theta`` is
    only guaranteed to sit inside the chain without ties. Values in the
    report are in the units of the instance actually used.
    """
    work, perturbed = _working(inst)
    rows, bad = [], []
    for a in range(work.n):
        s_mxs, s_th, s_rmms, s_mms = mxs(work, a), theta(work, a), rmms(work, a), mms_value(work, a)
        rows.append(
            {
                "agent": a,
                "mxs": s_mxs,
                "theta": s_th,
                "rmms": s_rmms,
                "mms": s_mms,
                "theta_minus_mxs": s_th - s_mxs,
                "mms_minus_theta": s_mms - s_th,
            }
        )
        for lo, hi, names in (
            (s_mxs, s_th, "MXS <= theta"),
            (s_th, s_rmms, "theta <= RMMS"),
            (s_rmms, s_mms, "RMMS <= MMS"),
        ):
            if lo > hi:
                bad.append(f"agent {a}: {names} fails ({format_value(lo)} > {format_value(hi)})")
    return ShareChainReport(perturbed, rows, bad)


@dataclass
class ResidualReport:
    """Residual feasibility of ``theta`` for one agent.

    ``families`` counts the removal families enumerated; ``witness`` is a
    family after which the pool cannot be split, if one was found.
    """

    agent: int
    theta: Fraction
    table_check: bool
    families: int
    witness: tuple[ItemSet, ...] | None
    constructive_checked: int
    constructive_failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.table_check and self.witness is None and self.constructive_failure is None


def verify_theorem2(inst: Instance, agent: int, enumerate_up_to: int = 8) -> ResidualReport:
    """Check that ``theta`` is residual self-feasible, twice.

    First with the partition tables behind :func:`residual_self_feasible`.
    Then, for ``m <= enumerate_up_to``, by listing every family of ``k < n``
    disjoint bundles worth less than ``theta`` and searching for a split of
    what remains into ``n - k`` parts worth at least ``theta``. The first
    family per remaining pool is also handed to the constructive divider.
    """
    if not is_non_degenerate(inst, agent):
        raise UsageError("verify_theorem2 needs a non-degenerate instance; perturb first")
    th = theta(inst, agent)
    report = ResidualReport(agent, th, residual_self_feasible(inst, agent, th), 0, None, 0)
    if inst.m > enumerate_up_to:
        return report
    cache: dict[tuple[ItemSet, int], bool] = {}
    for k in range(inst.n):
        for fam in removal_families(inst, agent, k, th):
            report.families += 1
            used = 0
            for b in fam:
                used |= b
            pool = inst.all_items & ~used
            key = (pool, inst.n - k)
            if key in cache:
                if not cache[key]:
                    report.witness = report.witness or fam
                continue
            cache[key] = divide_bruteforce(inst, agent, pool, inst.n - k, th) is not None
            if not cache[key]:
                report.witness = report.witness or fam
                continue
            try:
                divide_constructive(inst, agent, pool, list(fam))
                report.constructive_checked += 1
            except Exception as exc:  # report, don't hide: any failure here is a bug
                report.constructive_failure = f"removed {[format_items(b) for b in fam]}: {exc}"
    return report


@dataclass
class InstanceReport:
    label: str | None
    chain: ShareChainReport
    residual: list[ResidualReport]
    solved: bool
    solver_error: str | None
    oracle_found: bool | None
    allocation: list[list[int]] | None

    @property
    def ok(self) -> bool:
        return (
            self.chain.ok
            and all(t.ok for t in self.residual)
            and self.solved
            and self.oracle_found is not False
        )


def verify_instance(inst: Instance, oracle_budget: int = 10**5) -> InstanceReport:
    """Share chain, residual feasibility for every agent, the solver and the brute-force oracle.

    The oracle is skipped (``oracle_found`` None) when ``n**m`` exceeds
    ``oracle_budget``.
    """
    chain = verify_share_chain(inst)
    work, _ = _working(inst)
    residual = [verify_theorem2(work, a) for a in range(work.n)]
    try:
        alloc = solve_efl_eefx(inst).allocation
        solved, err, lists = True, None, alloc.as_lists()
    except Exception as exc:
        solved, err, lists = False, f"{type(exc).__name__}: {exc}", None
    found = None
    if inst.n**inst.m <= oracle_budget:
        found = brute_force_solve(inst, "EFL+EEFX", budget=oracle_budget) is not None
    return InstanceReport(inst.label, chain, residual, solved, err, found, lists)


@dataclass
class SuiteReport:
    seed: int
    count: int
    instances: list[InstanceReport]

    @property
    def passed(self) -> int:
        return sum(r.ok for r in self.instances)

    @property
    def ok(self) -> bool:
        return self.passed == self.count


def suite_instances(seed: int, count: int, n: int = 3, m_range=(4, 8), vmax: int = 20) -> list[Instance]:
    """Deterministic list of random instances; instance ``j`` uses seed ``seed * 100003 + j``."""
    rng = np.random.default_rng(seed)
    ms = rng.integers(m_range[0], m_range[1] + 1, size=count).tolist()
    return [random_instance(seed * 100003 + j, n, ms[j], vmax) for j in range(count)]


def verify_suite(
    seed: int, count: int, n: int = 3, m_range=(4, 8), vmax: int = 20, oracle_budget: int = 10**5
) -> SuiteReport:
    """Run :func:`verify_instance` on ``count`` seeded random instances."""
    insts = suite_instances(seed, count, n, m_range, vmax)
    return SuiteReport(seed, count, [verify_instance(i, oracle_budget) for i in insts])
