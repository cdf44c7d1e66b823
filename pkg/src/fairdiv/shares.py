"""Share values of a single agent: MMS, MXS, the strong EEFX share and RMMS.

All routines are exhaustive (``m <= 12``) and exact. Values are returned as
Fractions in the units of the instance.

The strong EEFX share ``theta`` is the smallest bundle value above which
every bundle is EEFX feasible. On a non-degenerate instance the largest
infeasible bundle ``T`` is unique and ``theta`` is the next bundle value
strictly above ``v(T)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .combinat import Partition
from .core import Instance, ItemSet, ResourceError, UsageError, as_exact, is_non_degenerate
from .fairness import feasibility_table, _minmax_partition

__all__ = [
    "ShareProfile",
    "mms",
    "mms_value",
    "mxs",
    "max_infeasible_bundle",
    "theta",
    "theta_by_definition",
    "residual_self_feasible",
    "rmms",
    "rmms_linear",
    "share_profile",
    "SHARE_MAX_ITEMS",
]

SHARE_MAX_ITEMS = 12


def _check(inst: Instance, agent: int) -> None:
    inst.check_agent(agent)
    if inst.m > SHARE_MAX_ITEMS:
        raise ResourceError(f"share computations need m <= {SHARE_MAX_ITEMS}, got {inst.m}")


def _require_non_degenerate(inst: Instance, agent: int) -> None:
    if not is_non_degenerate(inst, agent):
        raise UsageError(
            f"agent {agent} has ties between bundle values; perturb the instance first "
            "(or pass allow_degenerate=True)"
        )


def _frac(inst: Instance, x: int) -> Fraction:
    return Fraction(x, inst.denominator)


def _maxmin_levels(sums: list[int], m: int, k: int) -> list[list[int]]:
    """``levels[j][C]`` = max over splits of ``C`` into ``j`` parts of the min part value.

    Empty parts are allowed, so ``levels[j][C]`` is 0 whenever ``C`` has fewer
    than ``j`` items. Index 0 is unused.
    """
    size = 1 << m
    levels = [None, list(sums)]
    for _ in range(2, k + 1):
        prev = levels[-1]
        cur = [0] * size
        for C in range(1, size):
            low = C & -C
            others = C ^ low
            best = 0
            sub = others
            while True:
                part = low | sub
                c = sums[part]
                if c > best:
                    r = prev[others ^ sub]
                    if r < c:
                        c = r
                    if c > best:
                        best = c
                if sub == 0:
                    break
                sub = (sub - 1) & others
            cur[C] = best
        levels.append(cur)
    return levels


def _maxmin_tables(inst: Instance, agent: int) -> list[list[int]]:
    return inst.memo(
        ("maxmin", agent),
        lambda: _maxmin_levels(inst.subset_values(agent), inst.m, inst.n),
    )


def _minmax_value_tables(inst: Instance, agent: int) -> list[list[int]]:
    """``out[k][U]`` = min over splits of ``U`` into ``k`` parts of the max part value."""

    def build():
        sums = inst.subset_values(agent)
        out = [None]
        for k in range(1, inst.n):
            out.append(_minmax_partition(sums, inst.m, k))
        return out

    return inst.memo(("minmax", agent), build)


def _witness_split(sums: list[int], levels, C: ItemSet, k: int) -> list[ItemSet]:
    """Recover a split of ``C`` into ``k`` parts achieving ``levels[k][C]``."""
    if k == 1:
        return [C]
    target = levels[k][C]
    if C == 0:
        return [0] * k
    low = C & -C
    others = C ^ low
    sub = others
    while True:
        part = low | sub
        if sums[part] >= target and levels[k - 1][others ^ sub] >= target:
            return [part] + _witness_split(sums, levels, others ^ sub, k - 1)
        if sub == 0:
            break
        sub = (sub - 1) & others
    raise AssertionError("unreachable: table value has no witness")


def mms(inst: Instance, agent: int) -> tuple[Fraction, Partition]:
    """Maximin share and a partition of all items attaining it.

    >>> inst = Instance([[3, 2, 2], [1, 1, 1]])
    >>> mms(inst, 0)[0]
    Fraction(3, 1)
    """
    _check(inst, agent)
    levels = _maxmin_tables(inst, agent)
    full = inst.all_items
    parts = _witness_split(inst.subset_values(agent), levels, full, inst.n)
    return _frac(inst, levels[inst.n][full]), Partition(parts, full)


def mms_value(inst: Instance, agent: int) -> Fraction:
    return mms(inst, agent)[0]


def mxs(inst: Instance, agent: int) -> Fraction:
    """Smallest value of an EEFX-feasible bundle."""
    _check(inst, agent)
    feas = feasibility_table(inst, agent)
    sums = inst.subset_values(agent)
    return _frac(inst, min(s for s, ok in zip(sums, feas) if ok))


def max_infeasible_bundle(inst: Instance, agent: int) -> ItemSet | None:
    """The highest-valued EEFX-infeasible bundle, or None if every bundle is feasible.

    Needs a non-degenerate instance so that the answer is unique.
    """
    _check(inst, agent)
    _require_non_degenerate(inst, agent)
    feas = feasibility_table(inst, agent)
    sums = inst.subset_values(agent)
    bad = [b for b, ok in enumerate(feas) if not ok]
    if not bad:
        return None
    return max(bad, key=lambda b: sums[b])


def theta(inst: Instance, agent: int, allow_degenerate: bool = False) -> Fraction:
    """Strong EEFX share.

    Scans bundles from the most valuable down to the first infeasible one,
    ``T``, and returns the smallest bundle value strictly above ``v(T)``
    (0 when nothing is infeasible). With ``allow_degenerate=True`` ties are
    permitted and the scan by definition is used instead.
    """
    _check(inst, agent)
    if allow_degenerate and not is_non_degenerate(inst, agent):
        return theta_by_definition(inst, agent)
    _require_non_degenerate(inst, agent)
    feas = feasibility_table(inst, agent)
    sums = inst.subset_values(agent)
    order = sorted(range(1 << inst.m), key=lambda b: sums[b], reverse=True)
    prev = None
    for b in order:
        if not feas[b]:
            # prev is the successor of T in ascending value order; M is always feasible
            return _frac(inst, sums[prev])
        prev = b
    return Fraction(0)


def theta_by_definition(inst: Instance, agent: int) -> Fraction:
    """Smallest bundle value ``x`` such that all bundles worth at least ``x`` are feasible.

    Works with ties. Independent of :func:`theta`'s search for ``T``. The
    only case with no such value is a single agent with a zero-valued item
    (``M`` minus that item ties with ``M`` but is infeasible); there the
    share is ``v(M)``, the only sensible value for one agent.
    """
    _check(inst, agent)
    feas = feasibility_table(inst, agent)
    sums = inst.subset_values(agent)
    all_ok = {}
    for s, ok in zip(sums, feas):
        all_ok[s] = all_ok.get(s, True) and ok
    # walk values downward while every bundle at or above the value is feasible
    answer = None
    for x in sorted(all_ok, reverse=True):
        if not all_ok[x]:
            break
        answer = x
    if answer is None:
        answer = sums[inst.all_items]
    return _frac(inst, answer)


def _rsf_scaled(inst: Instance, agent: int, t: int) -> bool:
    n = inst.n
    full = inst.all_items
    maxmin = _maxmin_tables(inst, agent)
    if maxmin[n][full] < t:
        return False
    if t <= 0:
        return True
    minmax = _minmax_value_tables(inst, agent)
    size = 1 << inst.m
    for k in range(1, n):
        removable = minmax[k]
        remain = maxmin[n - k]
        for U in range(size):
            if removable[U] < t and remain[full ^ U] < t:
                return False
    return True


def _scaled_threshold(inst: Instance, t) -> Fraction:
    return as_exact(t) * inst.denominator


def residual_self_feasible(inst: Instance, agent: int, t) -> bool:
    """Whether threshold ``t`` survives every removal of ``k < n`` bundles worth less than ``t``.

    For each ``k`` the removed bundles only matter through their union ``U``:
    ``U`` is removable when it splits into ``k`` parts each below ``t``, and
    the rest must split into ``n - k`` parts each at least ``t``. Both
    conditions come from precomputed min-max / max-min partition tables.
    """
    _check(inst, agent)
    scaled = _scaled_threshold(inst, t)
    # all bundle values are integers after scaling, so rounding up is lossless
    ceil = -((-scaled.numerator) // scaled.denominator)
    return _rsf_scaled(inst, agent, ceil)


def _candidates(inst: Instance, agent: int) -> list[int]:
    return sorted(set(inst.subset_values(agent)))


def rmms(inst: Instance, agent: int) -> Fraction:
    """Residual maximin share: the largest residual self-feasible threshold.

    Feasibility is constant between consecutive bundle values and closed
    downward, so a binary search over the sorted distinct bundle values is
    enough.
    """
    _check(inst, agent)
    cand = _candidates(inst, agent)
    lo, hi = 0, len(cand) - 1  # cand[0] == 0 always passes
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _rsf_scaled(inst, agent, cand[mid]):
            lo = mid
        else:
            hi = mid - 1
    return _frac(inst, cand[lo])


def rmms_linear(inst: Instance, agent: int) -> Fraction:
    """Same as :func:`rmms` by scanning every candidate; used to cross-check."""
    _check(inst, agent)
    best = 0
    for t in _candidates(inst, agent):
        if _rsf_scaled(inst, agent, t):
            best = t
    return _frac(inst, best)


@dataclass(frozen=True)
class ShareProfile:
    agent: int
    mms: Fraction
    mxs: Fraction
    theta: Fraction | None
    rmms: Fraction
    t_witness: ItemSet | None
    mms_witness: Partition

    def chain_holds(self) -> bool:
        if self.theta is None:
            return self.mxs <= self.rmms <= self.mms
        return self.mxs <= self.theta <= self.rmms <= self.mms


def share_profile(inst: Instance, agent: int) -> ShareProfile:
    """All four shares for one agent. ``theta`` is None on degenerate instances."""
    mms_val, witness = mms(inst, agent)
    if is_non_degenerate(inst, agent):
        th = theta(inst, agent)
        t_bundle = max_infeasible_bundle(inst, agent)
    else:
        th, t_bundle = None, None
    return ShareProfile(
        agent=agent,
        mms=mms_val,
        mxs=mxs(inst, agent),
        theta=th,
        rmms=rmms(inst, agent),
        t_witness=t_bundle,
        mms_witness=witness,
    )
