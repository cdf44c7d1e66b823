"""Lone-divider allocation with envy guarantees, and the EFL + EEFX solver.

The pipeline behind :func:`solve_efl_eefx`:

1. scale to integers and perturb, so that no agent has ties between bundles;
2. give every agent the threshold ``theta_i`` (strong EEFX share);
3. run the lone divider with bundle shrinking and reassignment
   (:func:`algorithm2`), which leaves a partial allocation that is EFX among
   the agents and gives everyone at least their threshold;
4. hand out the leftover items without breaking EFL
   (:func:`complete_allocation`);
5. audit the result on the original valuations.

The divider splits the pool with :func:`divide_constructive`, which follows
the existence proof step by step: an EFX partition of ``M \\ T`` when nothing
has been removed, otherwise :func:`lemma4_partition` on the removed items and
:func:`lemma5_divide` on the rest. Each step asserts the inequality the proof
relies on, so a failure points at the exact claim that broke.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .combinat import Partition, first_partition, partitions_into
from .core import (
    Allocation,
    Instance,
    InvariantViolation,
    ItemSet,
    UsageError,
    is_non_degenerate,
    items_of,
    perturb,
    scale_to_integers,
    value,
)
from .efxpart import efx_partition
from .fairness import (
    Certificate,
    EnvyReport,
    check_allocation,
    is_allocation_eefx,
    strongly_envies,
)
from .shares import max_infeasible_bundle, mms_value, rmms, theta

__all__ = [
    "FeasibilityGraph",
    "DividerState",
    "DivideError",
    "AuditFailure",
    "SolveResult",
    "envy_free_matching",
    "is_envy_free_matching",
    "divide_bruteforce",
    "divide_constructive",
    "lemma4_partition",
    "lemma5_divide",
    "algorithm1",
    "algorithm2",
    "complete_allocation",
    "solve_efl_eefx",
]


class DivideError(RuntimeError):
    """The lone divider could not split the pool at its threshold."""


class AuditFailure(RuntimeError):
    """The solver produced an allocation that fails the EFL or EEFX audit."""

    def __init__(self, message: str, dump: dict):
        super().__init__(message)
        self.dump = dump


# ---------------------------------------------------------------------------
# envy-free matching


@dataclass(frozen=True)
class FeasibilityGraph:
    """Agents on one side, bundles on the other; ``(agent, k)`` is an edge iff
    the agent values bundle ``k`` at least at its threshold."""

    agents: tuple[int, ...]
    bundles: tuple[ItemSet, ...]
    edges: frozenset[tuple[int, int]]

    @classmethod
    def build(
        cls,
        inst: Instance,
        agents: Sequence[int],
        bundles: Sequence[ItemSet],
        thresholds: dict[int, Fraction],
    ) -> "FeasibilityGraph":
        edges = frozenset(
            (a, k)
            for a in agents
            for k, b in enumerate(bundles)
            if value(inst, a, b) >= thresholds[a]
        )
        return cls(tuple(agents), tuple(bundles), edges)

    def neighbors(self, agent: int) -> list[int]:
        return [k for k in range(len(self.bundles)) if (agent, k) in self.edges]


def is_envy_free_matching(g: FeasibilityGraph, matching: dict[int, int]) -> bool:
    """A valid matching in ``g`` with no edge from an unmatched agent to a matched bundle."""
    if len(set(matching.values())) != len(matching):
        return False
    if any((a, k) not in g.edges for a, k in matching.items()):
        return False
    taken = set(matching.values())
    return not any(a not in matching and k in taken for a, k in g.edges)


def envy_free_matching(g: FeasibilityGraph) -> dict[int, int]:
    """Envy-free matching as ``{agent: bundle index}``; may be empty.

    Take a maximum matching, then discard every agent and bundle reachable
    from an unmatched agent by an alternating path. What survives is
    envy-free. If some agent is adjacent to every bundle (the lone divider),
    it is never discarded, so the result is nonempty.
    """
    na, nb = len(g.agents), len(g.bundles)
    if na == 0 or nb == 0:
        return {}
    pos = {a: r for r, a in enumerate(g.agents)}
    rows = [pos[a] for a, _ in sorted(g.edges)]
    cols = [k for _, k in sorted(g.edges)]
    adj = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(na, nb))
    match_row = maximum_bipartite_matching(adj, perm_type="column")
    owner = {int(k): r for r, k in enumerate(match_row) if k >= 0}

    reached_agents = {r for r in range(na) if match_row[r] < 0}
    reached_bundles: set[int] = set()
    frontier = list(reached_agents)
    while frontier:
        r = frontier.pop()
        for k in g.neighbors(g.agents[r]):
            if k in reached_bundles:
                continue
            reached_bundles.add(k)
            partner = owner.get(k)
            if partner is None:
                raise InvariantViolation("matching is not maximum: augmenting path found")
            if partner not in reached_agents:
                reached_agents.add(partner)
                frontier.append(partner)

    out = {
        g.agents[r]: int(match_row[r])
        for r in range(na)
        if match_row[r] >= 0 and r not in reached_agents
    }
    if not is_envy_free_matching(g, out):
        raise InvariantViolation("envy-free matching postcondition failed")
    return out


# ---------------------------------------------------------------------------
# dividing the pool


def divide_bruteforce(
    inst: Instance, agent: int, pool: ItemSet, parts: int, threshold
) -> Partition | None:
    """First split of ``pool`` (canonical order) into ``parts`` parts each worth >= ``threshold``."""
    inst.check_set(pool)
    t = Fraction(threshold) * inst.denominator
    return first_partition(pool, parts, lambda p: inst.ivalue(agent, p) >= t)


def _theta_scaled(inst: Instance, agent: int) -> int:
    th = theta(inst, agent) * inst.denominator
    return int(th)


def _argmax_removal(inst: Instance, agent: int, parts: Sequence[ItemSet], skip_first=False):
    """``(value, part index, item)`` maximizing ``v(part - item)``; ties go to
    the lower part index, then the lower item. None if every part is empty."""
    w = inst.int_values[agent]
    best = None
    for j, p in enumerate(parts):
        if skip_first and j == 0:
            continue
        vp = inst.ivalue(agent, p)
        for g in items_of(p):
            drop = vp - w[g]
            if best is None or drop > best[0]:
                best = (drop, j, g)
    return best


def _check_removed(inst: Instance, agent: int, removed: Sequence[ItemSet], th: int) -> ItemSet:
    union = 0
    for s in removed:
        inst.check_set(s)
        if s & union:
            raise UsageError("removed bundles must be pairwise disjoint")
        union |= s
        if inst.ivalue(agent, s) >= th:
            raise UsageError("every removed bundle must be worth less than the threshold")
    return union


def lemma4_partition(
    inst: Instance, agent: int, removed: Sequence[ItemSet], T: ItemSet
) -> Partition:
    """Re-split the removed items ``S`` into ``Y_1..Y_k`` around ``R = T & S``.

    Postconditions: ``R`` is inside ``Y_1``; ``v(Y_1) < theta``; removing any
    single item from ``Y_2..Y_k`` leaves less than ``theta``. Built by
    repeatedly taking an EFX partition of ``S - Y_1`` into ``k - 1`` parts
    and, while its largest removal value reaches ``theta``, moving the
    item attaining it into ``Y_1``.
    """
    th = _theta_scaled(inst, agent)
    S = _check_removed(inst, agent, removed, th)
    k = len(removed)
    if k == 0:
        raise UsageError("need at least one removed bundle")
    if k == 1:
        return Partition([S], S)
    w = inst.int_values[agent]
    y1 = T & S
    if inst.ivalue(agent, y1) >= th:
        raise InvariantViolation("T & S is worth at least theta")
    for _ in range(S.bit_count() + 1):
        rest = efx_partition(w, S ^ y1, k - 1)
        best = _argmax_removal(inst, agent, rest.parts)
        if best is None or best[0] < th:
            return Partition((y1,) + rest.parts, S)
        g = best[2]
        if inst.ivalue(agent, y1 | (1 << g)) >= th:
            raise InvariantViolation(
                "moving the max-removal item would lift Y_1 to theta; "
                "the removed bundles cannot all be worth less than theta"
            )
        y1 |= 1 << g
    raise InvariantViolation("regrouping the removed items did not finish within |S| moves")


def lemma5_divide(inst: Instance, agent: int, S: ItemSet, U: ItemSet, k: int) -> Partition:
    """Split ``M - S`` into ``n - k`` parts worth at least ``theta``, with ``U`` inside ``X_1``.

    ``X_2..X_{n-k}`` start as an EFX partition of ``(M - S) - U`` (each part
    already reaches ``theta``). While ``X_1`` is short of ``theta``, the item
    whose removal leaves the most value elsewhere moves into ``X_1``; the
    part it leaves must still reach ``theta``.
    """
    th = _theta_scaled(inst, agent)
    n = inst.n
    if not 0 < n - k:
        raise UsageError("need fewer removed bundles than agents")
    if U & S:
        raise UsageError("U must be disjoint from S")
    rest_items = inst.all_items & ~S
    if n - k == 1:
        if inst.ivalue(agent, rest_items) < th:
            raise InvariantViolation("single remaining part is worth less than theta")
        return Partition([rest_items], rest_items)
    w = inst.int_values[agent]
    others = efx_partition(w, rest_items & ~U, n - k - 1)
    if any(inst.ivalue(agent, p) < th for p in others):
        raise InvariantViolation("EFX partition of (M - S) - U has a part below theta")
    parts = [U] + list(others.parts)
    for _ in range(rest_items.bit_count() + 1):
        if inst.ivalue(agent, parts[0]) >= th:
            return Partition(parts, rest_items)
        drop, j, g = _argmax_removal(inst, agent, parts, skip_first=True)
        if drop < th:
            raise InvariantViolation(
                "every removal from X_2.. is below theta while X_1 is short; "
                "this would certify T as EEFX feasible"
            )
        parts[j] ^= 1 << g
        parts[0] |= 1 << g
    raise InvariantViolation("filling X_1 did not finish within |M - S| moves")


def divide_constructive(
    inst: Instance, agent: int, pool: ItemSet, removed: Sequence[ItemSet] = ()
) -> Partition:
    """Split ``pool`` into ``n - len(removed)`` parts each worth at least ``theta``.

    Preconditions: the instance is non-degenerate for ``agent``, the removed
    bundles are disjoint, each is worth less than ``theta``, and ``pool`` is
    everything else.
    """
    inst.check_agent(agent)
    if not is_non_degenerate(inst, agent):
        raise UsageError("divide_constructive needs a non-degenerate instance")
    th = _theta_scaled(inst, agent)
    S = _check_removed(inst, agent, removed, th)
    if pool != inst.all_items & ~S:
        raise UsageError("pool must be exactly the items outside the removed bundles")
    k = len(removed)
    n = inst.n
    if k >= n:
        raise UsageError("need fewer removed bundles than agents")

    if th == 0:
        out = next(partitions_into(pool, n - k))
    elif n - k == 1:
        out = Partition([pool], pool)
    elif k == 0:
        T = max_infeasible_bundle(inst, agent)
        w = inst.int_values[agent]
        ys = list(efx_partition(w, pool & ~T, n - 1).parts)
        best = _argmax_removal(inst, agent, ys)
        if best is None or best[0] <= inst.ivalue(agent, T):
            raise InvariantViolation("EFX partition of M - T would certify T")
        _, j, g = best
        ys[j] ^= 1 << g
        out = Partition([T | (1 << g)] + ys, pool)
    else:
        T = max_infeasible_bundle(inst, agent)
        lemma4_partition(inst, agent, removed, T)
        out = lemma5_divide(inst, agent, S, T & ~S, k)

    if th and any(inst.ivalue(agent, p) < th for p in out):
        raise InvariantViolation("constructive division produced a part below theta")
    return out


# ---------------------------------------------------------------------------
# lone divider


@dataclass
class DividerState:
    """Progress of a lone-divider run.

    ``settled`` bundles and ``pool`` always partition the item set. ``round``
    counts matching rounds; ``reassignments`` counts the times a settled
    agent swapped its bundle for a smaller one it strongly envied.
    """

    active: set[int]
    settled: dict[int, ItemSet]
    pool: ItemSet
    thresholds: dict[int, Fraction]
    round: int = 0
    reassignments: int = 0
    log: list[str] = field(default_factory=list)

    def check(self, inst: Instance) -> None:
        union = 0
        for b in self.settled.values():
            if b & union:
                raise InvariantViolation("settled bundles overlap")
            union |= b
        if union & self.pool or union | self.pool != inst.all_items:
            raise InvariantViolation("settled bundles and pool do not partition the items")

    def partial_allocation(self, inst: Instance) -> Allocation:
        return Allocation([self.settled.get(a, 0) for a in range(inst.n)], inst.m)


def _threshold_is_theta(inst: Instance, agent: int, t: Fraction) -> bool:
    return is_non_degenerate(inst, agent) and theta(inst, agent) == t


def _divide_round(inst: Instance, state: DividerState, method: str) -> list[ItemSet]:
    i = min(state.active)
    parts = len(state.active)
    removed = [state.settled[a] for a in sorted(state.settled)]
    use_constructive = method == "constructive" or (
        method == "auto" and _threshold_is_theta(inst, i, state.thresholds[i])
    )
    if use_constructive:
        split = divide_constructive(inst, i, state.pool, removed)
    else:
        split = divide_bruteforce(inst, i, state.pool, parts, state.thresholds[i])
        if split is None:
            raise DivideError(
                f"agent {i} cannot split the pool into {parts} parts worth at least "
                f"{state.thresholds[i]}"
            )
    state.log.append(f"round {state.round}: agent {i} divides into {parts} parts")
    return list(split.parts)


def _new_state(inst: Instance, thresholds) -> DividerState:
    if isinstance(thresholds, dict):
        th = {a: Fraction(thresholds[a]) for a in range(inst.n)}
    else:
        th = {a: Fraction(t) for a, t in enumerate(thresholds)}
    if len(th) != inst.n:
        raise UsageError("need one threshold per agent")
    return DividerState(active=set(range(inst.n)), settled={}, pool=inst.all_items, thresholds=th)


def _settle(inst: Instance, state: DividerState, bundles: list[ItemSet]) -> None:
    agents = sorted(state.active)
    graph = FeasibilityGraph.build(inst, agents, bundles, state.thresholds)
    match = envy_free_matching(graph)
    if not match:
        raise InvariantViolation("envy-free matching is empty although the divider fits every bundle")
    for a, k in sorted(match.items()):
        state.settled[a] = bundles[k]
        state.pool &= ~bundles[k]
        state.active.discard(a)
        state.log.append(f"agent {a} takes bundle {k}")


def algorithm1(inst: Instance, thresholds, divide: str = "auto") -> DividerState:
    """Plain lone divider: divide, match envy-freely, settle, repeat.

    The lowest-indexed active agent divides. ``divide`` is ``"auto"``
    (constructive when the threshold is the agent's strong EEFX share),
    ``"constructive"`` or ``"bruteforce"``.
    """
    state = _new_state(inst, thresholds)
    while state.active:
        state.round += 1
        if state.round > inst.n:
            raise InvariantViolation("lone divider needed more than n rounds")
        _settle(inst, state, _divide_round(inst, state, divide))
        state.check(inst)
    _check_thresholds(inst, state)
    return state


def _shrink(bundle: ItemSet, keep: Callable[[ItemSet], bool]) -> ItemSet:
    """Drop items, highest index first, while ``keep`` still holds.

    ``keep`` must be upward closed; one pass then gives an inclusion-minimal set.
    """
    for g in reversed(items_of(bundle)):
        smaller = bundle & ~(1 << g)
        if keep(smaller):
            bundle = smaller
    return bundle


def _check_thresholds(inst: Instance, state: DividerState) -> None:
    for a, b in state.settled.items():
        if value(inst, a, b) < state.thresholds[a]:
            raise InvariantViolation(f"agent {a} ended below its threshold")


def algorithm2(inst: Instance, thresholds, divide: str = "auto") -> DividerState:
    """Lone divider that also keeps the settled agents EFX towards each other.

    Each round the divided bundles are shrunk to inclusion-minimal sets that
    some active agent still accepts. If a settled agent strongly envies one
    of them, the bundle is shrunk further to a minimal set that some settled
    agent values above its current bundle; that agent swaps, and its old
    bundle returns to the pool. Otherwise the round proceeds as in
    :func:`algorithm1`. Ties: lowest envious agent, then lowest bundle index;
    the swap goes to the lowest agent that gains.
    """
    state = _new_state(inst, thresholds)
    th = state.thresholds
    potential = (0, Fraction(0))
    while state.active:
        bundles = _divide_round(inst, state, divide)
        active = sorted(state.active)

        def accepted(s, active=active):
            return any(value(inst, j, s) >= th[j] for j in active)

        shrunk = [_shrink(b, accepted) for b in bundles]

        envy = next(
            (
                (j, k)
                for j in sorted(state.settled)
                for k, b in enumerate(shrunk)
                if strongly_envies(inst, j, state.settled[j], b)
            ),
            None,
        )
        if envy is not None:
            _, k = envy
            settled = sorted(state.settled)

            def improves(s, settled=settled):
                return any(value(inst, j, s) > value(inst, j, state.settled[j]) for j in settled)

            smaller = _shrink(shrunk[k], improves)
            winner = next(
                j for j in settled if value(inst, j, smaller) > value(inst, j, state.settled[j])
            )
            state.pool = (state.pool & ~smaller) | state.settled[winner]
            state.settled[winner] = smaller
            state.reassignments += 1
            state.log.append(f"agent {winner} swaps to a subset of bundle {k}")
        else:
            state.round += 1
            if state.round > inst.n:
                raise InvariantViolation("lone divider needed more than n matching rounds")
            _settle(inst, state, shrunk)
        state.check(inst)

        new_potential = (
            len(state.settled),
            sum((value(inst, j, b) for j, b in state.settled.items()), Fraction(0)),
        )
        if not new_potential > potential:
            raise InvariantViolation("lone-divider potential did not increase")
        potential = new_potential

    _check_thresholds(inst, state)
    for i, a in state.settled.items():
        for j, b in state.settled.items():
            if i != j and strongly_envies(inst, i, a, b):
                raise InvariantViolation(f"settled agent {i} strongly envies agent {j}")
    return state


# ---------------------------------------------------------------------------
# completion


def _envy_cycle(inst: Instance, bundles: list[ItemSet]) -> list[int] | None:
    n = len(bundles)
    own = [inst.ivalue(i, bundles[i]) for i in range(n)]
    succ = [[j for j in range(n) if j != i and inst.ivalue(i, bundles[j]) > own[i]] for i in range(n)]
    color = [0] * n
    stack: list[int] = []

    def dfs(u):
        color[u] = 1
        stack.append(u)
        for v in succ[u]:
            if color[v] == 1:
                return stack[stack.index(v):]
            if color[v] == 0:
                found = dfs(v)
                if found:
                    return found
        stack.pop()
        color[u] = 2
        return None

    for s in range(n):
        if color[s] == 0:
            cyc = dfs(s)
            if cyc:
                return cyc
    return None


def _complete_exhaustively(inst: Instance, bundles: list[ItemSet], pool: ItemSet) -> Allocation | None:
    """Try every way to hand out the pool; first complete allocation that is EFL."""
    left = items_of(pool)
    if len(left) > 12:
        raise InvariantViolation("exhaustive completion limited to 12 leftover items")
    for owners in itertools.product(range(inst.n), repeat=len(left)):
        trial = list(bundles)
        for g, a in zip(left, owners):
            trial[a] |= 1 << g
        alloc = Allocation(trial, inst.m)
        if check_allocation(inst, alloc).efl:
            return alloc
    return None


def complete_allocation(inst: Instance, partial: DividerState) -> Allocation:
    """Hand out the leftover pool so that the allocation becomes complete and EFL.

    Agents' own values never decrease. Repeats until the pool is empty:

    * if some agent values a single pool item above its whole bundle, it
      takes that item alone and returns its bundle to the pool;
    * otherwise, if the envy graph has a cycle, bundles rotate along it;
    * otherwise an agent nobody envies receives its favourite pool item.

    Should the result still fail the EFL check, every assignment of the
    leftover items is tried before giving up.
    """
    if partial.active:
        raise UsageError("complete_allocation needs every agent settled")
    partial.check(inst)
    n = inst.n
    start = [partial.settled[a] for a in range(n)]
    bundles = list(start)
    pool = partial.pool
    potential = None
    while pool:
        swap = None
        for i in range(n):
            own = inst.ivalue(i, bundles[i])
            w = inst.int_values[i]
            better = [g for g in items_of(pool) if w[g] > own]
            if better:
                swap = (i, max(better, key=lambda g: (w[g], -g)))
                break
        if swap is not None:
            i, g = swap
            pool = (pool & ~(1 << g)) | bundles[i]
            bundles[i] = 1 << g
        else:
            cycle = _envy_cycle(inst, bundles)
            if cycle:
                moved = [bundles[cycle[(t + 1) % len(cycle)]] for t in range(len(cycle))]
                for a, b in zip(cycle, moved):
                    bundles[a] = b
            else:
                envied = {
                    j
                    for i in range(n)
                    for j in range(n)
                    if i != j and inst.ivalue(i, bundles[j]) > inst.ivalue(i, bundles[i])
                }
                s = min(a for a in range(n) if a not in envied)
                w = inst.int_values[s]
                g = max(items_of(pool), key=lambda g: (w[g], -g))
                bundles[s] |= 1 << g
                pool &= ~(1 << g)
        new_potential = (
            sum(Fraction(inst.ivalue(a, bundles[a]), inst.denominator) for a in range(n)),
            -pool.bit_count(),
        )
        if potential is not None and not new_potential > potential:
            raise InvariantViolation("completion potential did not increase")
        potential = new_potential

    alloc = Allocation(bundles, inst.m)
    for a in range(n):
        if inst.ivalue(a, bundles[a]) < inst.ivalue(a, start[a]):
            raise InvariantViolation(f"agent {a} lost value during completion")
    if check_allocation(inst, alloc).efl:
        return alloc
    fallback = _complete_exhaustively(inst, start, partial.pool)
    if fallback is None:
        raise InvariantViolation("no EFL completion of the partial allocation exists")
    return fallback


# ---------------------------------------------------------------------------
# end to end


@dataclass
class SolveResult:
    """Output of :func:`solve_efl_eefx`.

    ``working`` is the integer-scaled (and possibly perturbed) instance the
    algorithm ran on; ``scale`` converts its values back to the original
    units. ``thresholds`` are in original units.
    """

    allocation: Allocation
    envy: EnvyReport
    certificates: list[Certificate | None]
    working: Instance
    scale: int
    perturbed: bool
    thresholds: dict[int, Fraction]
    state: DividerState


_THRESHOLDS = {"theta": theta, "rmms": rmms, "mms": mms_value}


def solve_efl_eefx(inst: Instance, threshold: str = "theta", divide: str = "auto") -> SolveResult:
    """An allocation that is both EFL and EEFX (``m <= 12``).

    ``threshold`` picks the per-agent share handed to the lone divider:
    ``"theta"`` (default), ``"rmms"`` or ``"mms"``. The last may fail with
    :class:`DivideError`, since MMS allocations need not exist.
    """
    if threshold not in _THRESHOLDS:
        raise UsageError(f"threshold must be one of {sorted(_THRESHOLDS)}")
    work, scale = scale_to_integers(inst)
    perturbed = not all(is_non_degenerate(work, a) for a in range(work.n))
    if perturbed:
        work = perturb(work)
    share = _THRESHOLDS[threshold]
    thresholds = {a: share(work, a) for a in range(work.n)}
    state = algorithm2(work, thresholds, divide)
    alloc = complete_allocation(work, state)

    envy = check_allocation(inst, alloc)
    eefx_ok, certs = is_allocation_eefx(inst, alloc)
    if not (envy.efl and eefx_ok):
        dump = {
            "instance": [[str(x) for x in r] for r in inst.values],
            "allocation": alloc.as_lists(),
            "efl_failures": envy.failures("efl"),
            "eefx_failures": [a for a, c in enumerate(certs) if c is None],
            "thresholds": {a: str(t) for a, t in thresholds.items()},
            "log": state.log,
        }
        raise AuditFailure("solver output failed the EFL/EEFX audit", dump)
    return SolveResult(
        allocation=alloc,
        envy=envy,
        certificates=certs,
        working=work,
        scale=scale,
        perturbed=perturbed,
        thresholds={a: t / scale for a, t in thresholds.items()},
        state=state,
    )
