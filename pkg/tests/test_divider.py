import itertools
import random

import pytest

from conftest import E1_VALUES, random_rows
from fairdiv.core import Allocation, Instance, UsageError, items_of, itemset, perturb, value
from fairdiv.divider import (
    DivideError,
    DividerState,
    FeasibilityGraph,
    _complete_exhaustively,
    algorithm1,
    algorithm2,
    complete_allocation,
    divide_bruteforce,
    divide_constructive,
    envy_free_matching,
    is_envy_free_matching,
    lemma4_partition,
    lemma5_divide,
    solve_efl_eefx,
)
from fairdiv.fairness import check_allocation, is_allocation_eefx, strongly_envies
from fairdiv.oracle import random_instance
from fairdiv.shares import max_infeasible_bundle, mms_value, theta


def graph(na, nb, edges):
    return FeasibilityGraph(tuple(range(na)), tuple(1 << k for k in range(nb)), frozenset(edges))


def random_family(rng, inst, agent, k):
    """k disjoint bundles, each below the agent's theta."""
    th = theta(inst, agent)
    items = list(range(inst.m))
    rng.shuffle(items)
    used, out = 0, []
    for _ in range(k):
        b = 0
        for g in items:
            if not used >> g & 1 and rng.random() < 0.6 and value(inst, agent, b | 1 << g) < th:
                b |= 1 << g
        out.append(b)
        used |= b
    return out


def theta_map(inst):
    return {a: theta(inst, a) for a in range(inst.n)}


# --- envy-free matching


def test_matching_complete_graph():
    g = graph(3, 3, [(a, k) for a in range(3) for k in range(3)])
    match = envy_free_matching(g)
    assert len(match) == 3 and is_envy_free_matching(g, match)


def test_matching_contested_bundle():
    g = graph(2, 2, [(0, 0), (1, 0)])
    match = envy_free_matching(g)
    assert match == {} and is_envy_free_matching(g, match)


def test_matching_empty_sides():
    assert envy_free_matching(FeasibilityGraph((), (1,), frozenset())) == {}
    assert envy_free_matching(FeasibilityGraph((0,), (), frozenset())) == {}


@pytest.mark.parametrize("na,nb", [(1, 1), (2, 2), (2, 3), (3, 2), (3, 3)])
def test_matching_all_small_graphs(na, nb):
    cells = [(a, k) for a in range(na) for k in range(nb)]
    for bits in range(1 << len(cells)):
        edges = {c for j, c in enumerate(cells) if bits >> j & 1}
        g = graph(na, nb, edges)
        match = envy_free_matching(g)
        assert is_envy_free_matching(g, match)
        # nonempty when the divider fits every bundle and bundles are not outnumbered
        if nb >= na and all((0, k) in edges for k in range(nb)):
            assert match


def test_matching_can_be_empty_with_fewer_bundles():
    g = graph(3, 2, [(a, k) for a in range(3) for k in range(2)])
    assert envy_free_matching(g) == {}


def test_matching_sampled_4x4():
    rng = random.Random(0)
    cells = [(a, k) for a in range(4) for k in range(4)]
    for _ in range(3000):
        edges = {c for c in cells if rng.random() < 0.4}
        edges |= {(0, k) for k in range(4)}
        g = graph(4, 4, edges)
        match = envy_free_matching(g)
        assert match and is_envy_free_matching(g, match)


def test_feasibility_graph_build(e1):
    g = FeasibilityGraph.build(e1, [0, 1], [itemset([0, 1]), itemset([2])], {0: 300, 1: 301})
    assert g.edges == frozenset({(0, 0)})
    assert g.neighbors(0) == [0]


# --- dividing


def test_divide_bruteforce_examples(e1_perturbed):
    assert divide_bruteforce(Instance([[1, 2]]), 0, 0b11, 3, 0) is not None
    assert divide_bruteforce(Instance([[1, 2]]), 0, 0b11, 3, 1) is None
    inst = e1_perturbed
    th = theta(inst, 0)
    part = divide_bruteforce(inst, 0, inst.all_items, 3, th)
    assert part is not None and all(value(inst, 0, p) >= th for p in part)
    above = mms_value(inst, 0) + min(x for x in inst.values[0])
    assert divide_bruteforce(inst, 0, inst.all_items, 3, above) is None


@pytest.mark.parametrize("seed", range(40))
def test_divide_constructive_no_removal(seed):
    rng = random.Random(seed)
    n, m = rng.choice([2, 3, 4]), rng.randint(0, 10)
    inst = perturb(Instance(random_rows(rng, n, m)))
    a = rng.randrange(n)
    th = theta(inst, a)
    part = divide_constructive(inst, a, inst.all_items)
    assert part.k == n and part.ground == inst.all_items
    assert all(value(inst, a, p) >= th for p in part)
    if m <= 9:
        assert divide_bruteforce(inst, a, inst.all_items, n, th) is not None


@pytest.mark.parametrize("seed", range(60))
def test_divide_constructive_with_removals(seed):
    rng = random.Random(1000 + seed)
    n, m = rng.choice([2, 3, 4]), rng.randint(2, 9)
    inst = perturb(Instance(random_rows(rng, n, m)))
    a = rng.randrange(n)
    th = theta(inst, a)
    if th == 0:
        return
    removed = random_family(rng, inst, a, rng.randint(1, n - 1))
    used = 0
    for b in removed:
        used |= b
    pool = inst.all_items & ~used
    part = divide_constructive(inst, a, pool, removed)
    assert part.k == n - len(removed) and part.ground == pool
    assert all(value(inst, a, p) >= th for p in part)
    assert divide_bruteforce(inst, a, pool, part.k, th) is not None


def test_divide_constructive_preconditions(e1, e1_perturbed):
    with pytest.raises(UsageError):
        divide_constructive(e1, 0, e1.all_items)
    inst = e1_perturbed
    big = itemset([1, 2, 3])
    with pytest.raises(UsageError):
        divide_constructive(inst, 0, inst.all_items & ~big, [big])
    with pytest.raises(UsageError):
        divide_constructive(inst, 0, inst.all_items, [itemset([0])])
    with pytest.raises(UsageError):
        divide_constructive(inst, 0, 0, [itemset([0]), itemset([1]), itemset([2])])


def test_divide_constructive_theta_zero():
    inst = perturb(Instance([[1], [1]]))
    assert theta(inst, 0) == 0
    part = divide_constructive(inst, 0, inst.all_items)
    assert part.parts == (1, 0)


def test_lemma4_single_removal(e1_perturbed):
    inst = e1_perturbed
    s1 = itemset([0, 5])
    t = max_infeasible_bundle(inst, 0)
    assert lemma4_partition(inst, 0, [s1], t).parts == (s1,)


@pytest.mark.parametrize("seed", range(40))
def test_lemma4_postconditions(seed):
    rng = random.Random(2000 + seed)
    n, m = rng.choice([3, 4]), rng.randint(3, 9)
    inst = perturb(Instance(random_rows(rng, n, m)))
    a = rng.randrange(n)
    th = theta(inst, a)
    t = max_infeasible_bundle(inst, a)
    if t is None:
        return
    removed = random_family(rng, inst, a, rng.randint(1, n - 1))
    s = 0
    for b in removed:
        s |= b
    ys = lemma4_partition(inst, a, removed, t)
    assert ys.ground == s and ys.k == len(removed)
    assert (t & s) & ~ys[0] == 0
    assert value(inst, a, ys[0]) < th
    for y in ys.parts[1:]:
        for g in items_of(y):
            assert value(inst, a, y & ~(1 << g)) < th


@pytest.mark.parametrize("seed", range(40))
def test_lemma5_postconditions(seed):
    rng = random.Random(3000 + seed)
    n, m = rng.choice([2, 3, 4]), rng.randint(2, 9)
    inst = perturb(Instance(random_rows(rng, n, m)))
    a = rng.randrange(n)
    t = max_infeasible_bundle(inst, a)
    if t is None:
        return
    th = theta(inst, a)
    removed = random_family(rng, inst, a, rng.randint(1, n - 1))
    s = 0
    for b in removed:
        s |= b
    u = t & ~s
    xs = lemma5_divide(inst, a, s, u, len(removed))
    assert xs.ground == inst.all_items & ~s and xs.k == n - len(removed)
    assert u & ~xs[0] == 0
    assert all(value(inst, a, x) >= th for x in xs)


def test_lemma5_no_moves_when_u_suffices(e1_perturbed):
    inst = e1_perturbed
    th = theta(inst, 0)
    s = itemset([0])
    u = itemset([1, 2])
    assert value(inst, 0, u) >= th
    xs = lemma5_divide(inst, 0, s, u, 1)
    assert xs[0] == u


# --- lone divider


def test_algorithm1_single_agent():
    inst = perturb(Instance([[3, 1, 2]]))
    state = algorithm1(inst, theta_map(inst))
    assert state.settled == {0: inst.all_items} and state.pool == 0


@pytest.mark.parametrize("seed", range(25))
def test_algorithm1_postconditions(seed):
    rng = random.Random(4000 + seed)
    n, m = rng.choice([2, 3]), rng.randint(1, 8)
    inst = perturb(Instance(random_rows(rng, n, m)))
    th = theta_map(inst)
    state = algorithm1(inst, th)
    assert not state.active and state.round <= n
    state.check(inst)
    for a, b in state.settled.items():
        assert value(inst, a, b) >= th[a]


@pytest.mark.parametrize("seed", range(40))
def test_algorithm2_postconditions(seed):
    rng = random.Random(5000 + seed)
    n, m = rng.choice([2, 3, 4]), rng.randint(1, 9)
    inst = perturb(Instance(random_rows(rng, n, m)))
    th = theta_map(inst)
    state = algorithm2(inst, th)
    assert not state.active and state.round <= n
    state.check(inst)
    for a, b in state.settled.items():
        assert value(inst, a, b) >= th[a]
    for i, j in itertools.permutations(range(n), 2):
        assert not strongly_envies(inst, i, state.settled[i], state.settled[j])


def test_algorithm2_reassignment_branch_is_exercised():
    total = 0
    for seed in range(150):
        rng = random.Random(seed)
        inst = perturb(Instance(random_rows(rng, 3, rng.randint(4, 8))))
        total += algorithm2(inst, theta_map(inst)).reassignments
    assert total > 0


def test_algorithm_thresholds_validation(e1_perturbed):
    with pytest.raises(UsageError):
        algorithm1(e1_perturbed, [1, 2])


def test_bruteforce_division_route(e1_perturbed):
    th = theta_map(e1_perturbed)
    state = algorithm2(e1_perturbed, th, divide="bruteforce")
    assert all(value(e1_perturbed, a, b) >= th[a] for a, b in state.settled.items())


def test_unreachable_threshold_raises(e1_perturbed):
    with pytest.raises(DivideError):
        algorithm1(e1_perturbed, [10**6] * 3, divide="bruteforce")


# --- completion


def _settled(inst, bundles):
    pool = inst.all_items
    for b in bundles:
        pool &= ~b
    return DividerState(set(), dict(enumerate(bundles)), pool, {a: 0 for a in range(inst.n)})


def test_complete_empty_pool_is_identity():
    inst = Instance([[1, 2], [2, 1]])
    assert complete_allocation(inst, _settled(inst, [0b10, 0b01])).bundles == (0b10, 0b01)


def test_complete_zero_valued_pool():
    inst = Instance([[3, 0, 0], [0, 4, 0]])
    alloc = complete_allocation(inst, _settled(inst, [0b001, 0b010]))
    assert alloc.complete and check_allocation(inst, alloc).efl
    assert alloc.bundles[0] & 1 and alloc.bundles[1] & 2


def test_complete_requires_all_settled():
    inst = Instance([[1], [1]])
    with pytest.raises(UsageError):
        complete_allocation(inst, DividerState({1}, {0: 1}, 0, {0: 0, 1: 0}))


def test_complete_singleton_swap():
    inst = Instance([[1, 9, 0], [1, 0, 1]])
    alloc = complete_allocation(inst, _settled(inst, [0b001, 0b100]))
    assert alloc.complete and check_allocation(inst, alloc).efl
    assert value(inst, 0, alloc.bundles[0]) >= 9


@pytest.mark.parametrize("seed", range(25))
def test_completion_is_efl_and_keeps_values(seed):
    rng = random.Random(6000 + seed)
    n, m = 3, rng.randint(3, 8)
    inst = perturb(Instance(random_rows(rng, n, m)))
    th = theta_map(inst)
    state = algorithm2(inst, th)
    alloc = complete_allocation(inst, state)
    assert alloc.complete
    assert check_allocation(inst, alloc).efl
    assert is_allocation_eefx(inst, alloc)[0]
    for a in range(n):
        assert value(inst, a, alloc.bundles[a]) >= value(inst, a, state.settled[a]) >= th[a]


def test_exhaustive_completion_fallback():
    inst = Instance([[5, 1, 1], [1, 1, 1]])
    alloc = _complete_exhaustively(inst, [0, 0], inst.all_items)
    assert alloc is not None and alloc.complete and check_allocation(inst, alloc).efl


# --- end to end


def test_solve_e1(e1):
    res = solve_efl_eefx(e1)
    assert res.perturbed and res.envy.efl
    assert all(c is not None and c.is_valid(e1) for c in res.certificates)
    assert all(res.thresholds[a] > 303 for a in range(3))


def test_solve_e1_with_two_generated_agents():
    extra = random_instance(11, 2, 10, vmax=300)
    inst = Instance([E1_VALUES] + [list(r) for r in extra.values])
    res = solve_efl_eefx(inst)
    assert check_allocation(inst, res.allocation).efl
    assert is_allocation_eefx(inst, res.allocation)[0]


@pytest.mark.parametrize("seed", range(20))
def test_solve_two_agents(seed):
    rng = random.Random(7000 + seed)
    inst = Instance(random_rows(rng, 2, rng.randint(0, 8)))
    res = solve_efl_eefx(inst)
    assert res.allocation.complete and res.envy.efl
    assert is_allocation_eefx(inst, res.allocation)[0]


def test_solve_rational_input():
    inst = Instance([["1/2", "1/3", "1/6", 0], ["1/4", "1/4", "1/4", "1/4"], [1, 0, 0, "2/5"]])
    res = solve_efl_eefx(inst)
    assert res.scale == 60 and res.envy.efl
    assert is_allocation_eefx(inst, res.allocation)[0]


def test_solve_single_agent():
    inst = Instance([[1, 2, 3]])
    assert solve_efl_eefx(inst).allocation.bundles == (0b111,)


@pytest.mark.parametrize("threshold", ["rmms", "mms"])
def test_solve_other_thresholds(threshold):
    for seed in range(8):
        inst = random_instance(seed, 3, 6)
        try:
            res = solve_efl_eefx(inst, threshold=threshold)
        except DivideError:
            assert threshold == "mms"
            continue
        assert res.envy.efl and is_allocation_eefx(inst, res.allocation)[0]


def test_solve_rejects_unknown_threshold(e1):
    with pytest.raises(UsageError):
        solve_efl_eefx(e1, threshold="median")


def test_solve_is_deterministic():
    inst = random_instance(3, 3, 8)
    assert solve_efl_eefx(inst).allocation == solve_efl_eefx(inst).allocation


def test_partial_allocation_view(e1_perturbed):
    state = algorithm2(e1_perturbed, theta_map(e1_perturbed))
    part = state.partial_allocation(e1_perturbed)
    assert isinstance(part, Allocation) and part.allocated | state.pool == e1_perturbed.all_items
