"""
Envy-free matchings
===================

A maximum matching is not always envy-free: an unmatched agent may like a
bundle that went to someone else. Deleting everything reachable from the
unmatched agents by alternating paths fixes that.
"""

from fairdiv.divider import FeasibilityGraph, envy_free_matching, is_envy_free_matching

# %%
# Agents 0 and 1 both want bundle 0 only; agent 2 likes bundles 1 and 2.
# Whoever gets bundle 0, the other one envies them, so bundle 0 is dropped.
g = FeasibilityGraph(
    agents=(0, 1, 2),
    bundles=(0b001, 0b010, 0b100),
    edges=frozenset({(0, 0), (1, 0), (2, 1), (2, 2)}),
)
match = envy_free_matching(g)
print("matching:", match, "envy-free:", is_envy_free_matching(g, match))

# %%
# With a lone divider who accepts every bundle the result is never empty.
g = FeasibilityGraph(
    agents=(0, 1, 2),
    bundles=(0b001, 0b010, 0b100),
    edges=frozenset({(0, 0), (0, 1), (0, 2), (1, 0), (2, 0)}),
)
print("with a divider:", envy_free_matching(g))
