"""
EFL and EEFX together on a random instance
==========================================

Generate an instance, run the lone divider with the strong EEFX share as
everyone's threshold, hand out the leftovers, and audit the result.
"""

from fairdiv import format_items, format_value, value
from fairdiv.divider import solve_efl_eefx
from fairdiv.oracle import brute_force_solve, random_instance

inst = random_instance(seed=2024, n=3, m=8)
for i, row in enumerate(inst.values):
    print(f"agent {i + 1}:", [int(x) for x in row])

# %%
# The solver works on a perturbed copy when there are ties, so thresholds
# carry small binary fractions.
res = solve_efl_eefx(inst)
print("perturbed:", res.perturbed)
print("rounds:", res.state.round, "reassignments:", res.state.reassignments)
for line in res.state.log:
    print("  ", line)

# %%
# Each agent ends at or above its threshold, which already makes its bundle
# EEFX feasible. EFL holds for every ordered pair.
for a, b in enumerate(res.allocation.bundles):
    print(
        f"agent {a + 1}: {format_items(b):<16} value {format_value(value(inst, a, b)):>3}"
        f"  theta {format_value(res.thresholds[a])}"
    )
print("EFL:", res.envy.efl, " EF1:", res.envy.ef1, " EFX:", res.envy.efx)
print("certificates:", [" ".join(format_items(p) for p in c.parts) for c in res.certificates])

# %%
# For comparison, the first EFL+EEFX allocation in lexicographic order.
alt = brute_force_solve(inst, "EFL+EEFX")
print("brute force:", " ".join(format_items(b) for b in alt.bundles))
