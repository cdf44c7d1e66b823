"""
Shares on a ten-item instance
=============================

Three agents share one valuation over ten goods. One good is nearly
worthless, one is huge, and the remaining eight sit close to 100. The
instance shows a bundle that is EEFX feasible only thanks to a tie, and a
slightly richer bundle that is not feasible at all.
"""

from fairdiv import Instance, format_items, format_value, itemset, perturb, value
from fairdiv.fairness import is_eefx_feasible
from fairdiv.shares import max_infeasible_bundle, share_profile, theta_by_definition

values = [1, 299, 101, 101, 101, 98, 98, 99, 99, 100]
inst = Instance([values] * 3)

# %%
# The cheap pair {g1, g2} is worth 300. The rest splits into two parts whose
# best single-removal value is exactly 300, so the pair is feasible.
pair = itemset([0, 1])
cert = is_eefx_feasible(inst, 0, pair)
print("v({g1,g2}) =", value(inst, 0, pair))
print("certificate:", " ".join(format_items(p) for p in cert.parts))

# %%
# {g3, g4, g5} is worth more, 303, yet no split of the other seven goods
# into two parts avoids strong envy.
triple = itemset([2, 3, 4])
print("v({g3,g4,g5}) =", value(inst, 0, triple), "feasible:", is_eefx_feasible(inst, 0, triple) is not None)

# %%
# So feasibility is not monotone in value. The strong EEFX share is the
# point above which it becomes monotone. With ties we read it off the
# definition directly.
print("theta with ties:", theta_by_definition(inst, 0))

# %%
# After the power-of-two perturbation every bundle has its own value, the
# largest infeasible bundle T is unique, and theta is the next value above it.
p = perturb(inst)
t = max_infeasible_bundle(p, 0)
prof = share_profile(p, 0)
print("T =", format_items(t), "worth", format_value(value(p, 0, t)))
for name in ("mxs", "theta", "rmms", "mms"):
    print(f"{name:>5}: {format_value(getattr(prof, name))}")
print("chain holds:", prof.chain_holds())
