"""Which periods get compared with which.

Conditioning removes the fixed effect only within sets of periods that are
far enough apart for their lagged outcomes to be treated as given. For an
AR(p) model two periods in a set must be at least p + 1 apart, and only the
maximal such sets are kept.
"""

from dynlogit import build_group_system, maximal_admissible_sets

for T, p in [(3, 1), (4, 1), (5, 1), (6, 1), (6, 2), (8, 3)]:
    gs = build_group_system(T, p)
    print(f"T={T} p={p}: {len(gs)} groups ->", [g.times for g in gs])

# Slope-only estimation restricts attention to periods sharing a lag value.
# If only periods 1, 3 and 4 had a zero lag, both {1,3} and {1,4} survive.
print("\neligible {1,3,4}, p=1:", maximal_admissible_sets([1, 3, 4], 1))
