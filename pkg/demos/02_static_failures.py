"""
How often does a search fail when some groups are red?
======================================================

Colour each group red with probability p_f and send searches from blue
groups.  A search fails at the first red group on its path, so the
failure rate can never exceed the total traffic share of red groups.
"""

import numpy as np

from tinygroups import groupgraph as gg
from tinygroups import inputgraph
from tinygroups.idring import RingSet

rng = np.random.default_rng(1)
n = 4096
base = inputgraph.build(RingSet.random(n, rng))
q = gg.all_good(base, gg.SizeRule(n, 0.05, 2.5, 8, 24))

print(" p_f     X       sum of red rho   X/p_f")
for p_f in (0.0, 0.005, 0.01, 0.02, 0.05):
    gg.mark_colors(q, rng, p_f)
    s = gg.sample_searches(q, 100_000, rng)
    red_share = s.rho_hat[q.red].sum()
    ratio = s.x_hat / p_f if p_f else 0.0
    print(f"{p_f:5.3f}  {s.x_hat:.4f}    {red_share:.4f}          {ratio:5.2f}")
