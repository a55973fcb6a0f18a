"""
Routing on a Chord ring, and where the traffic lands
====================================================

Build a ring of random IDs, route random searches greedily, and look at
how many hops they take and how much of the traffic each ID carries.
"""

import math

import numpy as np

from tinygroups import inputgraph
from tinygroups.idring import RingSet

rng = np.random.default_rng(0)

for n in (256, 1024, 4096):
    g = inputgraph.build(RingSet.random(n, rng))
    origins, keys = inputgraph.random_queries(g, 20_000, rng)
    routes = g.route_indices(origins, keys)
    hops = routes.lengths - 1
    load = inputgraph.congestion_array(g, 50_000, rng)
    print(f"n={n:5d}  degree {g.degree.mean():5.1f}  hops mean {hops.mean():4.2f} max {hops.max():2d}"
          f"  (2 log2 n = {2 * math.log2(n):.0f})  n*max load {n * load.max():6.1f}")

# Every search ends at the key's successor.
assert (routes.resolved == g.ids.successor_index(keys)).all()
