"""
Agreeing on a random string
===========================

Every good ID mines strings, floods its best one, and keeps the smallest
few it hears.  An adversary holding back a better string until the last
moment splits the choices, but every choice still sits in everyone's
solution set.
"""

import numpy as np

from tinygroups import gossip
from tinygroups import groupgraph as gg
from tinygroups import inputgraph
from tinygroups.idring import RingSet
from tinygroups.seeding import stream

n = 512
base = inputgraph.build(RingSet.random(n, stream(0, "demo-ring")))
q = gg.all_good(base, gg.SizeRule(n, 0.05, 2.5, 8, 24))
gg.mark_colors(q, stream(0, "demo-colour"), 0.02)
bad = np.zeros(n, bool)
bad[stream(0, "demo-bad").choice(n, 25, replace=False)] = True

res = gossip.run_gossip(q, bad, gossip.GossipParams(n, 2048), stream(0, "demo-g"), stream(0, "demo-a"),
                        delay_release=True)
choices = {res.chosen[int(w)].s for w in res.good_component}
print(f"giant component {len(res.component)}/{n}, phases end at {res.clock}")
print(f"adversary string beats honest best: {res.adversary_string.t < res.global_min.t}")
print(f"distinct choices among good IDs: {len(choices)}, agreement holds: {res.agreement()}")
print(f"most forwards by one ID: {res.forwards.max()} (ceiling {res.params.forward_ceiling()})")
print(f"messages with member factor: {res.weighted_messages:.3g}, kappa={res.kappa():.1f}")
