"""
Rebuilding the groups every epoch: two graphs versus one
========================================================

Each epoch, new groups are assembled by searching in last epoch's graphs.
With a single graph, a bad group corrupts the searches that build the next
graph, and those errors pile up.  Keeping two independent graphs lets a
search succeed in either, which stops the build-up.

This runs a few seeds at n=1024 (a couple of seconds per epoch).
"""

import numpy as np

from tinygroups import epochs as ep

seeds = range(4)
for dual in (True, False):
    reds = np.array([[row["red_fraction"] for row in ep.run(ep.EpochParams(n=1024, dual=dual), s, 3)]
                     for s in seeds])
    label = "dual  " if dual else "single"
    print(f"{label} red fraction by epoch (mean over {len(seeds)} seeds): {np.round(reds.mean(axis=0), 5)}")
