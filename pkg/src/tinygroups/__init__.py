"""Byzantine-tolerant group graphs with O(log log n)-size groups.

A seeded, discrete-step simulator: Chord input graph, group graphs and
search-failure measurement, dual-graph epoch construction, proof-of-work
IDs and global random-string gossip.
"""

from tinygroups.idring import IdPoint, RingSet, clockwise_distance, estimate_loglog_n, successor

__version__ = "0.1.0"

__all__ = [
    "IdPoint",
    "RingSet",
    "clockwise_distance",
    "estimate_loglog_n",
    "successor",
]
