"""Adversary strategies.

A strategy is a bundle of independent arms.  Strategies see everything the
adversary is entitled to (topology, bad IDs, message contents) and draw
only from their own seeded stream, never from a good ID's.
"""

from dataclasses import dataclass, replace

import numpy as np

from tinygroups import hashing
from tinygroups.idring import SCALE

ID_SUBSET_RULES = ("all", "random_half", "contiguous_arc", "lowest_fraction")
SEARCH_BEHAVIORS = ("drop", "misroute_to_red")
REQUEST_BEHAVIORS = ("none", "spam_memberships", "spam_neighbors", "spam_both")
GOSSIP_BEHAVIORS = ("none", "delay_release")
POW_BEHAVIORS = ("honest_rate", "bias_small_outputs", "precompute_hoard")


@dataclass(frozen=True)
class AdversaryStrategy:
    id_subset_rule: str = "all"
    search_behavior: str = "misroute_to_red"
    request_behavior: str = "spam_both"
    gossip_behavior: str = "delay_release"
    pow_behavior: str = "bias_small_outputs"
    spam_volume: float = 1.0
    release_step: int = -1  # -1: last step of the agreement phase
    arc: tuple = (0.0, 0.5)
    lowest_fraction: float = 0.5

    def __post_init__(self):
        for value, allowed in ((self.id_subset_rule, ID_SUBSET_RULES),
                               (self.search_behavior, SEARCH_BEHAVIORS),
                               (self.request_behavior, REQUEST_BEHAVIORS),
                               (self.gossip_behavior, GOSSIP_BEHAVIORS),
                               (self.pow_behavior, POW_BEHAVIORS)):
            if value not in allowed:
                raise ValueError(f"{value!r} is not one of {allowed}")
        if self.spam_volume < 0:
            raise ValueError("spam volume must be non-negative")

    @classmethod
    def worst(cls):
        """Every hostile arm on."""
        return cls()

    @classmethod
    def passive(cls):
        return cls(search_behavior="drop", request_behavior="none",
                   gossip_behavior="none", pow_behavior="honest_rate")

    @classmethod
    def from_name(cls, name):
        if name in ("worst", "composite"):
            return cls.worst()
        if name in ("none", "passive"):
            return cls.passive()
        raise ValueError(f"unknown adversary preset {name!r}")

    def with_(self, **kw):
        return replace(self, **kw)

    @property
    def spams_memberships(self):
        return self.request_behavior in ("spam_memberships", "spam_both")

    @property
    def spams_neighbors(self):
        return self.request_behavior in ("spam_neighbors", "spam_both")


def select_id_subset(bad_ids, rule, rng=None, arc=(0.0, 0.5), fraction=0.5):
    """Which bad IDs the adversary chooses to keep in the system.

    ``bad_ids`` is an array of raw 64-bit values; the result is sorted.
    """
    v = np.sort(np.asarray(bad_ids, dtype=np.uint64))
    if rule == "all":
        return v
    if rule == "random_half":
        if rng is None:
            raise ValueError("random_half needs an rng")
        keep = rng.permutation(v.size)[: v.size // 2]
        return np.sort(v[keep])
    if rule == "contiguous_arc":
        lo = np.uint64(int(arc[0] * SCALE))
        hi = np.uint64(min(int(arc[1] * SCALE), SCALE - 1))
        return v[(v >= lo) & (v < hi)]
    if rule == "lowest_fraction":
        return v[: int(round(fraction * v.size))]
    raise ValueError(f"unknown subset rule {rule!r}")


@dataclass(frozen=True)
class SearchResponse:
    action: str
    redirect_to: object = None


def act_on_search(strategy, q, blocking_index, rng):
    """What the adversary does with a search that reached a red group.

    The measured outcome already stopped at that group, so the response
    never feeds back into it.
    """
    if blocking_index is None or blocking_index < 0:
        raise ValueError("adversary acts only on searches that reached a red group")
    if strategy.search_behavior == "drop":
        return SearchResponse("drop")
    red = np.flatnonzero(q.red)
    target = int(red[rng.integers(0, red.size)]) if red.size else int(blocking_index)
    q.adversary_links.setdefault(int(blocking_index), set()).add(target)
    return SearchResponse("misroute", q.base.ids.point(target))


@dataclass
class SpamBatch:
    """Forged requests: each names a bad leader, a slot and a graph tag."""

    leaders: np.ndarray  # raw IDs of bad new leaders
    slots: np.ndarray
    tags: list
    points: np.ndarray  # hash point of each request
    kind: str


def spam_requests(strategy, bad_leaders, slots, rng, tags=(b"g1", b"g2")):
    """Membership spam: all legitimate (leader, slot, tag) triples of bad
    leaders, plus forged out-of-range slots if the volume exceeds 1.

    Out-of-range slots are rejected by recipients without any search.
    """
    if not strategy.spams_memberships or len(bad_leaders) == 0:
        return SpamBatch(np.zeros(0, np.uint64), np.zeros(0, np.int64), [], np.zeros(0, np.uint64), "membership")
    leaders, slot_ids, tag_list, points = [], [], [], []
    for tag in tags:
        pts = hashing.slot_points(tag, bad_leaders, slots)
        leaders.append(np.repeat(np.asarray(bad_leaders, dtype=np.uint64), slots))
        slot_ids.append(np.tile(np.arange(1, slots + 1), len(bad_leaders)))
        tag_list += [tag] * pts.size
        points.append(pts.ravel())
    extra = int(round(max(0.0, strategy.spam_volume - 1.0) * len(bad_leaders) * slots * len(tags)))
    if extra:
        pick = rng.integers(0, len(bad_leaders), size=extra)
        forged = rng.integers(slots + 1, 4 * slots + 1, size=extra)
        leaders.append(np.asarray(bad_leaders, dtype=np.uint64)[pick])
        slot_ids.append(forged)
        tag_list += [tags[0]] * extra
        points.append(rng.integers(0, SCALE, size=extra, dtype=np.uint64, endpoint=False))
    return SpamBatch(np.concatenate(leaders), np.concatenate(slot_ids), tag_list,
                     np.concatenate(points), "membership")


def spam_neighbor_claims(strategy, bad_leaders, offsets):
    """Neighbour spam: every anchor point a bad leader may legitimately ask about.

    Returns (leader, anchor) arrays; the anchors are the leader's own
    finger targets, so a recipient cannot reject them by arithmetic alone.
    """
    if not strategy.spams_neighbors or len(bad_leaders) == 0:
        return np.zeros(0, np.uint64), np.zeros(0, np.uint64)
    b = np.asarray(bad_leaders, dtype=np.uint64)
    anchors = (b[:, None] + np.asarray(offsets, dtype=np.uint64)[None, :]).ravel()
    return np.repeat(b, len(offsets)), anchors
