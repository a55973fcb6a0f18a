"""Group graphs over an input graph.

Each input-graph ID ``w`` leads a group ``G_w``.  Membership is stored as a
slot table ``members[w, i]`` of indices into a member population (``-1`` for
an unfilled slot), so a group's size is its number of filled slots and its
bad count is the number of slots held by bad IDs.

A search replays the input-graph route and halts at the first group that
breaks it.  Two failure models are supported:

``"red"``   any red group on the route stops the search;
``"link"``  a bad group stops it, and a confused group stops it only when
            the route leaves through one of its wrong links.
"""

from collections import Counter
from dataclasses import dataclass, field
import math

import numpy as np

from tinygroups import hashing
from tinygroups.idring import IdPoint, as_value

FAILURE_MODELS = ("red", "link")


class FilterInconclusive(ValueError):
    """No payload reached a strict majority."""


@dataclass
class MessageLedger:
    counters: dict = field(default_factory=lambda: {"group_internal": 0, "inter_group": 0, "gossip": 0})

    def add(self, category, count):
        if count < 0:
            raise ValueError("message counts only grow")
        self.counters[category] += int(count)

    def merge(self, other):
        for k, v in other.counters.items():
            self.counters[k] = self.counters.get(k, 0) + v


@dataclass(frozen=True)
class Group:
    leader: IdPoint
    members: tuple  # of (IdPoint, "good" | "bad")
    status_goodness: str
    status_color: str


@dataclass(frozen=True)
class SearchOutcome:
    kind: str
    path: tuple
    blocking_group: object = None


@dataclass(frozen=True)
class SizeRule:
    """Integer size window and bad-member threshold for a network of ``n`` IDs."""

    n: int
    beta: float
    delta: float
    d1: float
    d2: float

    @property
    def lnln(self):
        return math.log(math.log(self.n))

    @property
    def min_size(self):
        return math.ceil(self.d1 * self.lnln)

    @property
    def max_size(self):
        return math.ceil(self.d2 * self.lnln)

    @property
    def slots(self):
        return self.max_size

    @property
    def bad_fraction(self):
        return (1 + self.delta) * self.beta

    def good(self, sizes, bads):
        sizes = np.asarray(sizes)
        bads = np.asarray(bads)
        ok = (sizes >= self.min_size) & (sizes <= self.max_size)
        # integer form of bad <= (1+delta)*beta*size, robust to float noise
        return ok & (bads <= np.floor(self.bad_fraction * sizes + 1e-9))


class GroupGraph:
    """Groups led by the IDs of ``base`` with members from a population ring."""

    def __init__(self, base, population, population_bad, members, rule, failure_model="red"):
        if failure_model not in FAILURE_MODELS:
            raise ValueError(f"unknown failure model {failure_model!r}")
        self.base = base
        self.population = population
        self.population_bad = np.asarray(population_bad, dtype=bool)
        self.members = np.asarray(members, dtype=np.int64)
        self.rule = rule
        self.failure_model = failure_model
        n = len(base)
        self.bad_links = np.zeros((n, base.width), dtype=bool)
        self.synthetic_red = None
        self.color_mode = "organic"
        self.adversary_links = {}
        self.ledger = MessageLedger()
        self.refresh()

    def refresh(self):
        filled = self.members >= 0
        self.sizes = filled.sum(axis=1)
        self.bad_counts = (filled & self.population_bad[np.where(filled, self.members, 0)]).sum(axis=1)
        self.good = self.rule.good(self.sizes, self.bad_counts)

    def __len__(self):
        return len(self.base)

    @property
    def confused(self):
        return self.bad_links.any(axis=1)

    @property
    def red(self):
        if self.synthetic_red is not None:
            return self.synthetic_red
        return ~self.good | self.confused

    @property
    def blue(self):
        return ~self.red

    def red_fraction(self):
        return float(self.red.mean())

    def group(self, leader):
        i = self.base.ids.index_of(leader)
        slots = self.members[i]
        mem = tuple((self.population.point(int(j)), "bad" if self.population_bad[j] else "good")
                    for j in slots[slots >= 0])
        return Group(
            leader=self.base.ids.point(i),
            members=mem,
            status_goodness="good" if self.good[i] else "bad",
            status_color="red" if self.red[i] else "blue",
        )

    def neighbors(self, leader):
        """L_w: rule-derived for blue groups, adversary-chosen entries for red ones."""
        i = self.base.ids.index_of(leader)
        if self.red[i] and i in self.adversary_links:
            return {self.base.ids.point(int(j)) for j in self.adversary_links[i]}
        return {self.base.ids.point(int(j)) for j in self.base.neighbor_indices(i)}

    def blocking(self, routes):
        """Hop index of the first breaking group on each route, or -1."""
        path = routes.path
        valid = path >= 0
        idx = np.where(valid, path, 0)
        if self.failure_model == "red" or self.synthetic_red is not None:
            hit = valid & self.red[idx]
        else:
            hit = valid & ~self.good[idx]
            col = routes.cols.astype(np.int64)
            leaves = col >= 0
            wrong = self.bad_links[idx, np.where(leaves, col, 0)] & leaves
            hit |= wrong
        first = np.where(hit.any(axis=1), hit.argmax(axis=1), -1)
        return first

    def search_many(self, routes):
        """Vectorised search outcomes: (failed mask, search-path lengths)."""
        first = self.blocking(routes)
        failed = first >= 0
        lengths = np.where(failed, first + 1, routes.lengths)
        return failed, lengths


def organic(base, population, population_bad, rule, tag=b"g1", failure_model="red"):
    """Groups built with every slot resolved correctly (failure-free construction)."""
    keys = hashing.slot_points(tag, base.ids.values, rule.slots)
    members = population.successor_index(keys.ravel()).reshape(keys.shape)
    return GroupGraph(base, population, population_bad, members, rule, failure_model)


def all_good(base, rule, tag=b"g1"):
    """Groups drawn from the leader ring itself with no bad IDs."""
    return organic(base, base.ids, np.zeros(len(base), dtype=bool), rule, tag)


def mark_colors(q, rng, p_f=None, mode="synthetic"):
    """Synthetic: each group red independently w.p. ``p_f``.  Organic: colour from state."""
    if mode == "synthetic":
        if p_f is None or not 0.0 <= p_f <= 1.0:
            raise ValueError(f"p_f must lie in [0, 1], got {p_f}")
        q.synthetic_red = rng.random(len(q)) < p_f
    elif mode == "organic":
        q.synthetic_red = None
    else:
        raise ValueError(f"unknown colouring mode {mode!r}")
    q.color_mode = mode
    return q


def random_blue_origins(q, count, rng):
    blue = np.flatnonzero(q.blue)
    if blue.size == 0:
        raise ValueError("no blue group to start a search from")
    return blue[rng.integers(0, blue.size, size=count)]


def search_path(q, origin_leader, key):
    i = q.base.ids.index_of(origin_leader)
    if q.red[i]:
        raise ValueError("search origin group is red")
    routes = q.base.route_indices([i], [as_value(key)])
    failed, lengths = q.search_many(routes)
    hops = routes.path[0, : lengths[0]]
    path = tuple(q.base.ids.point(int(j)) for j in hops)
    outcome = SearchOutcome("fail" if failed[0] else "success", path,
                            path[-1] if failed[0] else None)
    q.ledger.add("inter_group", secure_route_cost(q, outcome))
    return outcome


def secure_route_cost(q, outcome):
    """All-to-all messages: sum of |G_a||G_b| over consecutive path groups."""
    idx = [q.base.ids.index_of(p) for p in outcome.path]
    s = q.sizes
    return int(sum(int(s[a]) * int(s[b]) for a, b in zip(idx, idx[1:])))


def path_costs(q, routes, lengths):
    """Vectorised secure-route cost per search path."""
    path = routes.path
    n_hops = path.shape[1]
    s = q.sizes
    a = np.where(path[:, :-1] >= 0, path[:, :-1], 0)
    b = np.where(path[:, 1:] >= 0, path[:, 1:], 0)
    live = np.arange(1, n_hops)[None, :] < lengths[:, None]
    return (s[a] * s[b] * live).sum(axis=1)


@dataclass
class SearchSample:
    """A shared trial set of searches from blue origins to u.a.r. keys."""

    failed: np.ndarray
    lengths: np.ndarray
    visits: np.ndarray  # per-group count of search paths containing it
    costs: np.ndarray

    @property
    def trials(self):
        return self.failed.size

    @property
    def x_hat(self):
        return float(self.failed.mean())

    @property
    def rho_hat(self):
        return self.visits / self.trials


def sample_searches(q, trials, rng, routes=None):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if routes is None:
        origins = random_blue_origins(q, trials, rng)
        keys = rng.integers(0, 1 << 64, size=trials, dtype=np.uint64, endpoint=False)
        routes = q.base.route_indices(origins, keys)
    failed, lengths = q.search_many(routes)
    live = np.arange(routes.path.shape[1])[None, :] < lengths[:, None]
    visits = np.bincount(routes.path[live], minlength=len(q))
    costs = path_costs(q, routes, lengths)
    q.ledger.add("inter_group", int(costs.sum()))
    return SearchSample(failed, lengths, visits, costs)


def estimate_responsibility(q, target, trials, rng):
    i = q.base.ids.index_of(target)
    return float(sample_searches(q, trials, rng).rho_hat[i])


def measure_failure_X(q, trials, rng):
    return sample_searches(q, trials, rng).x_hat


def majority_filter(received):
    """Payload reported by a strict majority of senders."""
    if not received:
        raise ValueError("nothing received")
    latest = {}
    for sender, payload in received:
        latest[sender] = payload
    tally = Counter(latest.values())
    payload, votes = tally.most_common(1)[0]
    if 2 * votes <= len(latest):
        raise FilterInconclusive("filter inconclusive")
    return payload
