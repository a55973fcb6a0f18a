"""Chord-style input graph: linking rule, greedy routing and load/congestion probes.

The graph is stored index-wise: ``neighbors[i]`` holds ring indices of the
IDs that ID ``i`` links to (predecessor, successor and the successors of
``w + 2**(i-1)`` for ``i = 1..64``), padded with ``i`` itself so that
routing can be vectorised over many queries at once.
"""

from dataclasses import dataclass
import math

import numpy as np

from tinygroups.idring import MASK64, IdPoint, RingSet, as_value, clockwise_distance

FINGER_BITS = 64


class RoutingDivergence(RuntimeError):
    """A route exceeded the hop budget; only possible on a mis-built graph."""


@dataclass(frozen=True)
class SearchTrace:
    origin: IdPoint
    key: IdPoint
    path: tuple
    resolved: IdPoint


@dataclass
class Routes:
    """Vectorised routing result.

    ``path[q, h]`` is the ring index at hop ``h`` (``-1`` past the end) and
    ``cols[q, h]`` the neighbour column used to leave it.
    """

    origins: np.ndarray
    keys: np.ndarray
    resolved: np.ndarray
    path: np.ndarray
    cols: np.ndarray
    lengths: np.ndarray


def finger_offsets():
    return np.array([1 << (i - 1) for i in range(1, FINGER_BITS + 1)], dtype=np.uint64)


class InputGraph:
    """Chord input graph over a fixed :class:`RingSet`."""

    finger_rule = "chord"

    def __init__(self, ids, neighbors, degree):
        self.ids = ids
        self.neighbors = neighbors
        self.degree = degree
        n = len(ids)
        self.max_hops = 2 * max(1, math.ceil(math.log2(n))) + 2

    def __len__(self):
        return len(self.ids)

    @property
    def width(self):
        return self.neighbors.shape[1]

    def neighbor_indices(self, i):
        return self.neighbors[i, : self.degree[i]]

    def route_indices(self, origins, keys):
        """Greedy no-overshoot routing for many (origin index, key) pairs."""
        ids = self.ids.values
        origins = np.asarray(origins, dtype=np.int64)
        keys = np.asarray(keys, dtype=np.uint64)
        target = self.ids.successor_index(keys).astype(np.int64)
        q = origins.size
        hmax = self.max_hops
        path = np.full((q, hmax), -1, dtype=np.int32)
        cols = np.full((q, hmax), -1, dtype=np.int16)
        cur = origins.copy()
        path[:, 0] = cur
        active = np.flatnonzero(cur != target)
        for h in range(1, hmax):
            if active.size == 0:
                break
            c = cur[active]
            nb = self.neighbors[c]
            base = ids[c]
            prog = ids[nb] - base[:, None]
            limit = ids[target[active]] - base
            score = np.where(prog <= limit[:, None], prog, np.uint64(0))
            col = np.argmax(score, axis=1)
            nxt = nb[np.arange(active.size), col]
            cols[active, h - 1] = col
            path[active, h] = nxt
            cur[active] = nxt
            active = active[nxt != target[active]]
        if active.size:
            raise RoutingDivergence(f"{active.size} routes exceeded {hmax} hops")
        lengths = (path >= 0).sum(axis=1)
        return Routes(origins, keys, target, path, cols, lengths)

    def to_json(self):
        return [
            {"id": self.ids.point(i).hex(),
             "neighbors": [self.ids.point(j).hex() for j in self.neighbor_indices(i)]}
            for i in range(len(self))
        ]


def build(ids):
    """Link every ID to its predecessor, successor and finger successors."""
    if not isinstance(ids, RingSet):
        ids = RingSet(ids)
    n = len(ids)
    if n < 2:
        raise ValueError("input graph needs at least 2 IDs")
    v = ids.values
    fingers = ids.successor_index((v[:, None] + finger_offsets()[None, :]).ravel()).reshape(n, -1)
    own = np.arange(n)
    cand = np.concatenate([((own - 1) % n)[:, None], ((own + 1) % n)[:, None], fingers], axis=1)
    rows = []
    for i in range(n):
        nb = np.unique(cand[i])
        nb = nb[nb != i]
        # clockwise order from i; the predecessor ends up last
        rows.append(nb[np.argsort(v[nb] - v[i])])
    degree = np.array([len(r) for r in rows], dtype=np.int64)
    width = int(degree.max())
    table = np.repeat(own[:, None], width, axis=1)
    for i, r in enumerate(rows):
        table[i, : len(r)] = r
    table.setflags(write=False)
    return InputGraph(ids, table, degree)


def neighbor_set(g, w):
    i = g.ids.index_of(w)
    return {g.ids.point(int(j)) for j in g.neighbor_indices(i)}


def route(g, origin, key):
    i = g.ids.index_of(origin)
    r = g.route_indices([i], [as_value(key)])
    hops = r.path[0, : r.lengths[0]]
    return SearchTrace(
        origin=g.ids.point(i),
        key=IdPoint(as_value(key)),
        path=tuple(g.ids.point(int(j)) for j in hops),
        resolved=g.ids.point(int(r.resolved[0])),
    )


def random_queries(g, trials, rng):
    origins = rng.integers(0, len(g), size=trials)
    keys = rng.integers(0, 1 << 64, size=trials, dtype=np.uint64, endpoint=False)
    return origins, keys


def traversal_counts(routes, n):
    hit = routes.path[routes.path >= 0]
    return np.bincount(hit, minlength=n)


def measure_congestion(g, trials, rng):
    """Empirical per-ID traversal probability over u.a.r. (origin, key) searches."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    freq = congestion_array(g, trials, rng)
    return {g.ids.point(i): float(f) for i, f in enumerate(freq)}


def congestion_array(g, trials, rng, chunk=50_000):
    counts = np.zeros(len(g), dtype=np.int64)
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        o, k = random_queries(g, m, rng)
        counts += traversal_counts(g.route_indices(o, k), len(g))
        done += m
    return counts / trials


def exact_congestion(g):
    """Exact traversal probabilities by enumerating origins and successor classes.

    Greedy routing depends on the key only through its successor, so each
    (origin, responsible ID) pair is weighted by the responsible ID's share.
    """
    n = len(g)
    if n > 64:
        raise ValueError("exact enumeration is limited to rings of <= 64 IDs")
    origins = np.repeat(np.arange(n), n)
    targets = np.tile(np.arange(n), n)
    r = g.route_indices(origins, g.ids.values[targets])
    shares = np.array([load_share_index(g, t) for t in range(n)])
    prob = np.zeros(n)
    for q in range(r.path.shape[0]):
        hops = r.path[q, : r.lengths[q]]
        prob[hops] += shares[targets[q]] / n
    return prob


def load_share_index(g, i):
    v = g.ids.values
    if len(g) == 1:
        return 1.0
    return ((int(v[i]) - int(v[(i - 1) % len(g)])) & MASK64) / float(1 << 64)


def load_share(g, w):
    return load_share_index(g, g.ids.index_of(w))


def verify_neighbor_claim(g, u, w):
    """Re-derive ``w``'s links by routing and check whether ``u`` is among them."""
    u, w = IdPoint(as_value(u)), IdPoint(as_value(w))
    if u == w or w not in g.ids or u not in g.ids:
        return False
    targets = [(w.value + (1 << (i - 1))) & MASK64 for i in range(1, FINGER_BITS + 1)]
    targets.append((w.value + 1) & MASK64)
    for key in targets:
        if route(g, w, key).resolved == u:
            return True
    # u is w's predecessor iff the first ID after u is w
    return route(g, w, (u.value + 1) & MASK64).resolved == w


def degree_census(g):
    return g.degree.copy()


def in_degree(g):
    nb = np.concatenate([g.neighbor_indices(i) for i in range(len(g))])
    return np.bincount(nb, minlength=len(g))


def brute_successor(points, key):
    """Linear-scan successor oracle on raw values."""
    after = [p for p in points if p >= key]
    return min(after) if after else min(points)


def ring_from_fractions(fracs):
    return RingSet([IdPoint.from_float(x) for x in fracs])


def share_total(g):
    return sum(clockwise_distance(g.ids.values[i - 1], g.ids.values[i]) for i in range(len(g)))
