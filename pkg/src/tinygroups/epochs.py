"""Epoch-by-epoch construction of group graphs from the previous epoch's graphs.

Ring bookkeeping: ``rings[r]`` holds the IDs generated in epoch ``r - 1``.
During epoch ``j`` the old graphs are led by ``rings[j]`` with members from
``rings[j - 1]``; the new graphs are led by ``rings[j + 1]`` with members
from ``rings[j]``.  An ID is pending in the epoch that generates it, active
in the next, passive in the one after, and expired afterwards.

Searches in the old graphs share one ring, so each (origin, key) is routed
once and judged separately against every old graph.  Construction work is
evaluated on its final state: a slot or link either ended up correct or it
did not.

Dual mode builds two new graphs from two old ones (hash tags ``g1``, ``g2``);
single mode keeps one graph of each and is the ablation.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from tinygroups import hashing, inputgraph
from tinygroups.adversary import AdversaryStrategy, select_id_subset, spam_neighbor_claims, spam_requests
from tinygroups.groupgraph import Group, GroupGraph, SizeRule, organic, path_costs
from tinygroups.idring import SCALE, IdPoint, RingSet, as_value
from tinygroups.pow import lifecycle_state
from tinygroups.seeding import stream


class EpochUnderrun(RuntimeError):
    """Rollover attempted before the new graphs were complete."""


@dataclass(frozen=True)
class EpochParams:
    n: int = 1024
    beta: float = 0.05
    delta: float = 2.5
    d1: float = 8.0
    d2: float = 24.0
    T: int = 4096
    dual: bool = True
    failure_model: str = "link"
    window_c: float = 1.0
    bootstrap_c: float = 1.0
    churn_rate: float = 0.05

    def rule(self):
        return SizeRule(self.n, self.beta, self.delta, self.d1, self.d2)

    @property
    def tags(self):
        return (b"g1", b"g2") if self.dual else (b"g1",)

    @property
    def epsilon_prime(self):
        return 1.0 - 2.0 * (1.0 + self.delta) * self.beta

    @property
    def window(self):
        """Width of the interval behind an ID from which it entertains requests."""
        return self.window_c * math.log(self.n) / self.n


@dataclass(frozen=True)
class MembershipRequest:
    joiner: IdPoint
    slot: int
    graph_tag: bytes
    candidate: IdPoint

    @property
    def hash_point(self):
        return IdPoint(hashing.slot_point(self.graph_tag, self.joiner.value, self.slot))


@dataclass
class ChurnSchedule:
    """Departures (with paired arrivals) over one epoch."""

    events: list  # (step, departing old-ring index, arriving new-ring index)
    caps: np.ndarray  # per new group, per graph: allowed good departures
    good_departures: np.ndarray  # realised, same shape as caps


@dataclass
class EpochState:
    params: EpochParams
    seed: int
    strategy: AdversaryStrategy
    index: int
    step: int
    rings: list
    bads: list
    old_graphs: list
    new_graphs: list = None
    churn: ChurnSchedule = None
    departed: list = field(default_factory=list)  # per ring: departed mask

    def lifecycle(self):
        """ID -> lifecycle state for every ID ever generated."""
        out = {}
        for r, ring in enumerate(self.rings):
            st = lifecycle_state(r - 1, self.index) if self.index >= r - 1 else "pending"
            for p in ring:
                out[p] = st
        return out


def draw_ring(params, seed, r, strategy):
    """Fresh u.a.r. IDs for ring ``r``; the adversary keeps its chosen bad subset."""
    rng = stream(seed, "ids", r)
    vals = RingSet.random(params.n, rng).values
    nbad = int(math.floor(params.beta * params.n))
    pos = rng.choice(params.n, size=nbad, replace=False)
    keep = select_id_subset(vals[pos], strategy.id_subset_rule, stream(seed, "adv-subset", r),
                            strategy.arc, strategy.lowest_fraction)
    good = np.delete(vals, pos)
    ring = RingSet(np.concatenate([good, keep]))
    return ring, np.isin(ring.values, keep)


def initial_state(params, seed, strategy=None):
    """Epoch-0 graphs built directly: every slot and link correct."""
    strategy = strategy or AdversaryStrategy.worst()
    rings, bads = [], []
    for r in (0, 1):
        ring, bad = draw_ring(params, seed, r, strategy)
        rings.append(ring)
        bads.append(bad)
    base = inputgraph.build(rings[1])
    rule = params.rule()
    graphs = [organic(base, rings[0], bads[0], rule, tag, params.failure_model) for tag in params.tags]
    st = EpochState(params, seed, strategy, 0, params.T - 1, rings, bads, graphs)
    st.departed = [np.zeros(len(rings[0]), bool), np.zeros(len(rings[1]), bool)]
    return st


def dual_search(old_graphs, origins, keys):
    """Route once, judge in every old graph.  Returns (routes, ok[k, q])."""
    routes = old_graphs[0].base.route_indices(origins, keys)
    ok = np.empty((len(old_graphs), routes.path.shape[0]), dtype=bool)
    for x, g in enumerate(old_graphs):
        failed, lengths = g.search_many(routes)
        ok[x] = ~failed
        g.ledger.add("inter_group", int(path_costs(g, routes, lengths).sum()))
    return routes, ok


def bootstrap_pool(old_graphs):
    """Old groups blue in every old graph (fallbacks: good in all, then any)."""
    blue = np.all([g.blue for g in old_graphs], axis=0)
    if blue.any():
        return np.flatnonzero(blue)
    good = np.all([g.good for g in old_graphs], axis=0)
    if good.any():
        return np.flatnonzero(good)
    return np.arange(len(old_graphs[0]))


def resolve_slots(old_graphs, old_bad, origins, keys, misroute, adv_rng):
    """Fill membership slots for hash points ``keys`` searched from ``origins``.

    A found candidate is the true successor; it joins iff one of its own
    verification searches confirms it (bad candidates always join).  When
    every search fails, a misrouting adversary hands back a bad ID.
    """
    routes, ok = dual_search(old_graphs, origins, keys)
    found = ok.any(axis=0)
    cand = routes.resolved
    _, vok = dual_search(old_graphs, cand, keys)
    accept = vok.any(axis=0) | old_bad[cand]
    slots = np.where(found & accept, cand, -1)
    lost = np.flatnonzero(~found)
    bad_idx = np.flatnonzero(old_bad)
    if misroute and lost.size and bad_idx.size:
        slots[lost] = bad_idx[adv_rng.integers(0, bad_idx.size, size=lost.size)]
    return slots, dict(found=found, accept=accept)


def link_pairs(base):
    rows, cols = np.nonzero(np.arange(base.width)[None, :] < base.degree[:, None])
    return rows, cols, base.neighbors[rows, cols]


def window_recipients(ring, points, width, exclude_successor=True):
    """(point index, ring index) pairs with the point in ``[w - width, w)`` for ID ``w``.

    With ``exclude_successor`` the point's true successor is left out: a
    request landing there is legitimate.
    """
    v = ring.values
    n = len(ring)
    points = np.asarray(points, dtype=np.uint64)
    span = np.uint64(int(width * SCALE))
    lo = np.searchsorted(v, points, side="right")
    ends = points + span
    hi = np.searchsorted(v, ends, side="right")
    cnt = np.where(ends < points, n - lo + hi, hi - lo)
    first = np.where(np.isin(points, v), 0, 1) if exclude_successor else np.zeros(points.size, int)
    q_idx, r_idx = [], []
    for off in range(int(cnt.max(initial=0))):
        sel = np.flatnonzero((cnt > off) & (off >= first))
        q_idx.append(sel)
        r_idx.append((lo[sel] + off) % n)
    if not q_idx:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(q_idx), np.concatenate(r_idx)


def construct(state):
    """Build the new graphs of epoch ``state.index + 1`` from the current old graphs."""
    p = state.params
    j = state.index + 1
    seed = state.seed
    strategy = state.strategy
    old = state.old_graphs
    old_ring, old_bad = state.rings[j], state.bads[j]
    new_ring, new_bad = draw_ring(p, seed, j + 1, strategy)
    base = inputgraph.build(new_ring)
    rule = p.rule()
    m = rule.slots
    adv_rng = stream(seed, "adversary", j)
    pool = bootstrap_pool(old)
    misroute = strategy.search_behavior == "misroute_to_red"
    new_graphs, boots, info = [], [], {}
    for x, tag in enumerate(p.tags):
        boot = pool[stream(seed, "bootstrap", j, x).integers(0, pool.size, size=len(new_ring))]
        boots.append(boot)
        keys = hashing.slot_points(tag, new_ring.values, m)
        slots, _ = resolve_slots(old, old_bad, np.repeat(boot, m), keys.ravel(), misroute, adv_rng)
        q = GroupGraph(base, old_ring, old_bad, slots.reshape(len(new_ring), m), rule, p.failure_model)
        # links: located from the joiner's bootstrap, confirmed from the neighbour's
        a, c, b = link_pairs(base)
        anchor = new_ring.values[b]
        _, sok = dual_search(old, boot[a], anchor)
        _, vok = dual_search(old, boot[b], anchor)
        bad_link = ~(sok.any(axis=0) & vok.any(axis=0))
        q.bad_links[a[bad_link], c[bad_link]] = True
        new_graphs.append(q)

    info["spam_member_accepts"] = _membership_spam(state, new_ring, new_bad, m, adv_rng)
    info["spam_neighbor_accepts"] = _neighbor_spam(state, new_ring, new_bad, boots)
    state.rings.append(new_ring)
    state.bads.append(new_bad)
    state.departed.append(np.zeros(len(new_ring), bool))
    state.new_graphs = new_graphs
    state.churn = schedule_churn(state, stream(seed, "churn", j))
    for step, dep, _ in state.churn.events:
        apply_departure(state, dep)
    state.step = p.T - 1
    return info


def _membership_spam(state, new_ring, new_bad, m, adv_rng):
    """Erroneously accepted forged membership requests, per good old ID."""
    p = state.params
    old = state.old_graphs
    old_ring, old_bad = state.rings[state.index + 1], state.bads[state.index + 1]
    counts = np.zeros(len(old_ring), dtype=np.int64)
    batch = spam_requests(state.strategy, new_ring.values[new_bad], m, adv_rng, p.tags)
    if batch.points.size == 0:
        return counts
    legit = batch.slots <= m  # out-of-range slots are refused without a search
    pts = batch.points[legit]
    qi, ri = window_recipients(old_ring, pts, p.window)
    good = ~old_bad[ri]
    qi, ri = qi[good], ri[good]
    if qi.size:
        _, ok = dual_search(old, ri, pts[qi])
        fooled = (~ok).any(axis=0)
        np.add.at(counts, ri[fooled], 1)
    return counts


def _neighbor_spam(state, new_ring, new_bad, boots):
    """Erroneously accepted forged neighbour claims, per good new ID."""
    p = state.params
    counts = np.zeros(len(new_ring), dtype=np.int64)
    leaders, anchors = spam_neighbor_claims(state.strategy, new_ring.values[new_bad],
                                            inputgraph.finger_offsets())
    if anchors.size == 0:
        return counts
    anchors = np.unique(anchors)
    qi, ri = window_recipients(new_ring, anchors, p.window)
    good = ~new_bad[ri]
    qi, ri = qi[good], ri[good]
    for boot in boots:
        if qi.size:
            _, ok = dual_search(state.old_graphs, boot[ri], anchors[qi])
            fooled = (~ok).any(axis=0)
            np.add.at(counts, ri[fooled], 1)
    return counts


def schedule_churn(state, rng):
    """Departures among active IDs, capped at an eps'/2 share of any new group's good members."""
    p = state.params
    j = state.index + 1
    ring_bad = state.bads[j]
    graphs = state.new_graphs
    n_old = len(state.rings[j])
    caps, used = [], []
    for q in graphs:
        good_slots = (q.members >= 0) & ~q.population_bad[np.where(q.members >= 0, q.members, 0)]
        caps.append(np.floor(p.epsilon_prime / 2 * good_slots.sum(axis=1)).astype(np.int64))
        used.append(np.zeros(len(q), dtype=np.int64))
    caps, used = np.array(caps), np.array(used)
    # slot counts per (graph, group, member) for the cap check
    holders = []
    for q in graphs:
        g_idx, s_idx = np.nonzero(q.members >= 0)
        holders.append((q.members[g_idx, s_idx], g_idx))
    target = int(round(p.churn_rate * n_old))
    events = []
    arrivals = rng.permutation(len(state.rings[j + 1]))
    for dep in rng.permutation(n_old):
        if len(events) >= target:
            break
        if not ring_bad[dep]:
            hits = [np.bincount(g[mem == dep], minlength=len(graphs[0])) for mem, g in holders]
            if any(np.any(used[x] + hits[x] > caps[x]) for x in range(len(graphs))):
                continue
            for x in range(len(graphs)):
                used[x] += hits[x]
        events.append((int(rng.integers(0, p.T)), int(dep), int(arrivals[len(events)])))
    events.sort()
    return ChurnSchedule(events, caps, used)


def apply_departure(state, dep):
    """An old-ring ID leaves: it vacates its new-group slots; groups it leads persist."""
    j = state.index + 1
    state.departed[j][dep] = True
    for q in state.new_graphs or []:
        live = (q.members >= 0) & ~state.departed[j][np.where(q.members >= 0, q.members, 0)]
        empty = ~live.any(axis=1)
        if empty.any():
            # links into a group with nobody left are null
            a, c, b = link_pairs(q.base)
            dead = empty[b]
            q.bad_links[a[dead], c[dead]] = True
    return state


def majority_kept(state, q):
    """Groups whose remaining members still have a strict good majority."""
    j = state.index + 1
    filled = q.members >= 0
    idx = np.where(filled, q.members, 0)
    live = filled & ~state.departed[j][idx]
    bad = (live & q.population_bad[idx]).sum(axis=1)
    return 2 * bad < live.sum(axis=1)


def advance_epoch(state):
    """New graphs become old; a fresh epoch opens."""
    if state.new_graphs is None or state.step != state.params.T - 1:
        raise EpochUnderrun("epoch underrun")
    state.old_graphs = state.new_graphs
    state.new_graphs = None
    state.index += 1
    state.step = 0
    return state


def state_cost_census(state, info=None):
    """Per-ID state in the new graphs: memberships, link state and erroneous accepts."""
    j = state.index + 1
    ring_bad = state.bads[j]
    good_old = ~ring_bad
    # a slot is a membership (an ID holding two slots of one group votes twice);
    # distinct groups are reported alongside
    slots, distinct = [], []
    for q in state.new_graphs:
        g_idx, s_idx = np.nonzero(q.members >= 0)
        held = q.members[g_idx, s_idx]
        slots.append(np.bincount(held, minlength=len(ring_bad)))
        pairs = np.unique(np.stack([held, g_idx]), axis=1)
        distinct.append(np.bincount(pairs[0], minlength=len(ring_bad)))
    memberships = np.mean(slots, axis=0)
    groups = np.mean(distinct, axis=0)
    base = state.new_graphs[0].base
    new_good = ~state.bads[j + 1]
    link_state = base.degree + inputgraph.in_degree(base)
    out = {
        "mean_memberships": float(memberships[good_old].mean()),
        "p95_memberships": float(np.percentile(memberships[good_old], 95)),
        "mean_distinct_groups": float(groups[good_old].mean()),
        "mean_link_state": float(link_state[new_good].mean()),
        "max_link_state": int(link_state[new_good].max()),
    }
    if info is not None:
        mem_err = info["spam_member_accepts"][good_old]
        nb_err = info["spam_neighbor_accepts"][new_good]
        out["mean_erroneous_member_accepts"] = float(mem_err.mean())
        out["mean_erroneous_neighbor_accepts"] = float(nb_err.mean())
        out["mean_erroneous_accepts"] = float(mem_err.mean() + nb_err.mean())
    return out


def epoch_metrics(state, info):
    reds = [q.red_fraction() for q in state.new_graphs]
    row = {
        "epoch": state.index + 1,
        "red_fraction_g1": reds[0],
        "red_fraction_g2": reds[1] if len(reds) > 1 else reds[0],
        "red_fraction": float(np.mean(reds)),
        "bad_fraction": float(np.mean([1 - q.good.mean() for q in state.new_graphs])),
        "confused_fraction": float(np.mean([q.confused.mean() for q in state.new_graphs])),
        "majority_lost": int(sum((~majority_kept(state, q) & q.good).sum() for q in state.new_graphs)),
        "churn_events": len(state.churn.events),
        "msg_totals": int(sum(g.ledger.counters["inter_group"] for g in state.old_graphs)),
    }
    row.update(state_cost_census(state, info))
    return row


def run(params, seed, epochs, strategy=None):
    """Run ``epochs`` epochs and return one metrics row per epoch."""
    state = initial_state(params, seed, strategy)
    rows = []
    for _ in range(epochs):
        info = construct(state)
        rows.append(epoch_metrics(state, info))
        advance_epoch(state)
    return rows


# single-item views of the vectorised construction -------------------------

def build_membership(old_graphs, old_bad, w, graph_tag, rule, boot_index, adv_rng=None, misroute=False):
    """Group of new leader ``w`` built by searching from old group ``boot_index``."""
    m = rule.slots
    keys = hashing.slot_points(graph_tag, [as_value(w)], m).ravel()
    rng = adv_rng if adv_rng is not None else np.random.default_rng(0)
    slots, _ = resolve_slots(old_graphs, old_bad, np.full(m, boot_index), keys, misroute, rng)
    ring = old_graphs[0].base.ids
    mem = tuple((ring.point(int(s)), "bad" if old_bad[s] else "good") for s in slots if s >= 0)
    size = len(mem)
    nbad = sum(1 for _, a in mem if a == "bad")
    good = bool(rule.good([size], [nbad])[0])
    return Group(IdPoint(as_value(w)), mem, "good" if good else "bad", "blue" if good else "red")


def verify_membership(u, req, old_graphs):
    """``u`` accepts iff one of its searches for the hash point returns ``u``."""
    ring = old_graphs[0].base.ids
    i = ring.index_of(u)
    _, ok = dual_search(old_graphs, [i], [req.hash_point.value])
    resolved = ring.successor_index([req.hash_point.value])[0]
    return bool(ok[:, 0].any() and resolved == i)


def build_neighbors(old_graphs, new_base, w, boot_of):
    """Links of new group ``w``: the neighbours whose location and confirmation both succeed."""
    a = new_base.ids.index_of(w)
    nb = new_base.neighbor_indices(a)
    anchor = new_base.ids.values[nb]
    _, sok = dual_search(old_graphs, np.full(nb.size, boot_of(a)), anchor)
    _, vok = dual_search(old_graphs, np.array([boot_of(int(b)) for b in nb]), anchor)
    ok = sok.any(axis=0) & vok.any(axis=0)
    return {new_base.ids.point(int(b)) for b in nb[ok]}


@dataclass(frozen=True)
class BootstrapSample:
    groups: np.ndarray
    members: np.ndarray
    good_majority: bool


def bootstrap_group_count(n, c_b=1.0):
    return math.ceil(c_b * math.log(n) / math.log(math.log(n)))


def sample_bootstrap(q, rng, c_b=1.0):
    """Union of the members of ``c_b ln n / ln ln n`` groups chosen u.a.r."""
    k = bootstrap_group_count(len(q), c_b)
    if len(q) < k:
        raise ValueError(f"need at least {k} groups to bootstrap")
    groups = rng.choice(len(q), size=k, replace=False)
    slots = q.members[groups].ravel()
    members = np.unique(slots[slots >= 0])
    bad = q.population_bad[members].sum()
    return BootstrapSample(np.sort(groups), members, bool(2 * bad < members.size))
