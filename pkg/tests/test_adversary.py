import numpy as np
import pytest

from tinygroups.adversary import AdversaryStrategy, select_id_subset, spam_neighbor_claims, spam_requests
from tinygroups.idring import SCALE
from tinygroups.inputgraph import build, finger_offsets
from tinygroups.idring import RingSet


def bad_ids(k=40, seed=0):
    return np.random.default_rng(seed).integers(0, SCALE, size=k, dtype=np.uint64, endpoint=False)


def test_subset_rules():
    v = bad_ids()
    assert (select_id_subset(v, "all") == np.sort(v)).all()
    arc = select_id_subset(v, "contiguous_arc", arc=(0.0, 0.5))
    assert (arc < np.uint64(SCALE // 2)).all()
    assert arc.size == (v < np.uint64(SCALE // 2)).sum()
    half = select_id_subset(v, "random_half", np.random.default_rng(1))
    assert half.size == 20 and np.isin(half, v).all()
    low = select_id_subset(v, "lowest_fraction", fraction=0.25)
    assert (low == np.sort(v)[:10]).all()


def test_random_half_needs_rng():
    with pytest.raises(ValueError):
        select_id_subset(bad_ids(), "random_half")


@pytest.mark.parametrize("rule", ["all", "random_half", "contiguous_arc", "lowest_fraction"])
def test_routing_unaffected_by_subset_choice(rule):
    rng = np.random.default_rng(3)
    good = RingSet.random(1024 - 51, rng).values
    keep = select_id_subset(bad_ids(51, 4), rule, rng)
    g = build(RingSet(np.concatenate([good, keep])))
    o = rng.integers(0, len(g), 3000)
    k = rng.integers(0, SCALE, 3000, dtype=np.uint64, endpoint=False)
    r = g.route_indices(o, k)
    assert (r.resolved == g.ids.successor_index(k)).all()
    assert r.lengths.max() - 1 <= 2 * np.log2(len(g))


def test_strategy_validation():
    with pytest.raises(ValueError):
        AdversaryStrategy(search_behavior="teleport")
    with pytest.raises(ValueError):
        AdversaryStrategy(spam_volume=-1)
    with pytest.raises(ValueError):
        AdversaryStrategy.from_name("nope")
    w = AdversaryStrategy.worst()
    assert w.spams_memberships and w.spams_neighbors
    p = AdversaryStrategy.passive()
    assert not p.spams_memberships and p.gossip_behavior == "none"
    assert w.with_(request_behavior="none").request_behavior == "none"


def test_spam_batches():
    leaders = bad_ids(5)
    s = AdversaryStrategy(request_behavior="spam_memberships", spam_volume=2.0)
    batch = spam_requests(s, leaders, 10, np.random.default_rng(0))
    legit = 5 * 10 * 2
    assert batch.points.size == 2 * legit
    assert (batch.slots[legit:] > 10).all()
    none = spam_requests(AdversaryStrategy.passive(), leaders, 10, np.random.default_rng(0))
    assert none.points.size == 0
    a, b = spam_neighbor_claims(AdversaryStrategy(request_behavior="spam_neighbors"), leaders,
                                finger_offsets()[:3])
    assert a.size == b.size == 15
