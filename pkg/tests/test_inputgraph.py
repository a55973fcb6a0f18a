import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tinygroups import inputgraph
from tinygroups.idring import SCALE, IdPoint, RingSet

from conftest import random_graph


def test_four_point_ring():
    g = inputgraph.ring_from_fractions([0.0, 0.25, 0.5, 0.75])
    g = inputgraph.build(g)
    assert inputgraph.neighbor_set(g, IdPoint.from_float(0.0)) == {
        IdPoint.from_float(x) for x in (0.25, 0.5, 0.75)}
    assert inputgraph.route(g, IdPoint.from_float(0.0), 0.6).resolved == IdPoint.from_float(0.75)


def test_needs_two_ids():
    with pytest.raises(ValueError):
        inputgraph.build(RingSet([IdPoint.from_float(0.5)]))


def test_degree_is_logarithmic(graph256):
    d = inputgraph.degree_census(graph256)
    assert d.min() >= 2
    assert d.max() <= 4 * np.log2(256)


def test_route_stays_within_hop_budget(graph256, rng):
    o, k = inputgraph.random_queries(graph256, 5000, rng)
    r = graph256.route_indices(o, k)
    assert (r.resolved == graph256.ids.successor_index(k)).all()
    assert r.lengths.max() - 1 <= 2 * np.log2(256)


def test_route_path_follows_links(graph256, rng):
    o, k = inputgraph.random_queries(graph256, 200, rng)
    r = graph256.route_indices(o, k)
    for q in range(200):
        hops = r.path[q, : r.lengths[q]]
        for a, b in zip(hops, hops[1:]):
            assert b in graph256.neighbor_indices(a)


def test_exact_congestion_matches_sampling():
    g = random_graph(32, seed=4)
    exact = inputgraph.exact_congestion(g)
    sampled = inputgraph.congestion_array(g, 200_000, np.random.default_rng(5))
    assert np.abs(exact - sampled).max() < 0.01


def test_exact_congestion_size_limit(graph256):
    with pytest.raises(ValueError):
        inputgraph.exact_congestion(graph256)


def test_load_shares_partition_ring():
    g = random_graph(50, seed=6)
    assert inputgraph.share_total(g) == pytest.approx(1.0)


def test_neighbor_claims(graph256):
    w = graph256.ids.point(10)
    for u in inputgraph.neighbor_set(graph256, w):
        assert inputgraph.verify_neighbor_claim(graph256, u, w)
    outsider = next(graph256.ids.point(j) for j in range(len(graph256))
                    if graph256.ids.point(j) not in inputgraph.neighbor_set(graph256, w) and j != 10)
    assert not inputgraph.verify_neighbor_claim(graph256, outsider, w)


def test_to_json_lists_every_id():
    g = random_graph(8)
    js = g.to_json()
    assert len(js) == 8 and all(len(e["neighbors"]) == g.degree[i] for i, e in enumerate(js))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, SCALE - 1), min_size=2, max_size=48, unique=True), st.data())
def test_routing_resolves_to_brute_successor(values, data):
    g = inputgraph.build(RingSet(np.array(values, dtype=np.uint64)))
    origin = data.draw(st.integers(0, len(values) - 1))
    key = data.draw(st.integers(0, SCALE - 1))
    r = g.route_indices([origin], [key])
    assert int(g.ids.values[r.resolved[0]]) == inputgraph.brute_successor(values, key)
