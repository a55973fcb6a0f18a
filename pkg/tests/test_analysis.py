import math

import pytest
from hypothesis import given, settings, strategies as st

from tinygroups.analysis import (bounded_differences_tail, chernoff_group_failure, fit_through_origin,
                                 pf_target, size_groups_for_target)

# exact binomial sums computed with rational arithmetic before the build
TAIL_M20_P05_HALF = 5.379600583984644e-10
TAIL_M47_P05_ABOVE8 = 0.0004706510460126912
SIZED_M_N4096_K2 = 18
SIZED_TAIL_N4096_K2 = 0.010873223608926563


def test_zero_probability():
    t = chernoff_group_failure(20, 0.0, 0.5)
    assert t.exact == 0.0 and t.chernoff == 0.0


def test_frozen_exact_tails():
    assert chernoff_group_failure(20, 0.05, 0.5).exact == pytest.approx(TAIL_M20_P05_HALF, rel=1e-9)
    assert chernoff_group_failure(47, 0.05, 0.175).exact == pytest.approx(TAIL_M47_P05_ABOVE8, rel=1e-9)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        chernoff_group_failure(0, 0.1, 0.5)
    with pytest.raises(ValueError):
        chernoff_group_failure(10, 1.1, 0.5)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 300), st.floats(0.001, 0.3), st.floats(0.05, 0.49))
def test_exact_tail_below_chernoff(m, p, thr):
    t = chernoff_group_failure(m, p, thr)
    assert t.exact <= t.chernoff + 1e-12


def test_sizing_frozen():
    s = size_groups_for_target(0.05, 2.5, pf_target(4096, 2), 4096)
    assert s.m == SIZED_M_N4096_K2
    assert s.tail == pytest.approx(SIZED_TAIL_N4096_K2, rel=1e-9)
    assert math.ceil(s.d1 * math.log(math.log(4096))) == s.m


def test_sizing_trivial_target():
    s = size_groups_for_target(0.05, 2.5, 1.0, 4096)
    assert s.m == 3


def test_sizing_monotone_in_k():
    ms = [size_groups_for_target(0.05, 2.5, pf_target(4096, k), 4096).m for k in (1, 2, 3, 4, 5)]
    assert ms == sorted(ms)


def test_sizing_errors():
    with pytest.raises(ValueError, match="infeasible"):
        size_groups_for_target(0.3, 1.0, 0.01, 1024)
    with pytest.raises(ValueError, match="unreachable"):
        size_groups_for_target(0.05, 0.1, 1e-300, 1024, d1_max=5)


def test_bounded_differences():
    assert bounded_differences_tail(1.0, []) == 0.0
    assert bounded_differences_tail(10.0, [1.0] * 4) == pytest.approx(2 * math.exp(-50))


def test_fit_through_origin():
    a, rss = fit_through_origin([1, 2, 3], [2, 4, 6])
    assert a == pytest.approx(2.0) and rss == pytest.approx(0.0)
