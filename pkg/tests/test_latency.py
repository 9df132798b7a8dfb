from types import SimpleNamespace

import pytest
from hypothesis import given, strategies as st

from edgecast.errors import InvalidInputError, InvalidTopologyError, NoCapacityError
from edgecast.geo import make_topology
from edgecast.latency import (LatencyBreakdown, LinkParams, access_delay, backhaul_delay,
                              compose_cloud_latency, compose_edge_latency, expected_node_ms,
                              interedge_delay, predict_latency)
from edgecast.policy import ClusterState

KM_PER_DEG_LAT = 111.19492664455873
nonneg = st.floats(0, 1e4)


def pair_topology(km):
    return make_topology([41.0, 41.0 + km / KM_PER_DEG_LAT], [-87.0, -87.0])


def test_access_delay():
    p = LinkParams(alpha=0.005, delta=0.005)
    assert access_delay(0, p) == 0
    assert access_delay(2, p) == pytest.approx(0.02)
    assert access_delay(4, p) == pytest.approx(2 * access_delay(2, p))
    with pytest.raises(InvalidInputError):
        access_delay(-1, p)


def test_backhaul_delay():
    p = LinkParams(beta=0.005, bw_ap_cloud=1e9, payload_bits=1e6)
    assert backhaul_delay(2700, p) == pytest.approx(14.5)
    assert backhaul_delay(0, LinkParams(payload_bits=1e-12)) == pytest.approx(0, abs=1e-9)
    half = LinkParams(beta=0.005, bw_ap_cloud=5e8, payload_bits=1e6)
    assert backhaul_delay(2700, half) - backhaul_delay(2700, p) == pytest.approx(p.backhaul_tx_ms)
    with pytest.raises(InvalidInputError):
        backhaul_delay(-0.1, p)


def test_interedge_delay():
    topo = pair_topology(5.0)
    p = LinkParams(wired_prop=0.005, bw_interedge=1e9, payload_bits=1e6)
    assert interedge_delay(0, 0, topo, p) == 0
    assert interedge_delay(0, 1, topo, p) == pytest.approx(1.025, abs=1e-9)
    slow = LinkParams(wired_prop=0.005, bw_interedge=1e8, payload_bits=1e6)
    assert interedge_delay(1, 0, topo, slow) == pytest.approx(10.025, abs=1e-9)
    with pytest.raises(InvalidTopologyError):
        interedge_delay(0, 2, topo, p)


def test_compose():
    assert compose_edge_latency(0, 0, 5).total_ms == 5
    assert compose_edge_latency(0.02, 1.025, 5.0).total_ms == pytest.approx(6.045)
    cloud = compose_cloud_latency(0.02, 14.5, 3.0)
    assert cloud.total_ms == pytest.approx(17.52)
    assert cloud.total_ms > 15
    assert cloud.switch_ms == 0 and compose_edge_latency(1, 2, 3).backhaul_ms == 0
    assert compose_cloud_latency(0, 0, 4.0).total_ms == 4.0
    with pytest.raises(InvalidInputError):
        compose_edge_latency(0, -1, 1)
    with pytest.raises(InvalidInputError):
        compose_cloud_latency(0, 1, float("nan"))


@given(nonneg, nonneg, nonneg)
def test_total_is_sum(a, b, c):
    bd = LatencyBreakdown(a, b, 0.0, c)
    assert bd.total_ms == a + b + c
    assert bd.as_dict()["total_ms"] == bd.total_ms
    assert compose_edge_latency(a, b, c).total_ms == pytest.approx(compose_edge_latency(c, b, a).total_ms)


@given(st.floats(1e6, 1e12), st.floats(1e6, 1e12))
def test_cloud_nonincreasing_in_bandwidth(bw1, bw2):
    lo, hi = sorted((bw1, bw2))
    assert backhaul_delay(100, LinkParams(bw_ap_cloud=hi)) <= backhaul_delay(100, LinkParams(bw_ap_cloud=lo))


def test_link_validation():
    with pytest.raises(InvalidInputError):
        LinkParams(alpha=-1)
    with pytest.raises(InvalidInputError):
        LinkParams(bw_interedge=0)


def test_expected_node_ms():
    assert expected_node_ms(0, 0, 2, 5.0) == 5.0
    assert expected_node_ms(2, 0, 2, 5.0) == pytest.approx(7.5)
    assert expected_node_ms(2, 3, 2, 5.0) == pytest.approx(15.0)
    with pytest.raises(NoCapacityError):
        expected_node_ms(0, 0, 0, 5.0)


def make_state(edge_units, cloud_units, link=None):
    topo = pair_topology(5.0)
    return ClusterState(topo, edge_units, cloud_units, link or LinkParams(), mu=200.0)


def test_predict_idle_home_edge():
    st_ = make_state([1, 1], 1)
    req = SimpleNamespace(home_ap=0, access_ms=0.3)
    assert predict_latency(req, 0, st_) == pytest.approx(0.3 + 5.0)


def test_predict_cloud_at_least_backhaul():
    st_ = make_state([1, 1], 1)
    req = SimpleNamespace(home_ap=1, access_ms=0.0)
    d = st_.cloud_dist_km[1]
    assert predict_latency(req, 2, st_) >= backhaul_delay(d, st_.link)


def test_predict_zero_capacity():
    st_ = make_state([0, 1], 1)
    with pytest.raises(NoCapacityError):
        predict_latency(SimpleNamespace(home_ap=0, access_ms=0.0), 0, st_)


def test_home_edge_independent_of_interedge_bandwidth():
    req = SimpleNamespace(home_ap=0, access_ms=0.1)
    a = predict_latency(req, 0, make_state([1, 1], 1, LinkParams(bw_interedge=1e8)))
    b = predict_latency(req, 0, make_state([1, 1], 1, LinkParams(bw_interedge=1e10)))
    assert a == b
