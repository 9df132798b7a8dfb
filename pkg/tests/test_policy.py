import itertools
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgecast.errors import InstanceTooLargeError, InvalidInputError, NoCapacityError
from edgecast.geo import CHICAGO_BBOX, make_topology, synth_aps
from edgecast.latency import LinkParams
from edgecast.policy import (ClusterState, epoch_hits, exact_oracle, get_policy, select_baseline,
                             select_cloud_only, select_econ, snapshot_instance)

KM_PER_DEG_LAT = 111.19492664455873


def line_topology(kms):
    """APs on a meridian at the given km offsets from the first one."""
    return make_topology([41.0 + k / KM_PER_DEG_LAT for k in kms], [-87.0] * len(kms))


def req(home, access=0.0, threshold=15.0, rid=0):
    return SimpleNamespace(req_id=rid, home_ap=home, access_ms=access, threshold_ms=threshold)


def fill(state, j, n):
    for _ in range(n):
        state.admit(j, -1)


def test_baseline_home_first():
    s = ClusterState(line_topology([0, 1, 2]), [1, 1, 1], 4, LinkParams(), 200.0)
    a = select_baseline(req(1), s)
    assert a.target == 1
    assert a.predicted_ms == pytest.approx(5.0)


def test_baseline_next_nearest():
    s = ClusterState(line_topology([0, 1, 3]), [1, 1, 1], 4, LinkParams(), 200.0)
    fill(s, 0, 1)
    assert select_baseline(req(0), s).target == 1


def test_baseline_tie_lowest_id():
    s = ClusterState(line_topology([0, -1, 1]), [1, 1, 1], 0, LinkParams(), 200.0)
    fill(s, 0, 1)
    assert select_baseline(req(0), s).target == 1


def test_baseline_saturated_goes_to_cloud():
    s = ClusterState(line_topology([0, 1, 2]), [1, 2, 1], 3, LinkParams(), 200.0)
    fill(s, 0, 1)
    fill(s, 1, 2)
    fill(s, 2, 1)
    assert select_baseline(req(2), s).target == 3


def test_baseline_horizon_limits_scan():
    s = ClusterState(line_topology([0, 1, 2]), [1, 1, 1], 2, LinkParams(), 200.0, horizon=2)
    fill(s, 0, 1)
    fill(s, 1, 1)
    assert select_baseline(req(0), s).target == 3


def test_baseline_all_full_least_loaded_cloud_on_tie():
    s = ClusterState(line_topology([0, 1]), [1, 1], 1, LinkParams(), 200.0)
    for j in range(3):
        fill(s, j, 1)
    assert select_baseline(req(0), s).target == 2
    s.admit(2, 9)  # cloud now has a backlog
    assert select_baseline(req(0), s).target == 0


def test_econ_most_free_regardless_of_distance():
    s = ClusterState(line_topology([0, 1, 50]), [2, 2, 5], 0, LinkParams(), 200.0)
    fill(s, 0, 2)
    assert select_econ(req(0), s).target == 2


def test_econ_tie_smallest_prediction():
    s = ClusterState(line_topology([0, 1, 2]), [1, 1, 1], 0, LinkParams(), 200.0)
    assert select_econ(req(2), s).target == 2
    fill(s, 2, 1)
    assert select_econ(req(2), s).target == 1


def test_econ_cloud_competes():
    s = ClusterState(line_topology([0, 1]), [2, 2], 10, LinkParams(), 200.0)
    assert select_econ(req(0), s).target == 2


def test_econ_queue_backlog_counts():
    s = ClusterState(line_topology([0, 1]), [2, 1], 0, LinkParams(), 200.0)
    fill(s, 0, 2)
    s.admit(0, 5)  # free = 2 - 2 - 1 = -1
    fill(s, 1, 1)  # free = 0
    assert select_econ(req(0), s).target == 1


def test_single_node_policies_agree():
    s = ClusterState(line_topology([0]), [3], 0, LinkParams(), 200.0)
    assert select_econ(req(0), s).target == select_baseline(req(0), s).target == 0


def test_cloud_only():
    s = ClusterState(line_topology([0, 1]), [1, 1], 2, LinkParams(), 200.0)
    a = select_cloud_only(req(1, access=0.2), s)
    assert a.target == 2
    assert a.predicted_ms == pytest.approx(0.2 + s.path_ms[1, 2] + 5.0)
    with pytest.raises(NoCapacityError):
        select_cloud_only(req(0), ClusterState(line_topology([0]), [1], 0, LinkParams(), 200.0))


def test_all_cloud_split_policies_agree():
    s = ClusterState(line_topology([0, 1, 2]), [0, 0, 0], 5, LinkParams(), 200.0)
    for h in range(3):
        assert select_baseline(req(h), s).target == select_econ(req(h), s).target == select_cloud_only(req(h), s).target == 3


def test_usable_flag():
    s = ClusterState(line_topology([0]), [1], 0, LinkParams(), 200.0)
    assert select_baseline(req(0, threshold=5.0), s).usable
    assert not select_baseline(req(0, threshold=4.9), s).usable


def test_no_capacity_anywhere():
    with pytest.raises(NoCapacityError):
        ClusterState(line_topology([0]), [0], 0, LinkParams(), 200.0)


def test_get_policy():
    assert get_policy("econ") is select_econ
    with pytest.raises(InvalidInputError):
        get_policy("greedy")


@given(st.lists(st.integers(0, 6), min_size=4, max_size=4), st.integers(0, 6), st.integers(1, 4),
       st.lists(st.integers(0, 3), min_size=5, max_size=5))
@settings(max_examples=100)
def test_econ_attains_max_free_and_scales(edge_units, cloud_units, k, load):
    if sum(edge_units) + cloud_units == 0:
        return
    topo = line_topology([0, 2, 5, 9])
    s = ClusterState(topo, edge_units, cloud_units, LinkParams(), 200.0)
    big = ClusterState(topo, [u * k for u in edge_units], cloud_units * k, LinkParams(), 200.0)
    for j, n in enumerate(load):
        n = min(n, int(s.cap[j]))
        fill(s, j, n)
        fill(big, j, n * k)
    a = select_econ(req(1), s)
    free = s.availability()
    assert free[a.target] == free.max()
    best = set(np.flatnonzero(free == free.max()))
    big_free = big.availability()
    assert best == set(np.flatnonzero(big_free == big_free.max()))


@given(st.lists(st.tuples(st.integers(0, 3), st.booleans()), max_size=30))
def test_one_edge_policies_identical(ops):
    a = ClusterState(line_topology([0]), [2], 0, LinkParams(), 200.0)
    b = ClusterState(line_topology([0]), [2], 0, LinkParams(), 200.0)
    for i, (_, release) in enumerate(ops):
        if release and a.nodes[0].busy:
            a.release(0)
            b.release(0)
            continue
        ta = select_baseline(req(0, rid=i), a)
        tb = select_econ(req(0, rid=i), b)
        assert ta.target == tb.target
        a.admit(ta.target, i)
        b.admit(tb.target, i)


# --- exact oracle -------------------------------------------------------------

def brute_force(lat, thr, caps):
    """Best count and lexicographically smallest optimum (unserved ranks last)."""
    n_nodes = len(caps)
    best = (-1, None)
    for assign in itertools.product(list(range(n_nodes)) + [None], repeat=len(thr)):
        used = [0] * n_nodes
        ok = True
        for i, j in enumerate(assign):
            if j is None:
                continue
            used[j] += 1
            if used[j] > caps[j] or lat[i][j] > thr[i]:
                ok = False
                break
        if not ok:
            continue
        count = sum(j is not None for j in assign)
        key = tuple(n_nodes if j is None else j for j in assign)
        if count > best[0] or (count == best[0] and key < best[1]):
            best = (count, key)
    return best[0], tuple(None if j == n_nodes else j for j in best[1])


def random_instance(rng, max_req=6, max_nodes=3):
    n_req = int(rng.integers(1, max_req + 1))
    n_nodes = int(rng.integers(1, max_nodes + 1))
    lat = rng.uniform(0, 20, size=(n_req, n_nodes)).round(1).tolist()
    thr = rng.uniform(5, 20, size=n_req).round(1).tolist()
    caps = rng.integers(0, 3, size=n_nodes).tolist()
    return lat, thr, caps


def test_oracle_small_examples():
    assert exact_oracle([[1.0]], [2.0], [1]) == (1, (0,))
    assert exact_oracle([[1.0]] * 3, [2.0] * 3, [2]) == (2, (0, 0, None))
    assert exact_oracle([[3.0]], [2.0], [1]) == (0, (None,))


def test_oracle_prefers_matching_over_greedy():
    # greedy would put request 0 on node 0 and strand request 1
    lat = [[1, 1], [1, 9]]
    assert exact_oracle(lat, [5, 5], [1, 1]) == (2, (1, 0))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=150, deadline=None)
def test_oracle_matches_brute_force(seed):
    lat, thr, caps = random_instance(np.random.default_rng(seed))
    res = exact_oracle(lat, thr, caps)
    assert (res.count, res.assignment) == brute_force(lat, thr, caps)


def test_oracle_limits():
    with pytest.raises(InstanceTooLargeError):
        exact_oracle([[1.0]] * 17, [1.0] * 17, [1])
    with pytest.raises(InstanceTooLargeError):
        exact_oracle([[1.0] * 9], [1.0], [1] * 9)
    with pytest.raises(InvalidInputError):
        exact_oracle([[1.0, 2.0]], [1.0], [1])
    with pytest.raises(InvalidInputError):
        exact_oracle([[1.0]], [1.0], [-1])


def test_oracle_full_size_instance_fast():
    rng = np.random.default_rng(0)
    lat = rng.uniform(0, 20, size=(16, 8)).tolist()
    res = exact_oracle(lat, [10.0] * 16, [2] * 8)
    assert 0 <= res.count <= 16


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_policies_never_beat_oracle(seed):
    rng = np.random.default_rng(seed)
    topo = synth_aps(3, CHICAGO_BBOX, seed=seed % 1000)
    units = rng.integers(0, 3, size=3).tolist()
    cloud = int(rng.integers(0, 3))
    if sum(units) + cloud == 0:
        return
    batch = [req(int(rng.integers(0, 3)), float(rng.uniform(0, 2)), float(rng.uniform(3, 25)), i)
             for i in range(int(rng.integers(1, 9)))]
    make = lambda: ClusterState(topo, units, cloud, LinkParams(), 200.0)
    nodes, lat, thr, caps = snapshot_instance(make(), batch)
    best = exact_oracle(lat, thr, caps).count
    hits = {name: epoch_hits(get_policy(name), make(), batch)
            for name in ("baseline", "econ") + (("cloud_only",) if cloud else ())}
    assert max(hits.values()) <= best
