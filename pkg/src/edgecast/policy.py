"""Request-to-node assignment policies and the exact small-instance oracle.

Node ids: edge servers use their AP id ``0..n-1``; the cloud is node ``n``.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import InstanceTooLargeError, InvalidInputError, NoCapacityError
from .geo import distance_matrix_km, haversine_km_many
from .latency import LinkParams, predict_latency
from .queueing import ComputeNode, node_admit, node_release

# stands in for -inf in integer availability arrays (zero-capacity nodes)
NO_NODE = np.iinfo(np.int64).min // 4

# in-flight requests are weighed in integer steps of 1/INBOUND_SCALE units
INBOUND_SCALE = 1024

POLICY_NAMES = ("baseline", "econ", "cloud_only")


@dataclass(frozen=True)
class Assignment:
    req_id: int
    target: int
    predicted_ms: float
    usable: bool


class ClusterState:
    """Mutable view of every compute node plus the static path latencies.

    ``path_ms[h, j]`` is the network latency (excluding the UE access hop)
    from home AP ``h`` to node ``j`` with idle links.
    """

    def __init__(self, topo, edge_units, cloud_units, link: LinkParams, mu: float,
                 demand_v: float = 1.0, horizon: Optional[int] = None, count_inbound: bool = False):
        n = len(topo)
        if len(edge_units) != n:
            raise InvalidInputError("edge_units must have one entry per AP")
        if mu <= 0 or demand_v <= 0:
            raise InvalidInputError("mu and demand_v must be positive")
        self.topo = topo
        self.link = link
        self.mu = mu
        self.mean_service_ms = 1000.0 * demand_v / mu
        self.cloud_id = n
        self.nodes = [ComputeNode(i, "edge", int(u), mu) for i, u in enumerate(edge_units)]
        self.nodes.append(ComputeNode(n, "cloud", int(cloud_units), mu))
        if all(nd.capacity_c == 0 for nd in self.nodes):
            raise NoCapacityError("no compute units anywhere")
        self.cap = np.array([nd.capacity_c for nd in self.nodes], dtype=np.int64)
        self.busy = np.zeros(n + 1, dtype=np.int64)
        self.qlen = np.zeros(n + 1, dtype=np.int64)
        self.free = np.where(self.cap > 0, self.cap, NO_NODE)
        # weighted count (in 1/INBOUND_SCALE units) of requests travelling
        # towards each node
        self.inbound = np.zeros(n + 1, dtype=np.int64)
        self.count_inbound = count_inbound

        self.ap_dist_km = distance_matrix_km(topo)
        self.cloud_dist_km = haversine_km_many(topo.lat, topo.lon, topo.cloud_location.lat, topo.cloud_location.lon)
        path = np.empty((n, n + 1))
        path[:, :n] = link.wired_prop * self.ap_dist_km + link.interedge_tx_ms
        np.fill_diagonal(path[:, :n], 0.0)
        path[:, n] = (link.beta + link.gamma) * self.cloud_dist_km + link.backhaul_tx_ms
        self.path_ms = path

        # distance order per home AP: home first, then by distance, then id
        ids = np.arange(n)
        order = np.empty((n, n), dtype=np.int64)
        for h in range(n):
            order[h] = np.lexsort((ids, ids != h, self.ap_dist_km[h]))
        edges_with_units = self.cap[:n] > 0
        keep = edges_with_units[order]
        m = int(edges_with_units.sum())
        self.neighbor_order = order[keep].reshape(n, m) if m else np.empty((n, 0), dtype=np.int64)
        if horizon is not None:
            if horizon < 1:
                raise InvalidInputError("horizon must be >= 1")
            self.neighbor_order = self.neighbor_order[:, :horizon]

    @property
    def n_aps(self):
        return self.cloud_id

    def _sync(self, j):
        nd = self.nodes[j]
        self.busy[j] = nd.busy
        self.qlen[j] = len(nd.wait_queue)
        if nd.capacity_c > 0:
            self.free[j] = nd.capacity_c - nd.busy - len(nd.wait_queue)

    def inbound_weight(self, transit_ms):
        """Claim of one in-flight request on its node, in 1/INBOUND_SCALE units.

        A request still ``transit_ms`` away will hold a unit for about one
        mean service time once it lands, so only the overlapping share
        ``min(1, service / transit)`` counts against the node now.
        """
        if transit_ms <= self.mean_service_ms:
            return INBOUND_SCALE
        return int(round(INBOUND_SCALE * self.mean_service_ms / transit_ms))

    def dispatch(self, j, weight=INBOUND_SCALE):
        self.inbound[j] += weight

    def admit(self, j, req_id, now=0.0, weight=0):
        """Admit at node ``j``, dropping the request's in-flight ``weight``."""
        out = node_admit(self.nodes[j], req_id, now)
        self.inbound[j] -= weight
        self._sync(j)
        return out

    def availability(self):
        """Units not yet claimed: idle minus queued (minus weighted inbound if counted)."""
        if self.count_inbound:
            return np.where(self.cap > 0, self.free - self.inbound / INBOUND_SCALE, NO_NODE)
        return self.free

    def release(self, j, now=0.0):
        out = node_release(self.nodes[j], now)
        self._sync(j)
        return out

    def node_estimates_ms(self, js):
        """Vectorised :func:`expected_node_ms` over node ids ``js``."""
        cap = self.cap[js]
        busy = self.busy[js]
        q = self.qlen[js]
        est = (q + np.maximum(0, busy - cap + 1)) * self.mean_service_ms / np.maximum(cap, 1) + self.mean_service_ms
        return np.where(cap > 0, est, np.inf)

    def snapshot(self):
        return [(nd.capacity_c, nd.busy, nd.queue_len) for nd in self.nodes]


def _assign(req, target, state):
    pred = predict_latency(req, target, state)
    return Assignment(req.req_id, int(target), pred, pred <= req.threshold_ms)


def _least_loaded(state):
    m = state.free.max()
    if m == NO_NODE:
        raise NoCapacityError("no nodes with capacity")
    cloud = state.cloud_id
    if state.free[cloud] == m:
        return cloud
    return int(np.argmax(state.free == m))


def select_baseline(req, state: ClusterState) -> Assignment:
    """Nearest edge (from the home AP) with an idle unit, else the cloud.

    When the cloud has no idle unit either, the request goes to the
    least-loaded node and waits there, preferring the cloud on ties.
    """
    order = state.neighbor_order[req.home_ap]
    if order.shape[0]:
        ok = state.free[order] > 0
        k = int(np.argmax(ok))
        if ok[k]:
            return _assign(req, order[k], state)
    cloud = state.cloud_id
    if state.cap[cloud] > 0 and state.free[cloud] > 0:
        return _assign(req, cloud, state)
    return _assign(req, _least_loaded(state), state)


def select_econ(req, state: ClusterState) -> Assignment:
    """Node with the most available units, regardless of distance.

    The cloud competes with its own unit count. Ties go to the lower
    predicted latency, then the lower node id.
    """
    free = state.availability()
    m = free.max()
    if m == NO_NODE:
        raise NoCapacityError("no nodes with capacity")
    cands = np.flatnonzero(free == m)
    if cands.shape[0] == 1:
        return _assign(req, cands[0], state)
    pred = req.access_ms + state.path_ms[req.home_ap, cands] + state.node_estimates_ms(cands)
    k = int(cands[int(np.argmin(pred))])
    return Assignment(req.req_id, k, float(pred.min()), bool(pred.min() <= req.threshold_ms))


def select_cloud_only(req, state: ClusterState) -> Assignment:
    if state.cap[state.cloud_id] < 1:
        raise NoCapacityError("cloud has no capacity")
    return _assign(req, state.cloud_id, state)


POLICIES = {
    "baseline": select_baseline,
    "econ": select_econ,
    "cloud_only": select_cloud_only,
}


def get_policy(name):
    try:
        return POLICIES[name]
    except KeyError:
        raise InvalidInputError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}") from None


# --- exact oracle -----------------------------------------------------------

MAX_ORACLE_REQUESTS = 16
MAX_ORACLE_NODES = 8


class OracleResult(NamedTuple):
    count: int
    # node index per request, None where the request is left unserved
    assignment: tuple


def _max_matching(feasible, reqs, rem):
    """Max number of ``reqs`` placeable into nodes with ``rem`` free slots."""
    owner = {}  # (node, slot) -> request

    def augment(r, seen):
        for j in feasible[r]:
            for s in range(rem[j]):
                key = (j, s)
                if key in seen:
                    continue
                seen.add(key)
                if key not in owner or augment(owner[key], seen):
                    owner[key] = r
                    return True
        return False

    return sum(1 for r in reqs if augment(r, set()))


def exact_oracle(latency_ms, thresholds, capacities) -> OracleResult:
    """Maximum number of requests that fit within their thresholds.

    ``latency_ms[i][j]`` is the static latency of request ``i`` on node
    ``j``; node ``j`` holds at most ``capacities[j]`` requests. Branch and
    bound over requests in order, trying nodes in ascending index and
    "unserved" last, so the witness is the lexicographically smallest
    optimum (unserved ranks after every node).
    """
    n_req = len(thresholds)
    n_nodes = len(capacities)
    if n_req > MAX_ORACLE_REQUESTS or n_nodes > MAX_ORACLE_NODES:
        raise InstanceTooLargeError(
            f"instance {n_req}x{n_nodes} exceeds {MAX_ORACLE_REQUESTS} requests x {MAX_ORACLE_NODES} nodes")
    if len(latency_ms) != n_req or any(len(row) != n_nodes for row in latency_ms):
        raise InvalidInputError("latency matrix shape does not match thresholds x capacities")
    if any(c < 0 for c in capacities):
        raise InvalidInputError("capacities must be >= 0")
    feasible = [[j for j in range(n_nodes) if capacities[j] > 0 and latency_ms[i][j] <= thresholds[i]]
                for i in range(n_req)]
    rem = [min(int(c), n_req) for c in capacities]
    target = _max_matching(feasible, range(n_req), rem)
    chosen = [None] * n_req
    best = None

    def dfs(i, cur):
        nonlocal best
        if i == n_req:
            if cur == target:
                best = tuple(chosen)
            return best is not None
        for j in feasible[i]:
            if rem[j] == 0:
                continue
            rem[j] -= 1
            if cur + 1 + _max_matching(feasible, range(i + 1, n_req), rem) >= target:
                chosen[i] = j
                if dfs(i + 1, cur + 1):
                    return True
            rem[j] += 1
        chosen[i] = None
        if cur + _max_matching(feasible, range(i + 1, n_req), rem) >= target:
            return dfs(i + 1, cur)
        return False

    dfs(0, 0)
    return OracleResult(target, best)


def snapshot_instance(state: ClusterState, batch):
    """Static oracle instance for ``batch`` against the current node state.

    A node offers its idle units; a request's latency on a node is the
    predicted latency with an idle unit (no queueing).
    """
    nodes = [j for j in range(len(state.nodes)) if state.cap[j] > 0]
    lat = [[req.access_ms + state.path_ms[req.home_ap, j] + state.mean_service_ms for j in nodes] for req in batch]
    caps = [int(state.cap[j] - state.busy[j]) for j in nodes]
    return nodes, lat, [req.threshold_ms for req in batch], caps


def epoch_hits(policy, state: ClusterState, batch) -> int:
    """Deadline hits when ``policy`` places ``batch`` on a frozen snapshot.

    Placements consume units as they go; a request counts when it lands on
    an idle unit and its idle-unit latency is within its threshold.
    """
    hits = 0
    for req in batch:
        a = policy(req, state)
        started = state.admit(a.target, req.req_id) == "started"
        static = req.access_ms + state.path_ms[req.home_ap, a.target] + state.mean_service_ms
        if started and static <= req.threshold_ms:
            hits += 1
    return hits
