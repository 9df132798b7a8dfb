"""End-to-end latency composition for edge and cloud service.

Cloud:  access + backhaul + node
Edge:   access + switch + node   (switch is 0 when served at the home AP)

Distance-scaled terms use ms/km coefficients. Bandwidth enters as a
serialization delay ``payload / bandwidth`` that does not grow with
distance; for the backhaul this is the ``gamma * D`` term written as
``gamma := serialization / D``.
"""

import math
from dataclasses import dataclass

from .errors import InvalidInputError, InvalidTopologyError, NoCapacityError
from .geo import haversine_km


@dataclass(frozen=True)
class LinkParams:
    alpha: float = 0.005        # ms/km, UE <-> AP propagation
    delta: float = 0.01         # ms/km, UE <-> AP wireless penalty
    beta: float = 0.005         # ms/km, AP <-> cloud propagation
    gamma: float = 0.0          # ms/km, extra AP <-> cloud per-km term
    wired_prop: float = 0.005   # ms/km, inter-edge propagation
    bw_ap_cloud: float = 10e9   # bits/s
    bw_interedge: float = 1e9   # bits/s
    payload_bits: float = 1e6

    def __post_init__(self):
        for name in ("alpha", "delta", "beta", "gamma", "wired_prop"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise InvalidInputError(f"{name} must be a finite value >= 0, got {v}")
        for name in ("bw_ap_cloud", "bw_interedge", "payload_bits"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidInputError(f"{name} must be positive, got {v}")

    @property
    def backhaul_tx_ms(self) -> float:
        return 1000.0 * self.payload_bits / self.bw_ap_cloud

    @property
    def interedge_tx_ms(self) -> float:
        return 1000.0 * self.payload_bits / self.bw_interedge


@dataclass(frozen=True)
class LatencyBreakdown:
    access_ms: float = 0.0
    backhaul_ms: float = 0.0
    switch_ms: float = 0.0
    node_ms: float = 0.0

    @property
    def total_ms(self) -> float:
        return self.access_ms + self.backhaul_ms + self.switch_ms + self.node_ms

    def as_dict(self):
        return {
            "access_ms": self.access_ms,
            "backhaul_ms": self.backhaul_ms,
            "switch_ms": self.switch_ms,
            "node_ms": self.node_ms,
            "total_ms": self.total_ms,
        }


def _non_negative(name, v):
    if not (v >= 0 and math.isfinite(v)):
        raise InvalidInputError(f"{name} must be a finite value >= 0, got {v}")


def access_delay(d_ue_ap: float, p: LinkParams) -> float:
    _non_negative("distance", d_ue_ap)
    return (p.alpha + p.delta) * d_ue_ap


def backhaul_delay(d_ap_cloud: float, p: LinkParams) -> float:
    _non_negative("distance", d_ap_cloud)
    return (p.beta + p.gamma) * d_ap_cloud + p.backhaul_tx_ms


def interedge_delay(home: int, serving: int, topo, p: LinkParams) -> float:
    """Switching latency from the home AP to the serving edge (0 if same)."""
    n = len(topo)
    for ap in (home, serving):
        if not 0 <= ap < n:
            raise InvalidTopologyError(f"unknown AP id {ap}")
    if home == serving:
        return 0.0
    d = haversine_km(topo.point(home), topo.point(serving))
    return p.wired_prop * d + p.interedge_tx_ms


def compose_edge_latency(access_ms, switch_ms, node_ms) -> LatencyBreakdown:
    for name, v in (("access_ms", access_ms), ("switch_ms", switch_ms), ("node_ms", node_ms)):
        _non_negative(name, v)
    return LatencyBreakdown(access_ms=access_ms, switch_ms=switch_ms, node_ms=node_ms)


def compose_cloud_latency(access_ms, backhaul_ms, node_ms) -> LatencyBreakdown:
    for name, v in (("access_ms", access_ms), ("backhaul_ms", backhaul_ms), ("node_ms", node_ms)):
        _non_negative(name, v)
    return LatencyBreakdown(access_ms=access_ms, backhaul_ms=backhaul_ms, node_ms=node_ms)


def expected_node_ms(busy: int, queue_len: int, capacity: int, mean_service_ms: float) -> float:
    """Queued-work estimate of d_node for a newly arriving request."""
    if capacity < 1:
        raise NoCapacityError("zero-capacity node")
    return (queue_len + max(0, busy - capacity + 1)) * mean_service_ms / capacity + mean_service_ms


def predict_latency(req, target: int, state) -> float:
    """Predicted total latency (ms) of serving ``req`` at node ``target``.

    ``state`` is a :class:`edgecast.policy.ClusterState`; ``req`` needs
    ``home_ap`` and ``access_ms`` attributes.
    """
    node = state.nodes[target]
    if node.capacity_c < 1:
        raise NoCapacityError(f"node {target} has no capacity")
    est = expected_node_ms(node.busy, node.queue_len, node.capacity_c, state.mean_service_ms)
    return req.access_ms + state.path_ms[req.home_ap, target] + est
