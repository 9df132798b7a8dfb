"""M/M/c compute model.

Analytic steady-state results (Erlang C, mean wait) plus the mutable
per-node state the event loop drives: ``busy`` units and a FIFO queue.
"""

import math
from collections import deque
from dataclasses import dataclass, field

from .errors import InvalidInputError, NoCapacityError, StateCorruptionError, UnstableQueueError

STARTED = "started"
QUEUED = "queued"


def _check_rates(c, lam, mu):
    if c < 1:
        raise NoCapacityError("c must be >= 1")
    if not (mu > 0 and math.isfinite(mu)):
        raise InvalidInputError(f"mu must be positive, got {mu}")
    if not (lam >= 0 and math.isfinite(lam)):
        raise InvalidInputError(f"lambda must be >= 0, got {lam}")


def is_stable(c: int, lam: float, mu: float) -> bool:
    return lam < c * mu


def erlang_b(c: int, offered: float) -> float:
    """Blocking probability via the standard recurrence (no factorials)."""
    b = 1.0
    for k in range(1, c + 1):
        b = offered * b / (k + offered * b)
    return b


def erlang_c(c: int, lam: float, mu: float) -> float:
    """Probability that an arrival has to wait in an M/M/c queue.

    For ``lam >= c * mu`` every arrival eventually waits, so 1.0 is returned;
    use :func:`is_stable` to tell that case apart from a saturated but
    stable system.
    """
    _check_rates(c, lam, mu)
    if lam == 0:
        return 0.0
    if not is_stable(c, lam, mu):
        return 1.0
    a = lam / mu
    b = erlang_b(c, a)
    return c * b / (c - a * (1.0 - b))


def mmc_mean_wait(c: int, lam: float, mu: float) -> float:
    """Mean time in queue (seconds) before service starts."""
    _check_rates(c, lam, mu)
    if not is_stable(c, lam, mu):
        raise UnstableQueueError(f"lambda={lam} >= c*mu={c * mu}")
    if lam == 0:
        return 0.0
    return erlang_c(c, lam, mu) / (c * mu - lam)


def mmc_mean_response(c: int, lam: float, mu: float) -> float:
    return mmc_mean_wait(c, lam, mu) + 1.0 / mu


def sample_service_time(rng, mu: float, demand_v: float = 1.0) -> float:
    """Exponential service draw with mean ``demand_v / mu`` seconds."""
    if not (mu > 0 and demand_v > 0):
        raise InvalidInputError("mu and demand_v must be positive")
    return float(rng.exponential(demand_v / mu))


@dataclass
class ComputeNode:
    node_id: int
    kind: str
    capacity_c: int
    service_rate_mu: float
    busy: int = 0
    wait_queue: deque = field(default_factory=deque)
    # busy-unit-seconds accumulated after ``measure_from``
    busy_area: float = 0.0
    measure_from: float = 0.0
    _last_t: float = 0.0

    def __post_init__(self):
        if self.kind not in ("edge", "cloud"):
            raise InvalidInputError(f"kind must be edge or cloud, got {self.kind!r}")
        if self.capacity_c < 0:
            raise InvalidInputError("capacity_c must be >= 0")
        if not self.service_rate_mu > 0:
            raise InvalidInputError("service_rate_mu must be positive")

    @property
    def queue_len(self) -> int:
        return len(self.wait_queue)

    @property
    def free_units(self) -> int:
        """Idle units minus queued requests; negative when backlogged."""
        return self.capacity_c - self.busy - len(self.wait_queue)

    def _account(self, now):
        if now < self._last_t:
            raise StateCorruptionError(f"node {self.node_id}: time went backwards ({now} < {self._last_t})")
        start = max(self._last_t, self.measure_from)
        if now > start:
            self.busy_area += self.busy * (now - start)
        self._last_t = now

    def check(self):
        if not 0 <= self.busy <= self.capacity_c:
            raise StateCorruptionError(f"node {self.node_id}: busy={self.busy} outside [0, {self.capacity_c}]")
        if self.wait_queue and self.busy != self.capacity_c:
            raise StateCorruptionError(f"node {self.node_id}: queue non-empty with idle units")


def node_admit(node: ComputeNode, req_id, now: float = 0.0) -> str:
    """Start ``req_id`` on a free unit or append it to the FIFO."""
    if node.capacity_c < 1:
        raise NoCapacityError(f"node {node.node_id} has no capacity")
    node._account(now)
    if node.busy < node.capacity_c:
        node.busy += 1
        return STARTED
    node.wait_queue.append(req_id)
    return QUEUED


def node_release(node: ComputeNode, now: float = 0.0):
    """Free one unit; returns the id of the queued request that takes it, if any."""
    if node.busy < 1:
        raise StateCorruptionError(f"release on idle node {node.node_id}")
    node._account(now)
    node.busy -= 1
    if node.wait_queue:
        node.busy += 1
        return node.wait_queue.popleft()
    return None


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


@dataclass(frozen=True)
class ResourceSplit:
    """Fixed total compute shared between the cloud and the edge servers."""

    total_units: int
    cloud_fraction: float

    def __post_init__(self):
        if self.total_units < 0 or int(self.total_units) != self.total_units:
            raise InvalidInputError("total_units must be a non-negative integer")
        if not 0.0 <= self.cloud_fraction <= 1.0:
            raise InvalidInputError("cloud_fraction must lie in [0, 1]")

    @property
    def cloud_units(self) -> int:
        return min(self.total_units, _round_half_up(self.cloud_fraction * self.total_units))

    def edge_units(self, n_aps: int) -> list:
        """Per-AP edge units, as even as possible; remainder to the lowest ids."""
        if n_aps < 1:
            raise InvalidInputError("need at least one AP")
        rest = self.total_units - self.cloud_units
        base, extra = divmod(rest, n_aps)
        return [base + 1 if i < extra else base for i in range(n_aps)]
