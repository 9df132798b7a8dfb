"""Deterministic discrete-event simulation of one scenario.

Request lifecycle: arrive -> policy picks a node -> network transfer
(access, then switch or backhaul) -> admit at node (start or queue) ->
service completes -> CompletionRecord.

With ``link.contention`` enabled every AP owns two FIFO transmit ports,
one towards other edges and one towards the cloud; a request waits for
its port before the serialization and propagation delays elapse.

``admit_at`` chooses when the node sees a request. ``"dispatch"`` (the
default) admits it at decision time, so node delay and network delay add
up independently and every policy sees exact node state. ``"arrival"``
admits it after the network transfer, so decisions act on state that
lags by the transfer time.
"""

import heapq
import math
import zlib
from dataclasses import dataclass

import numpy as np

from . import config as config_mod
from .errors import InvalidInputError, NoCapacityError, StateCorruptionError
from .geo import (BBOX_PRESETS, LOCATION_PRESETS, BBox, GeoPoint, load_ap_csv, nearest_aps,
                  synth_aps)
from .latency import LatencyBreakdown, LinkParams
from .metrics import build_report
from .policy import ClusterState, get_policy
from .queueing import ResourceSplit

KM_PER_DEG = math.pi * 6371.0 / 180.0


@dataclass(frozen=True)
class AppProfile:
    demand_v: float = 1.0
    threshold_ms: float = 15.0
    payload_bits: float = 1e6

    def __post_init__(self):
        if not self.demand_v > 0:
            raise InvalidInputError("demand_v must be positive")
        if not self.threshold_ms > 0:
            raise InvalidInputError("threshold_ms must be positive")
        if not self.payload_bits > 0:
            raise InvalidInputError("payload_bits must be positive")


@dataclass(frozen=True, slots=True)
class Request:
    req_id: int
    arrival_s: float
    ue_location: GeoPoint
    home_ap: int
    block: int
    app: AppProfile
    access_ms: float

    @property
    def threshold_ms(self):
        return self.app.threshold_ms


@dataclass(frozen=True, slots=True)
class CompletionRecord:
    req_id: int
    target: int
    breakdown: LatencyBreakdown
    threshold_ms: float
    arrival_s: float
    completion_s: float

    @property
    def met_deadline(self) -> bool:
        return self.breakdown.total_ms <= self.threshold_ms


@dataclass
class Workload:
    """Arrival stream as parallel arrays, one entry per request."""

    times: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    home: np.ndarray
    access_km: np.ndarray
    block: np.ndarray
    service_s: np.ndarray
    rate: float

    def __len__(self):
        return self.times.shape[0]


def substream(seed: int, name: str):
    """Independent generator for a named purpose, stable across knob changes."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


def arrival_rate(cfg) -> float:
    """Total Poisson rate: load * load_scale * total_units * mu / demand_v."""
    return (cfg["load"] * cfg["load_scale"] * cfg["resources"]["total_units"]
            * cfg["service_rate_mu"] / cfg["app"]["demand_v"])


def _poisson_times(rng, rate, horizon):
    if rate <= 0:
        return np.empty(0)
    out = []
    t = 0.0
    chunk = max(64, int(rate * horizon * 1.1) + 16)
    while True:
        gaps = rng.exponential(1.0 / rate, size=chunk)
        ts = t + np.cumsum(gaps)
        if ts[-1] >= horizon:
            out.append(ts[ts < horizon])
            break
        out.append(ts)
        t = ts[-1]
    return np.concatenate(out)


def generate_workload(cfg, topo, seed=None) -> Workload:
    """Poisson arrivals; each UE is dropped uniformly in a disk around a random AP."""
    if cfg["load"] < 0:
        raise InvalidInputError("load must be >= 0")
    seed = cfg["seed"] if seed is None else seed
    rate = arrival_rate(cfg)
    times = _poisson_times(substream(seed, "arrivals"), rate, cfg["duration_s"])
    n = times.shape[0]
    loc = substream(seed, "locations")
    anchor = loc.integers(0, len(topo), size=n)
    r = cfg["ue_radius_km"] * np.sqrt(loc.random(n))
    theta = 2.0 * math.pi * loc.random(n)
    lat0 = topo.lat[anchor]
    lat = np.clip(lat0 + r * np.cos(theta) / KM_PER_DEG, -90.0, 90.0)
    coslat = np.maximum(np.cos(np.radians(lat0)), 1e-6)
    lon = np.clip(topo.lon[anchor] + r * np.sin(theta) / (KM_PER_DEG * coslat), -180.0, 180.0)
    home, dist = nearest_aps(lat, lon, topo) if n else (np.empty(0, dtype=np.int64), np.empty(0))
    block = topo.grid.block_indices(lat, lon) if n else np.empty(0, dtype=np.int64)
    svc = substream(seed, "service").exponential(cfg["app"]["demand_v"] / cfg["service_rate_mu"], size=n)
    return Workload(times, lat, lon, home, dist, block, svc, rate)


class EventQueue:
    """Min-heap keyed by (time, insertion sequence); the clock never goes back."""

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.now = 0.0

    def __len__(self):
        return len(self._heap)

    def push(self, t, kind, data=None):
        if t < self.now:
            raise StateCorruptionError(f"event scheduled in the past: {t} < {self.now}")
        heapq.heappush(self._heap, (t, self._seq, kind, data))
        self._seq += 1

    def peek_time(self):
        return self._heap[0][0] if self._heap else math.inf

    def pop(self):
        t, _, kind, data = heapq.heappop(self._heap)
        if t < self.now:
            raise StateCorruptionError(f"time regression: {t} < {self.now}")
        self.now = t
        return t, kind, data


def build_topology(cfg):
    t = cfg["topology"]
    cloud = t["cloud"]
    cloud_pt = LOCATION_PRESETS[cloud] if isinstance(cloud, str) else GeoPoint(*cloud)
    if t["csv"]:
        return load_ap_csv(t["csv"], t["grid_rows"], t["grid_cols"], cloud_pt)
    s = t["synth"]
    bbox = BBox(*s["bbox"]) if s.get("bbox") else BBOX_PRESETS[s["preset"]]
    return synth_aps(s["n"], bbox, s["mode"], s["seed"], cloud_pt, t["grid_rows"], t["grid_cols"])


def build_state(cfg, topo):
    split = ResourceSplit(cfg["resources"]["total_units"], cfg["resources"]["cloud_fraction"])
    edge_units = split.edge_units(len(topo))
    lk = cfg["link"]
    link = LinkParams(lk["alpha"], lk["delta"], lk["beta"], lk["gamma"], lk["wired_prop"],
                      lk["bw_ap_cloud"], lk["bw_interedge"], cfg["app"]["payload_bits"])
    state = ClusterState(topo.with_edge_units(edge_units), edge_units, split.cloud_units, link,
                         cfg["service_rate_mu"], cfg["app"]["demand_v"], cfg["baseline_horizon"],
                         cfg["econ_count_inbound"])
    if cfg["policy"] == "cloud_only" and split.cloud_units < 1:
        raise NoCapacityError("cloud_only policy with zero cloud units")
    return state


@dataclass
class SimResult:
    records: list
    report: object
    # all-request accounting at the horizon, warmup included
    total_arrivals: int
    total_completions: int
    in_transit: int
    in_service: int
    queued: int

    def conservation(self):
        return {
            "arrivals": self.total_arrivals,
            "completions": self.total_completions,
            "in_transit": self.in_transit,
            "in_service": self.in_service,
            "queued": self.queued,
        }


_ARRIVE, _AT_NODE, _DEPART = 0, 1, 2


def _close_utilization(state, t):
    for nd in state.nodes:
        nd._account(t)
    return [nd.busy_area for nd in state.nodes]


def simulate(cfg, topo=None, workload=None) -> SimResult:
    """Run the event loop for a validated config dict."""
    topo = build_topology(cfg) if topo is None else topo
    state = build_state(cfg, topo)
    policy = get_policy(cfg["policy"])
    wl = generate_workload(cfg, topo) if workload is None else workload
    app = AppProfile(cfg["app"]["demand_v"], cfg["app"]["threshold_ms"], cfg["app"]["payload_bits"])
    link = state.link
    duration = float(cfg["duration_s"])
    warmup = config_mod.warmup_of(cfg)
    contention = cfg["link"]["contention"]
    admit_on_dispatch = cfg["admit_at"] == "dispatch"
    access_coef = link.alpha + link.delta
    ie_tx_s = link.interedge_tx_ms / 1000.0
    bh_tx_s = link.backhaul_tx_ms / 1000.0
    n_aps = len(topo)
    cloud = state.cloud_id
    ie_port = [0.0] * n_aps
    bh_port = [0.0] * n_aps
    for nd in state.nodes:
        nd.measure_from = warmup

    times = wl.times.tolist()
    home = wl.home.tolist()
    block = wl.block.tolist()
    access_km = wl.access_km.tolist()
    svc = wl.service_s.tolist()
    lat = wl.lat.tolist()
    lon = wl.lon.tolist()
    n_req = len(times)

    # per request: (access_ms, backhaul_ms, switch_ms, node_admit_s, target, inbound weight)
    legs = [None] * n_req
    records = []
    completions = 0
    in_service = 0

    # no arrivals after ``duration``; the drain window lets every measured
    # request run for its full threshold before it is judged
    end = duration + app.threshold_ms / 1000.0
    util_area = None
    q = EventQueue()
    if n_req:
        q.push(times[0], _ARRIVE, 0)
    while q and q.peek_time() <= end:
        if util_area is None and q.peek_time() > duration:
            util_area = _close_utilization(state, duration)
        now, kind, data = q.pop()
        if kind == _ARRIVE:
            i = data
            if i + 1 < n_req:
                q.push(times[i + 1], _ARRIVE, i + 1)
            h = home[i]
            access_ms = access_coef * access_km[i]
            req = Request(i, now, GeoPoint(lat[i], lon[i]), h, block[i], app, access_ms)
            target = policy(req, state).target
            t_ap = now + access_ms / 1000.0
            backhaul_ms = switch_ms = 0.0
            if target == cloud:
                static_ms = float(state.path_ms[h, cloud])
                wait = 0.0
                if contention:
                    start = max(t_ap, bh_port[h])
                    bh_port[h] = start + bh_tx_s
                    wait = start - t_ap
                backhaul_ms = wait * 1000.0 + static_ms
                t_node = t_ap + backhaul_ms / 1000.0
            elif target != h:
                static_ms = float(state.path_ms[h, target])
                wait = 0.0
                if contention:
                    start = max(t_ap, ie_port[h])
                    ie_port[h] = start + ie_tx_s
                    wait = start - t_ap
                switch_ms = wait * 1000.0 + static_ms
                t_node = t_ap + switch_ms / 1000.0
            else:
                t_node = t_ap
            if admit_on_dispatch:
                t_node = now
            w = state.inbound_weight((t_node - now) * 1000.0)
            legs[i] = (access_ms, backhaul_ms, switch_ms, t_node, target, w)
            state.dispatch(target, w)
            q.push(t_node, _AT_NODE, i)
        elif kind == _AT_NODE:
            i = data
            j, w = legs[i][4:]
            if state.admit(j, i, now, w) == "started":
                in_service += 1
                q.push(now + svc[i], _DEPART, i)
        else:
            i = data
            access_ms, backhaul_ms, switch_ms, t_node, j, _ = legs[i]
            completions += 1
            in_service -= 1
            if times[i] >= warmup:
                bd = LatencyBreakdown(access_ms, backhaul_ms, switch_ms, (now - t_node) * 1000.0)
                records.append(CompletionRecord(i, j, bd, app.threshold_ms, times[i], now))
            nxt = state.release(j, now)
            if nxt is not None:
                in_service += 1
                q.push(now + svc[nxt], _DEPART, nxt)

    if util_area is None:
        util_area = _close_utilization(state, duration)
    for nd in state.nodes:
        nd.check()
    horizon = duration - warmup
    util = [a / (nd.capacity_c * horizon) if nd.capacity_c else 0.0 for a, nd in zip(util_area, state.nodes)]
    measured = sum(1 for t in times if t >= warmup)
    arrived = sum(1 for x in legs if x is not None)
    queued = sum(nd.queue_len for nd in state.nodes)
    report = build_report(records, measured, horizon, measured - len(records), util)
    return SimResult(records, report, arrived, completions, arrived - completions - in_service - queued,
                     in_service, queued)


def run_scenario(cfg, topo=None):
    """Simulate ``cfg`` and return its MetricsReport."""
    return simulate(cfg, topo).report


def report_document(cfg, result: SimResult, overrides=()):
    """JSON-ready report: config echo, overrides, metrics and conservation."""
    return {
        "schema_version": config_mod.SCHEMA_VERSION,
        "config": cfg,
        "overrides": [f"{k}={v}" for k, v in overrides],
        "metrics": result.report.to_dict(),
        "conservation": result.conservation(),
    }
