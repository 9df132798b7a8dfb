"""Aggregate completion records into delay-constraint, goodput and latency stats."""

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from .errors import InvalidInputError, UndefinedMetricError


@dataclass
class MetricsReport:
    arrivals: int
    completions: int
    deadline_hits: int
    delay_constraint_pct: Optional[float]
    goodput_rps: float
    horizon_s: float
    mean_ms: Optional[float] = None
    p50_ms: Optional[float] = None
    p95_ms: Optional[float] = None
    p99_ms: Optional[float] = None
    unfinished: int = 0
    node_utilization: List[float] = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.deadline_hits <= self.completions <= self.arrivals:
            raise InvalidInputError("need 0 <= deadline_hits <= completions <= arrivals")

    def to_dict(self):
        return asdict(self)


def nearest_rank(sorted_vals, p):
    """Nearest-rank percentile of an ascending list (``p`` in (0, 100])."""
    if not sorted_vals:
        return None
    if not 0 < p <= 100:
        raise InvalidInputError("percentile must lie in (0, 100]")
    k = max(1, math.ceil(p / 100.0 * len(sorted_vals)))
    return sorted_vals[k - 1]


def delay_constraint_pct(records, arrivals: int) -> float:
    """Percent of offered requests served within their threshold."""
    if arrivals < 1:
        raise UndefinedMetricError("delay-constraint undefined with zero arrivals")
    hits = sum(1 for r in records if r.met_deadline)
    return 100.0 * hits / arrivals


def goodput(records, horizon_s: float) -> float:
    """Deadline-meeting completions per second."""
    if not horizon_s > 0:
        raise InvalidInputError("horizon must be positive")
    return sum(1 for r in records if r.met_deadline) / horizon_s


def goodput_ratio(econ: MetricsReport, baseline: MetricsReport) -> Optional[float]:
    """``econ.goodput / baseline.goodput``; None when the baseline has none."""
    if baseline.goodput_rps <= 0:
        return None
    return econ.goodput_rps / baseline.goodput_rps


def build_report(records, arrivals: int, horizon_s: float, unfinished: int = 0,
                 node_utilization=()) -> MetricsReport:
    totals = sorted(r.breakdown.total_ms for r in records)
    hits = sum(1 for r in records if r.met_deadline)
    if not horizon_s > 0:
        raise InvalidInputError("horizon must be positive")
    return MetricsReport(
        arrivals=arrivals,
        completions=len(totals),
        deadline_hits=hits,
        delay_constraint_pct=100.0 * hits / arrivals if arrivals else None,
        goodput_rps=hits / horizon_s,
        horizon_s=horizon_s,
        mean_ms=math.fsum(totals) / len(totals) if totals else None,
        p50_ms=nearest_rank(totals, 50),
        p95_ms=nearest_rank(totals, 95),
        p99_ms=nearest_rank(totals, 99),
        unfinished=unfinished,
        node_utilization=list(node_utilization),
    )
