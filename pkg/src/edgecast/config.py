"""Scenario configuration: JSON schema, validation and dotted-path overrides.

Document layout (``schema_version`` 1)::

    {
      "schema_version": 1,
      "topology": {"csv": null,
                   "synth": {"n": 200, "preset": "chicago", "bbox": null,
                             "mode": "uniform", "seed": 1},
                   "grid_rows": 32, "grid_cols": 32, "cloud": "oregon"},
      "resources": {"total_units": 400, "cloud_fraction": 0.6},
      "link": {"alpha": 0.005, "delta": 0.01, "beta": 0.005, "gamma": 0.0,
               "wired_prop": 0.005, "bw_ap_cloud": 1e11, "bw_interedge": 1e9,
               "contention": true},
      "app": {"demand_v": 1.0, "threshold_ms": 17.0, "payload_bits": 7.5e6},
      "service_rate_mu": 1000.0,
      "load": 1.0, "load_scale": 0.085,
      "duration_s": 0.1, "warmup_s": null,
      "policy": "econ", "seed": 0,
      "ue_radius_km": 0.5, "baseline_horizon": null,
      "econ_count_inbound": true, "admit_at": "dispatch"
    }

Relative ``topology.csv`` paths resolve against the config file's directory.
"""

import copy
import json
import math
import os

from .errors import ConfigError
from .policy import POLICY_NAMES

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "topology": {
        "csv": None,
        "synth": {"n": 200, "preset": "chicago", "bbox": None, "mode": "uniform", "seed": 1},
        "grid_rows": 32,
        "grid_cols": 32,
        "cloud": "oregon",
    },
    "resources": {"total_units": 400, "cloud_fraction": 0.6},
    "link": {
        "alpha": 0.005,
        "delta": 0.01,
        "beta": 0.005,
        "gamma": 0.0,
        "wired_prop": 0.005,
        "bw_ap_cloud": 1e11,
        "bw_interedge": 1e9,
        "contention": True,
    },
    "app": {"demand_v": 1.0, "threshold_ms": 17.0, "payload_bits": 7.5e6},
    "service_rate_mu": 1000.0,
    "load": 1.0,
    "load_scale": 0.085,
    "duration_s": 0.1,
    "warmup_s": None,
    "policy": "econ",
    "seed": 0,
    "ue_radius_km": 0.5,
    "baseline_horizon": None,
    "econ_count_inbound": True,
    "admit_at": "dispatch",
}

# short names accepted by sweeps and ``--set``
AXIS_PATHS = {
    "load": "load",
    "cloud_fraction": "resources.cloud_fraction",
    "bw_interedge": "link.bw_interedge",
    "bw_ap_cloud": "link.bw_ap_cloud",
    "policy": "policy",
    "total_units": "resources.total_units",
    "threshold_ms": "app.threshold_ms",
    "payload_bits": "app.payload_bits",
}


def _merge(base, over, path=""):
    for k, v in over.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(where, "unknown field")
        if isinstance(base[k], dict) and isinstance(v, dict):
            _merge(base[k], v, where)
        elif isinstance(base[k], dict) and v is not None:
            raise ConfigError(where, "expected an object")
        else:
            base[k] = v


def _num(cfg, path, lo=None, hi=None, lo_open=False, integer=False, allow_none=False):
    v = get_path(cfg, path)
    if v is None and allow_none:
        return
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if integer and int(v) != v:
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(path, f"must be {'>' if lo_open else '>='} {lo}, got {v!r}")
    if hi is not None and v > hi:
        raise ConfigError(path, f"must be <= {hi}, got {v!r}")


def get_path(cfg, path):
    cur = cfg
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise ConfigError(path, "unknown field")
        cur = cur[part]
    return cur


def set_path(cfg, path, value):
    path = AXIS_PATHS.get(path, path)
    parts = path.split(".")
    cur = cfg
    for part in parts[:-1]:
        if not isinstance(cur, dict) or part not in cur:
            raise ConfigError(path, "unknown field")
        if cur[part] is None and part == "synth":
            cur[part] = copy.deepcopy(DEFAULTS["topology"]["synth"])
        cur = cur[part]
    if not isinstance(cur, dict) or parts[-1] not in cur:
        raise ConfigError(path, "unknown field")
    cur[parts[-1]] = value


def parse_override(text):
    """``key=value`` with a JSON value, falling back to a bare string."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def validate(cfg):
    """Raise ConfigError naming the first offending field."""
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {cfg.get('schema_version')!r}")
    topo = cfg["topology"]
    if topo["csv"] is None and topo["synth"] is None:
        raise ConfigError("topology", "need either csv or synth")
    if topo["csv"] is not None and not isinstance(topo["csv"], str):
        raise ConfigError("topology.csv", "expected a path string")
    if topo["csv"] is None:
        _num(cfg, "topology.synth.n", lo=1, integer=True)
        _num(cfg, "topology.synth.seed", lo=0, integer=True)
        if topo["synth"]["mode"] not in ("uniform", "clustered"):
            raise ConfigError("topology.synth.mode", "expected uniform or clustered")
        bbox = topo["synth"].get("bbox")
        if bbox is None and topo["synth"].get("preset") not in ("chicago",):
            raise ConfigError("topology.synth.preset", "unknown preset; expected chicago or give bbox")
        if bbox is not None and (not isinstance(bbox, list) or len(bbox) != 4):
            raise ConfigError("topology.synth.bbox", "expected [min_lat, max_lat, min_lon, max_lon]")
    _num(cfg, "topology.grid_rows", lo=1, integer=True)
    _num(cfg, "topology.grid_cols", lo=1, integer=True)
    cloud = topo["cloud"]
    if not (cloud in ("oregon", "chicago") or (isinstance(cloud, list) and len(cloud) == 2)):
        raise ConfigError("topology.cloud", "expected a preset name or [lat, lon]")
    _num(cfg, "resources.total_units", lo=0, integer=True)
    _num(cfg, "resources.cloud_fraction", lo=0, hi=1)
    for k in ("alpha", "delta", "beta", "gamma", "wired_prop"):
        _num(cfg, f"link.{k}", lo=0)
    _num(cfg, "link.bw_ap_cloud", lo=0, lo_open=True)
    _num(cfg, "link.bw_interedge", lo=0, lo_open=True)
    if not isinstance(cfg["link"]["contention"], bool):
        raise ConfigError("link.contention", "expected true or false")
    _num(cfg, "app.demand_v", lo=0, lo_open=True)
    _num(cfg, "app.threshold_ms", lo=0, lo_open=True)
    _num(cfg, "app.payload_bits", lo=0, lo_open=True)
    _num(cfg, "service_rate_mu", lo=0, lo_open=True)
    _num(cfg, "load", lo=0)
    _num(cfg, "load_scale", lo=0, lo_open=True)
    _num(cfg, "duration_s", lo=0, lo_open=True)
    _num(cfg, "warmup_s", lo=0, allow_none=True)
    if cfg["warmup_s"] is not None and cfg["warmup_s"] >= cfg["duration_s"]:
        raise ConfigError("warmup_s", "must be smaller than duration_s")
    if cfg["policy"] not in POLICY_NAMES:
        raise ConfigError("policy", f"expected one of {', '.join(POLICY_NAMES)}, got {cfg['policy']!r}")
    _num(cfg, "seed", lo=0, integer=True)
    _num(cfg, "ue_radius_km", lo=0)
    _num(cfg, "baseline_horizon", lo=1, integer=True, allow_none=True)
    if not isinstance(cfg["econ_count_inbound"], bool):
        raise ConfigError("econ_count_inbound", "expected true or false")
    if cfg["admit_at"] not in ("dispatch", "arrival"):
        raise ConfigError("admit_at", f"expected dispatch or arrival, got {cfg['admit_at']!r}")
    return cfg


def make_config(data=None, overrides=()):
    """Defaults <- ``data`` <- ``overrides``; returns a validated plain dict."""
    cfg = copy.deepcopy(DEFAULTS)
    if data:
        if not isinstance(data, dict):
            raise ConfigError("<root>", "expected a JSON object")
        _merge(cfg, data)
    for key, value in overrides:
        set_path(cfg, key, value)
    return validate(cfg)


def load_config(path, overrides=()):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    cfg = make_config(data, overrides)
    csv_path = cfg["topology"]["csv"]
    if csv_path and not os.path.isabs(csv_path):
        cfg["topology"]["csv"] = os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(path)), csv_path))
    return cfg


def warmup_of(cfg):
    w = cfg["warmup_s"]
    return 0.1 * cfg["duration_s"] if w is None else float(w)
