"""Command-line front end: ``run``, ``sweep``, ``gen-topology`` and ``oracle``.

Outputs are first written next to their destination with a ``.partial``
suffix and renamed only once complete. Set ``EDGECAST_LOG`` (DEBUG, INFO,
WARNING, ...) for diagnostics on stderr.
"""

import argparse
import copy
import csv
import io
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import config as config_mod
from .errors import ConfigError, EdgecastError
from .geo import BBOX_PRESETS, BBox, LOCATION_PRESETS, synth_aps, write_ap_csv
from .policy import exact_oracle
from .sim import report_document, simulate

log = logging.getLogger("edgecast")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SWEEP_CAP = 10_000
METRIC_COLUMNS = ("arrivals", "delay_constraint_pct", "goodput_rps", "mean_ms", "p95_ms", "p99_ms")
AGG_METRICS = ("delay_constraint_pct", "goodput_rps")


class UsageError(EdgecastError):
    pass


def _setup_logging():
    level = os.environ.get("EDGECAST_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_atomic(path, text):
    """Write ``text`` to ``path`` via ``path.partial`` + rename."""
    tmp = path + ".partial"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _check_writable(out):
    if out is None:
        return
    d = os.path.dirname(os.path.abspath(out))
    if not os.path.isdir(d) or not os.access(d, os.W_OK):
        raise PermissionError(f"cannot write to {out}")


def dump_json(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --- run --------------------------------------------------------------------

def cmd_run(args):
    overrides = [config_mod.parse_override(s) for s in args.set]
    cfg = config_mod.load_config(args.config, overrides)
    _check_writable(args.out)
    log.info("running %s policy at load %s", cfg["policy"], cfg["load"])
    result = simulate(cfg)
    _emit(dump_json(report_document(cfg, result, overrides)), args.out)
    return EXIT_OK


# --- sweep ------------------------------------------------------------------

def load_sweep(path):
    """Read a sweep spec: ``{"schema_version", "base", "axes", "seeds", "cap"}``.

    ``base`` is either an inline config object or a path to a config file
    (resolved against the sweep file's directory).
    """
    with open(path, encoding="utf-8") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    if not isinstance(spec, dict):
        raise ConfigError("<root>", "expected a JSON object")
    if spec.get("schema_version") != config_mod.SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {spec.get('schema_version')!r}")
    base = spec.get("base", {})
    if isinstance(base, str):
        if not os.path.isabs(base):
            base = os.path.join(os.path.dirname(os.path.abspath(path)), base)
        base_cfg = config_mod.load_config(base)
    else:
        base_cfg = config_mod.make_config(base)
        csv_path = base_cfg["topology"]["csv"]
        if csv_path and not os.path.isabs(csv_path):
            base_cfg["topology"]["csv"] = os.path.normpath(
                os.path.join(os.path.dirname(os.path.abspath(path)), csv_path))
    axes = spec.get("axes", {})
    if not isinstance(axes, dict):
        raise ConfigError("axes", "expected an object of name -> list")
    for name, values in axes.items():
        if name not in config_mod.AXIS_PATHS:
            raise ConfigError(f"axes.{name}", f"unknown axis; expected one of {', '.join(config_mod.AXIS_PATHS)}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"axes.{name}", "expected a non-empty list")
    seeds = spec.get("seeds", [base_cfg["seed"]])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise ConfigError("seeds", "expected a non-empty list of integers >= 0")
    cap = spec.get("cap", SWEEP_CAP)
    return base_cfg, axes, seeds, cap


def sweep_points(base_cfg, axes, seeds, cap=SWEEP_CAP):
    """Configs in output order: axes by name, values as listed, then seed."""
    names = sorted(axes)
    size = len(seeds)
    for n in names:
        size *= len(axes[n])
    if size > cap:
        raise UsageError(f"sweep has {size} points, over the cap of {cap}")
    points = []
    for combo in itertools.product(*(axes[n] for n in names)):
        for seed in seeds:
            cfg = copy.deepcopy(base_cfg)
            for n, v in zip(names, combo):
                config_mod.set_path(cfg, n, v)
            cfg["seed"] = seed
            config_mod.validate(cfg)
            points.append((combo, seed, cfg))
    return names, points


def _run_point(cfg):
    r = simulate(cfg).report
    return tuple(getattr(r, k) for k in METRIC_COLUMNS)


def run_sweep(base_cfg, axes, seeds, jobs=1, cap=SWEEP_CAP):
    """Run every sweep point; returns (long CSV text, aggregated CSV text)."""
    names, points = sweep_points(base_cfg, axes, seeds, cap)
    cfgs = [p[2] for p in points]
    log.info("sweep: %d points on %d worker(s)", len(cfgs), jobs)
    if jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point, cfgs))
    else:
        results = [_run_point(c) for c in cfgs]

    long_buf = io.StringIO()
    w = csv.writer(long_buf, lineterminator="\n")
    w.writerow([*names, "seed", *METRIC_COLUMNS])
    groups = {}
    for (combo, seed, _), res in zip(points, results):
        w.writerow([*map(_fmt, combo), seed, *map(_fmt, res)])
        groups.setdefault(combo, []).append(dict(zip(METRIC_COLUMNS, res)))

    agg_buf = io.StringIO()
    w = csv.writer(agg_buf, lineterminator="\n")
    head = list(names) + ["n_seeds"]
    for m in AGG_METRICS:
        head += [f"{m}_mean", f"{m}_min", f"{m}_max"]
    w.writerow(head)
    for combo, rows in groups.items():
        line = [*map(_fmt, combo), len(rows)]
        for m in AGG_METRICS:
            vals = [r[m] for r in rows if r[m] is not None]
            if vals:
                line += [_fmt(sum(vals) / len(vals)), _fmt(min(vals)), _fmt(max(vals))]
            else:
                line += ["", "", ""]
        w.writerow(line)
    return long_buf.getvalue(), agg_buf.getvalue()


def aggregate_path(out):
    stem, ext = os.path.splitext(out)
    return f"{stem}.agg{ext or '.csv'}"


def cmd_sweep(args):
    base_cfg, axes, seeds, cap = load_sweep(args.spec)
    if args.cap is not None:
        cap = args.cap
    _check_writable(args.out)
    jobs = args.jobs or os.cpu_count() or 1
    long_csv, agg_csv = run_sweep(base_cfg, axes, seeds, jobs, cap)
    write_atomic(args.out, long_csv)
    write_atomic(aggregate_path(args.out), agg_csv)
    return EXIT_OK


# --- gen-topology -------------------------------------------------------------

def cmd_gen_topology(args):
    if args.n < 1:
        raise UsageError("-n must be at least 1")
    bbox = BBox(*args.bbox) if args.bbox else BBOX_PRESETS[args.preset]
    _check_writable(args.out)
    topo = synth_aps(args.n, bbox, args.mode, args.seed, LOCATION_PRESETS["oregon"])
    tmp = args.out + ".partial"
    write_ap_csv(topo, tmp)
    os.replace(tmp, args.out)
    return EXIT_OK


# --- oracle -----------------------------------------------------------------

def cmd_oracle(args):
    """Instance file: ``{"latency_ms": [[...]], "thresholds": [...], "capacities": [...]}``."""
    with open(args.instance, encoding="utf-8") as fh:
        try:
            inst = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    for key in ("latency_ms", "thresholds", "capacities"):
        if key not in inst:
            raise ConfigError(key, "missing field")
    res = exact_oracle(inst["latency_ms"], inst["thresholds"], inst["capacities"])
    _check_writable(args.out)
    _emit(dump_json({"count": res.count, "assignment": list(res.assignment)}), args.out)
    return EXIT_OK


# --- entry point --------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="edgecast", description="Hybrid edge-cloud capacity simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario and print its report JSON")
    r.add_argument("--config", required=True)
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-path override, value parsed as JSON (repeatable)")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a parameter sweep into a long-format CSV")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    s.add_argument("--cap", type=int, default=None, help="maximum number of sweep points")
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("gen-topology", help="write a synthetic ap_id,lat,lon CSV")
    g.add_argument("-n", type=int, required=True)
    g.add_argument("--preset", choices=sorted(BBOX_PRESETS), default="chicago")
    g.add_argument("--bbox", type=float, nargs=4, metavar=("MIN_LAT", "MAX_LAT", "MIN_LON", "MAX_LON"))
    g.add_argument("--mode", choices=("uniform", "clustered"), default="uniform")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_topology)

    o = sub.add_parser("oracle", help="solve a small static assignment instance exactly")
    o.add_argument("--instance", required=True)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"edgecast: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, UsageError) as exc:
        print(f"edgecast: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EdgecastError, ValueError) as exc:
        print(f"edgecast: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
