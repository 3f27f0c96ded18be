"""Batch command-line front end.

Subcommands: ``catalog`` (validate/list), ``porkchop`` (pair matrix +
CSV + PGM), ``adjust`` (stay/wait transforms on matrix documents),
``concat`` (min-plus chain over matrix documents), ``search`` (sequence
selection via DFS and/or graph solver), ``budget`` (most objects within a
delta-V budget), ``export-graph`` (time-expanded edge list).

Flags override config-file values override defaults; every run echoes the
effective configuration into the output directory. Exit status 2 flags usage
errors, 1 data/runtime errors; all production paths are deterministic and
thread-count invariant.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .constants import SUN_MU
from .dvmatrix import (
    DvMatrix,
    GridSpec,
    augment_for_stay,
    build_porkchop,
    concat_chain,
    deserialize,
    export_csv,
    export_pgm,
    serialize,
    stay_adjust,
    wait_adjust,
)
from .ephemeris import Catalog, parse_catalog
from .errors import CapacityError, DvPlanError
from .graphsearch import (
    build_sequence_dfa,
    build_time_expanded_graph,
    export_edge_list,
    k_shortest_unique,
    shortest_path_product,
)
from .sequence import (
    SearchConfig,
    budget_max_objects,
    dfs_best_sequences,
    format_report,
    results_csv,
)

_USAGE_EXIT = 2
_DATA_EXIT = 1


class UsageError(Exception):
    """Bad flag combination or values; maps to exit status 2."""


def _load_catalog(cfg) -> Catalog:
    path = Path(cfg["catalog"])
    with path.open() as fh:
        catalog = parse_catalog(fh, angle_unit=cfg["angle_unit"], mu=cfg["mu"])
    if cfg.get("objects"):
        catalog = catalog.subset(cfg["objects"])
    return catalog


def _grid_spec(cfg) -> GridSpec:
    dur_min = cfg["dur_min"] if cfg.get("dur_min") is not None else cfg["dt_step"]
    return GridSpec(
        t_start=cfg["t_start"],
        dt_step=cfg["dt_step"],
        d=cfg["durations"],
        h=cfg["departures"],
        dur_min=dur_min,
    )


def _porkchop_task(args):
    catalog, from_id, to_id, spec, max_revs = args
    m = build_porkchop(catalog, from_id, to_id, spec, max_revolutions=max_revs)
    return (from_id, to_id), m.values


def build_pair_matrices(catalog: Catalog, spec: GridSpec, max_revs: int = 0,
                        stay_steps: int = 0, threads: int = 1, log=None):
    """Wait-adjusted (and stay-shifted) matrices for every ordered pair.

    Pairs are independent, so workers only change wall time, never values.
    """
    ids = catalog.ids
    tasks = [
        (catalog, u, v, spec, max_revs)
        for u in ids
        for v in ids
        if u != v
    ]
    raw = {}
    if threads <= 1:
        for i, task in enumerate(tasks):
            key, values = _porkchop_task(task)
            raw[key] = values
            if log and (i + 1) % 25 == 0:
                log(f"  {i + 1}/{len(tasks)} pair matrices")
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for i, (key, values) in enumerate(pool.map(_porkchop_task, tasks, chunksize=4)):
                raw[key] = values
                if log and (i + 1) % 25 == 0:
                    log(f"  {i + 1}/{len(tasks)} pair matrices")
    matrices = {}
    for key in sorted(raw):
        m = DvMatrix(spec=spec, values=raw[key], labels=key)
        if stay_steps:
            m = stay_adjust(m, stay_steps)
        matrices[key] = wait_adjust(m)
    return matrices


# -- config handling ----------------------------------------------------------

def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults <- config file <- explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _write_effective_config(cfg: dict, out_dir: Path, command: str) -> None:
    payload = {"command": command}
    payload.update({k: cfg[k] for k in sorted(cfg)})
    (out_dir / "effective_config.json").write_text(json.dumps(payload, indent=2) + "\n")


def _parse_objects(value):
    if value is None:
        return None
    items = [s for s in value.replace(",", " ").split() if s]
    if not items:
        raise UsageError("--objects must name at least one id")
    return items


# -- subcommands ----------------------------------------------------------------

def _cmd_catalog(args) -> int:
    cfg = _merge_config(args, {
        "catalog": None, "angle_unit": "rad", "mu": SUN_MU, "objects": None,
    })
    cfg["objects"] = _parse_objects(cfg["objects"])
    if not cfg["catalog"]:
        raise UsageError("--catalog is required")
    catalog = _load_catalog(cfg)
    print(f"# {len(catalog)} objects, mu = {catalog.mu!r} AU^3/day^2")
    print("# id a e i raan argp M0 epoch0 (rad, AU, MJD2000)")
    for el in catalog.objects:
        print(f"{el.id} {el.a!r} {el.e!r} {el.i!r} {el.raan!r} {el.argp!r} "
              f"{el.m0!r} {el.epoch0!r}")
    return 0


_GRID_DEFAULTS = {
    "catalog": None, "angle_unit": "rad", "mu": SUN_MU, "objects": None,
    "t_start": None, "dt_step": None, "departures": None, "durations": None,
    "dur_min": None, "max_revs": 0,
}


def _require_grid(cfg) -> None:
    for key in ("t_start", "dt_step", "departures", "durations"):
        if cfg.get(key) is None:
            raise UsageError(f"--{key.replace('_', '-')} is required")
    if not cfg["catalog"]:
        raise UsageError("--catalog is required")


def _cmd_porkchop(args) -> int:
    cfg = _merge_config(args, dict(_GRID_DEFAULTS, from_id=None, to_id=None,
                                   out_dir=None, pgm_cap=None))
    cfg["objects"] = _parse_objects(cfg["objects"])
    _require_grid(cfg)
    if not cfg["from_id"] or not cfg["to_id"]:
        raise UsageError("--from and --to are required")
    if not cfg["out_dir"]:
        raise UsageError("--out-dir is required")
    catalog = _load_catalog(cfg)
    spec = _grid_spec(cfg)
    m = build_porkchop(catalog, cfg["from_id"], cfg["to_id"], spec,
                       max_revolutions=cfg["max_revs"])
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    stem = f"porkchop_{cfg['from_id']}_{cfg['to_id']}"
    (out / f"{stem}.dvm").write_text(serialize(m))
    (out / f"{stem}.csv").write_text(export_csv(m))
    (out / f"{stem}.pgm").write_text(export_pgm(m, cap_ms=cfg["pgm_cap"]))
    _write_effective_config(cfg, out, "porkchop")
    print(f"wrote {stem}.dvm/.csv/.pgm to {out}")
    return 0


def _cmd_adjust(args) -> int:
    if (args.stay is None) == (not args.wait):
        raise UsageError("exactly one of --wait or --stay is required")
    m = deserialize(Path(args.infile).read_text())
    if args.wait:
        m = wait_adjust(m)
    else:
        if args.stay < 0:
            raise UsageError("--stay must be >= 0 steps")
        if args.augment:
            m = augment_for_stay(m, args.stay)
        m = stay_adjust(m, args.stay)
    Path(args.outfile).write_text(serialize(m))
    print(f"wrote {args.outfile}")
    return 0


def _cmd_concat(args) -> int:
    if len(args.inputs) < 2:
        raise UsageError("concat needs at least two matrix documents")
    mats = [deserialize(Path(p).read_text()) for p in args.inputs]
    result = concat_chain(mats)
    Path(args.outfile).write_text(serialize(result))
    print(f"wrote {args.outfile} ({result.leg_count} legs: {' -> '.join(result.labels)})")
    return 0


def _run_graph_solver(matrices, objects, n, max_k):
    graph = build_time_expanded_graph(matrices, objects)
    try:
        dfa = build_sequence_dfa(objects, n, "power-set")
        return shortest_path_product(graph, dfa), "power-set"
    except CapacityError:
        dfa = build_sequence_dfa(objects, n, "counter")
        return k_shortest_unique(graph, dfa, max_k), "counter+k-shortest"


def _cmd_search(args) -> int:
    cfg = _merge_config(args, dict(
        _GRID_DEFAULTS, n=None, margin=0.0, top_k=10, stay=0,
        solver="dfs", threads=1, out_dir=None, max_k=1000,
    ))
    cfg["objects"] = _parse_objects(cfg["objects"])
    _require_grid(cfg)
    if cfg["n"] is None:
        raise UsageError("--n is required")
    if not cfg["out_dir"]:
        raise UsageError("--out-dir is required")
    if cfg["solver"] not in ("dfs", "graph", "both"):
        raise UsageError("--solver must be dfs, graph, or both")
    catalog = _load_catalog(cfg)
    if cfg["n"] > len(catalog):
        raise UsageError(f"--n {cfg['n']} exceeds the {len(catalog)} selected objects")
    spec = _grid_spec(cfg)
    log = lambda msg: print(msg, file=sys.stderr)

    log(f"building {len(catalog)}x{len(catalog)} pair matrices on a "
        f"{spec.d}x{spec.h} grid...")
    matrices = build_pair_matrices(
        catalog, spec, max_revs=cfg["max_revs"], stay_steps=cfg["stay"],
        threads=cfg["threads"], log=log,
    )

    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    report_parts = []
    results = None

    if cfg["solver"] in ("dfs", "both"):
        search_cfg = SearchConfig(
            n=cfg["n"], objects=catalog.ids,
            prune_margin=cfg["margin"], top_k=cfg["top_k"],
        )
        log(f"depth-first search over {len(catalog.ids)} objects, n={cfg['n']}...")
        results = dfs_best_sequences(matrices, search_cfg, threads=cfg["threads"])
        report_parts.append(format_report(results, title="depth-first concatenation search"))

    graph_result = None
    if cfg["solver"] in ("graph", "both"):
        log("label-constrained shortest path...")
        graph_result, dfa_kind = _run_graph_solver(matrices, catalog.ids, cfg["n"], cfg["max_k"])
        report_parts.append(format_report([graph_result],
                                          title=f"graph shortest path ({dfa_kind} automaton)"))
        if results is None:
            results = [graph_result]

    if cfg["solver"] == "both":
        a, b = results[0].total_dv, graph_result.total_dv
        agree = (math.isinf(a) and math.isinf(b)) or (
            abs(a - b) <= 1e-9 * max(abs(a), abs(b), 1.0)
        )
        if not agree:
            raise DvPlanError(
                f"solver disagreement: dfs rank-1 {a} m/s vs graph {b} m/s "
                "(differs by more than 1e-9 relative)"
            )
        report_parts.append(
            f"solvers agree: rank-1 total {a!r} m/s, sequence "
            f"{' -> '.join(results[0].labels)}\n"
        )

    (out / "report.txt").write_text("\n".join(report_parts))
    (out / "results.csv").write_text(results_csv(results))
    _write_effective_config(cfg, out, "search")
    print((out / "report.txt").read_text(), end="")
    return 0


def _cmd_budget(args) -> int:
    cfg = _merge_config(args, dict(
        _GRID_DEFAULTS, budget=None, stay=0, threads=1, top_k=None, out_dir=None,
    ))
    cfg["objects"] = _parse_objects(cfg["objects"])
    _require_grid(cfg)
    if cfg["budget"] is None or cfg["budget"] <= 0:
        raise UsageError("--budget must be a positive delta-V in m/s")
    if not cfg["out_dir"]:
        raise UsageError("--out-dir is required")
    catalog = _load_catalog(cfg)
    spec = _grid_spec(cfg)
    log = lambda msg: print(msg, file=sys.stderr)
    matrices = build_pair_matrices(
        catalog, spec, max_revs=cfg["max_revs"], stay_steps=cfg["stay"],
        threads=cfg["threads"], log=log,
    )
    results = budget_max_objects(matrices, catalog.ids, cfg["budget"], top_k=cfg["top_k"])
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    title = f"most objects within {cfg['budget']} m/s"
    (out / "report.txt").write_text(format_report(results, title=title))
    (out / "results.csv").write_text(results_csv(results))
    _write_effective_config(cfg, out, "budget")
    print((out / "report.txt").read_text(), end="")
    return 0


def _cmd_export_graph(args) -> int:
    cfg = _merge_config(args, dict(_GRID_DEFAULTS, stay=0, threads=1, outfile=None))
    cfg["objects"] = _parse_objects(cfg["objects"])
    _require_grid(cfg)
    if not cfg["outfile"]:
        raise UsageError("--out is required")
    catalog = _load_catalog(cfg)
    spec = _grid_spec(cfg)
    matrices = build_pair_matrices(
        catalog, spec, max_revs=cfg["max_revs"], stay_steps=cfg["stay"],
        threads=cfg["threads"],
    )
    graph = build_time_expanded_graph(matrices, catalog.ids)
    Path(cfg["outfile"]).write_text(export_edge_list(graph))
    print(f"wrote {cfg['outfile']} ({graph.object_edge_count()} object edges)")
    return 0


# -- parser ---------------------------------------------------------------------

def _add_catalog_flags(p):
    p.add_argument("--catalog", help="catalog file path")
    p.add_argument("--angle-unit", dest="angle_unit", choices=("rad", "deg"),
                   help="angle unit of the catalog file (default rad)")
    p.add_argument("--mu", type=float, help="central-body mu in AU^3/day^2")
    p.add_argument("--objects", help="comma-separated object id subset")
    p.add_argument("--config", help="JSON config file (flags override it)")


def _add_grid_flags(p):
    p.add_argument("--t-start", dest="t_start", type=float,
                   help="first departure epoch (days MJD2000)")
    p.add_argument("--dt-step", dest="dt_step", type=float,
                   help="grid step for both axes (days)")
    p.add_argument("--departures", type=int, help="number of departure columns (h)")
    p.add_argument("--durations", type=int, help="number of duration rows (d)")
    p.add_argument("--dur-min", dest="dur_min", type=float,
                   help="duration of the first row (days, default dt-step)")
    p.add_argument("--max-revs", dest="max_revs", type=int,
                   help="max Lambert revolutions per leg (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dvplan",
        description="minimum delta-V multi-rendezvous itinerary planning",
    )
    parser.add_argument("--version", action="version", version=f"dvplan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="validate and list a catalog file")
    _add_catalog_flags(p)
    p.set_defaults(func=_cmd_catalog)

    p = sub.add_parser("porkchop", help="pair delta-V matrix -> document + CSV + PGM")
    _add_catalog_flags(p)
    _add_grid_flags(p)
    p.add_argument("--from", dest="from_id", help="departure object id")
    p.add_argument("--to", dest="to_id", help="arrival object id")
    p.add_argument("--pgm-cap", dest="pgm_cap", type=float,
                   help="PGM saturation cap in m/s (default: max finite entry)")
    p.add_argument("--out-dir", dest="out_dir", help="output directory")
    p.set_defaults(func=_cmd_porkchop)

    p = sub.add_parser("adjust", help="stay/wait transforms on a matrix document")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--wait", action="store_true", help="apply the wait adjustment")
    p.add_argument("--stay", type=int, help="stay time in grid steps")
    p.add_argument("--augment", action="store_true",
                   help="grow the grid before the stay shift so nothing is lost")
    p.set_defaults(func=_cmd_adjust)

    p = sub.add_parser("concat", help="min-plus concatenation over matrix documents")
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("inputs", nargs="+", help="matrix documents, chain order")
    p.set_defaults(func=_cmd_concat)

    p = sub.add_parser("search", help="best n-object sequences (DFS and/or graph)")
    _add_catalog_flags(p)
    _add_grid_flags(p)
    p.add_argument("--n", type=int, help="sequence length (objects)")
    p.add_argument("--stay", type=int, help="stay time in grid steps (default 0)")
    p.add_argument("--margin", type=float, help="prune margin in m/s (default 0)")
    p.add_argument("--top-k", dest="top_k", type=int, help="sequences to report (default 10)")
    p.add_argument("--solver", choices=("dfs", "graph", "both"))
    p.add_argument("--max-k", dest="max_k", type=int,
                   help="path budget for counter-automaton uniqueness recovery")
    p.add_argument("--threads", type=int, help="worker parallelism (default 1)")
    p.add_argument("--out-dir", dest="out_dir", help="output directory")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("budget", help="most objects within a delta-V budget")
    _add_catalog_flags(p)
    _add_grid_flags(p)
    p.add_argument("--budget", type=float, help="delta-V budget in m/s")
    p.add_argument("--stay", type=int, help="stay time in grid steps (default 0)")
    p.add_argument("--top-k", dest="top_k", type=int, help="sequences to report (default all)")
    p.add_argument("--threads", type=int, help="worker parallelism (default 1)")
    p.add_argument("--out-dir", dest="out_dir", help="output directory")
    p.set_defaults(func=_cmd_budget)

    p = sub.add_parser("export-graph", help="time-expanded graph as a text edge list")
    _add_catalog_flags(p)
    _add_grid_flags(p)
    p.add_argument("--stay", type=int, help="stay time in grid steps (default 0)")
    p.add_argument("--threads", type=int, help="worker parallelism (default 1)")
    p.add_argument("--out", dest="outfile", help="output edge-list path")
    p.set_defaults(func=_cmd_export_graph)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    except (DvPlanError, KeyError, OSError, json.JSONDecodeError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"unknown object id {exc}"
        print(f"error: {msg}", file=sys.stderr)
        return _DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
