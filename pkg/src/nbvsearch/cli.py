"""Command-line entry point: ``nbvsearch <subcommand> ...``.

Settings are resolved as defaults < config file (JSON or TOML) < flags. The
output directory can also be set with the ``NBVSEARCH_OUTPUT_DIR``
environment variable, which overrides the config file but not ``--output``.
On failure a JSON object ``{"error": ..., "message": ...}`` is written to
stderr and the exit code is 1 (2 for usage errors).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .camera import read_cameras
from .dataset import label_report, load_dataset, brute_force_nbv
from .experiment import ExperimentConfig, run_batch, run_simulation_experiment
from .fitness import build_context, write_trace
from .forest import generate_scene, place_manikins
from .io import read_obj, write_counts_csv, write_obj, write_tags
from .mesh import TriangleMesh, build_accel
from .visibility import coverage_counts, coverage_export

OUTPUT_ENV = "NBVSEARCH_OUTPUT_DIR"

log = logging.getLogger("nbvsearch")


def load_config_file(path) -> dict:
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def _set(d: dict, dotted: str, value) -> None:
    *head, last = dotted.split(".")
    for k in head:
        d = d.setdefault(k, {})
    d[last] = value


# flag dest -> config key
_FLAG_KEYS = {
    "heuristic": "heuristic", "n_nbv": "n_nbv", "manikins": "manikins", "seed": "seed",
    "runs": "runs", "max_vertices": "max_vertices", "density": "scene.density",
    "width": "scene.width", "depth": "scene.depth", "rows": "grid.rows", "cols": "grid.cols",
    "altitude": "grid.altitude", "population": "evolution.population",
    "generations": "evolution.generations", "crossover_rate": "evolution.crossover_rate",
    "mutation_rate": "evolution.mutation_rate",
}


def resolve_config(args) -> ExperimentConfig:
    data = load_config_file(args.config) if getattr(args, "config", None) else {}
    if os.environ.get(OUTPUT_ENV):
        data["output_dir"] = os.environ[OUTPUT_ENV]
    for dest, key in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            _set(data, key, v)
    if getattr(args, "resolution", None):
        data["resolution"] = args.resolution
    if getattr(args, "output", None):
        data["output_dir"] = args.output
    return ExperimentConfig.from_mapping(data)


def _output_dir(args, default: str) -> Path:
    out = getattr(args, "output", None) or os.environ.get(OUTPUT_ENV) or default
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or TOML file with ExperimentConfig keys")
    p.add_argument("--output", "-o", help="output directory")
    p.add_argument("--heuristic", choices=["visibility", "geometry"])
    p.add_argument("--n-nbv", dest="n_nbv", type=int)
    p.add_argument("--manikins", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-vertices", dest="max_vertices", type=int)
    p.add_argument("--density", type=float)
    p.add_argument("--width", type=float)
    p.add_argument("--depth", type=float)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--altitude", type=float)
    p.add_argument("--population", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--crossover-rate", dest="crossover_rate", type=float)
    p.add_argument("--mutation-rate", dest="mutation_rate", type=float)
    p.add_argument("--resolution", type=int, nargs=2, metavar=("W", "H"))


def cmd_simulate(args) -> dict:
    cfg = resolve_config(args)
    out = Path(cfg.output_dir or "nbv_output")
    report = run_simulation_experiment(cfg, output_dir=out)
    return {**report.summary(), "output_dir": str(out)}


def cmd_batch(args) -> dict:
    cfg = resolve_config(args)
    out = Path(cfg.output_dir or "nbv_output")
    res = run_batch(cfg, output_dir=out, n_jobs=args.jobs)
    return {"n_runs": len(res.reports), "visible_mean_final": res.final("visible_mean"),
            "pixels_mean_final": res.final("pixels_mean"), "output_dir": str(out)}


def _read_id_list(path) -> List[str]:
    text = Path(path).read_text()
    return [t for t in text.replace(",", "\n").split() if t]


def cmd_dataset_nbv(args) -> dict:
    mesh = read_obj(args.mesh, args.tags)
    records = load_dataset(args.dataset)
    ids = [r.id for r in records]
    initial_ids = _read_id_list(args.initial) if args.initial else []
    missing = sorted(set(initial_ids) - set(ids))
    if missing:
        raise KeyError(f"initial ids not in dataset: {missing[:5]}")
    by_id = {r.id: r for r in records}
    init_set = set(initial_ids)
    index = build_accel(mesh)
    ctx = build_context(index, [by_id[i].camera for i in initial_ids], mu=args.mu)
    candidates = [r for r in records if r.id not in init_set]
    sel = brute_force_nbv(ctx, candidates, args.heuristic, args.n_views, trace=args.trace)
    out = _output_dir(args, "nbv_dataset_output")
    sel.write_csv(out / "selected.csv")
    if args.trace:
        write_trace(out / "trace.csv", sel.trace)
    coverage_export(mesh, ctx.counts, out / "coverage_before.ply")
    coverage_export(mesh, sel.context.counts, out / "coverage_after.ply")
    rep = label_report(sel.ids, records)
    (out / "labels.json").write_text(json.dumps(rep.to_dict(), indent=2))
    return {"selected": sel.ids, "labels": rep.summary(), "output_dir": str(out)}


def cmd_coverage(args) -> dict:
    mesh = read_obj(args.mesh, args.tags)
    _, cams = read_cameras(args.cameras)
    counts = coverage_counts(build_accel(mesh), cams)
    out = _output_dir(args, "nbv_coverage_output")
    coverage_export(mesh, counts, out / "coverage.ply")
    write_counts_csv(out / "coverage.csv", counts)
    return {"n_cameras": len(cams), "n_vertices": mesh.n_vertices,
            "vertices_seen": int(np.count_nonzero(counts)), "output_dir": str(out)}


def cmd_gen_scene(args) -> dict:
    cfg = resolve_config(args)
    scene = generate_scene(cfg.scene, cfg.seed)
    manikins = place_manikins(scene, cfg.manikins, cfg.seed, cfg.under_canopy)
    out = _output_dir(args, cfg.output_dir or "nbv_scene_output")
    write_obj(out / "scene.obj", scene.mesh)
    write_tags(out / "scene_tags.csv", scene.mesh)
    full = TriangleMesh.merge([scene.mesh] + [m.mesh for m in manikins])
    write_obj(out / "scene_with_manikins.obj", full)
    write_tags(out / "scene_with_manikins_tags.csv", full)
    with open(out / "manikins.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["manikin_id", "x", "y", "yaw_deg"])
        for m in manikins:
            w.writerow([m.id, repr(m.position[0]), repr(m.position[1]), repr(float(np.degrees(m.yaw)))])
    return {"n_trees": len(scene.trees), "n_manikins": len(manikins),
            "n_faces": scene.mesh.n_faces, "output_dir": str(out)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbvsearch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one simulated forest run")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("batch", help="several simulated runs plus aggregate curves")
    _add_experiment_flags(p)
    p.add_argument("--runs", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("dataset-nbv", help="greedy selection over posed images")
    p.add_argument("--mesh", required=True, help="OBJ mesh")
    p.add_argument("--tags", help="face tag sidecar CSV")
    p.add_argument("--dataset", required=True, help="pose CSV")
    p.add_argument("--initial", help="file with initial image ids (whitespace or comma separated)")
    p.add_argument("--heuristic", choices=["visibility", "geometry"], default="visibility")
    p.add_argument("--n-views", dest="n_views", type=int, default=20)
    p.add_argument("--mu", type=float, default=3.0)
    p.add_argument("--trace", action="store_true", help="also write both heuristics for every candidate")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_dataset_nbv)

    p = sub.add_parser("coverage", help="per-vertex view counts as PLY and CSV")
    p.add_argument("--mesh", required=True)
    p.add_argument("--tags")
    p.add_argument("--cameras", required=True, help="pose CSV")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("gen-scene", help="export a procedural forest with manikins")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_gen_scene)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except Exception as exc:  # reported as JSON, not a traceback
        log.debug("command failed", exc_info=True)
        json.dump({"error": type(exc).__name__, "message": str(exc), "command": args.command}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    json.dump(result, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
