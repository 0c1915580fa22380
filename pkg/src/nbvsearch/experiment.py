"""Simulation study: initial nadir grid, iterative NBV optimisation, manikin detection."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from . import evolution
from .camera import DEFAULT_HFOV_DEG, DEFAULT_VFOV_DEG, CameraView, write_cameras
from .evolution import EvolutionConfig, GenerationStats, PoseBounds
from .fitness import (
    DEFAULT_MU,
    DEFAULT_REG,
    FitnessContext,
    build_context,
    commit_view,
    heuristic_function,
    score_candidate,
    write_trace,
)
from .forest import DetectionTable, ForestParams, detection_table, generate_scene, place_manikins
from .io import write_obj, write_tags

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CURVE_COLUMNS = ("n_cameras", "visible_manikins", "total_pixels")
AGGREGATE_COLUMNS = ("n_cameras", "visible_mean", "visible_min", "visible_max",
                     "pixels_mean", "pixels_min", "pixels_max")


@dataclass
class GridSpec:
    rows: int = 6
    cols: int = 6
    altitude: float = 25.0
    pitch_deg: float = -90.0
    yaw_deg: float = 0.0


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one simulation run or a batch of runs."""

    scene: ForestParams = field(default_factory=ForestParams)
    grid: GridSpec = field(default_factory=GridSpec)
    n_nbv: int = 20
    heuristic: str = "visibility"
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    manikins: int = 100
    under_canopy: bool = True
    runs: int = 18
    output_dir: Optional[str] = None
    seed: int = 0
    focal: float = 1.0
    hfov_deg: float = DEFAULT_HFOV_DEG
    vfov_deg: float = DEFAULT_VFOV_DEG
    margin: float = 5.0
    z_range: tuple = (2.0, 30.0)
    pitch_range_deg: tuple = (-90.0, 0.0)
    mu: float = DEFAULT_MU
    reg: float = DEFAULT_REG
    max_vertices: Optional[int] = None
    resolution: tuple = (160, 120)

    def __post_init__(self):
        heuristic_function(self.heuristic)
        if self.n_nbv < 0 or self.manikins < 0 or self.runs < 1:
            raise ValueError("n_nbv and manikins must be >= 0 and runs >= 1")
        if self.grid.rows < 1 or self.grid.cols < 1:
            raise ValueError("grid needs at least one row and column")
        self.z_range = tuple(self.z_range)
        self.pitch_range_deg = tuple(self.pitch_range_deg)
        self.resolution = tuple(int(r) for r in self.resolution)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        if "scene" in data:
            data["scene"] = ForestParams.from_mapping(data["scene"])
        if "grid" in data:
            data["grid"] = GridSpec(**data["grid"])
        if "evolution" in data:
            data["evolution"] = EvolutionConfig.from_mapping(data["evolution"])
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def bounds(self) -> PoseBounds:
        lo, hi = (math.radians(a) for a in self.pitch_range_deg)
        return PoseBounds.around_extent(self.scene.width, self.scene.depth, self.margin,
                                        self.z_range, (lo, hi))

    def camera(self, genome) -> CameraView:
        x, y, z, pitch, yaw = genome
        return CameraView.from_fov((x, y, z), pitch, yaw, self.focal, self.hfov_deg, self.vfov_deg)


def make_initial_grid(spec: GridSpec, width: float, depth: float, focal: float = 1.0,
                      hfov_deg: float = DEFAULT_HFOV_DEG,
                      vfov_deg: float = DEFAULT_VFOV_DEG) -> List[CameraView]:
    """Cameras at the cell centres of a ``rows x cols`` grid over the extent."""
    if spec.rows < 1 or spec.cols < 1:
        raise ValueError("grid needs at least one row and column")
    xs = (np.arange(spec.cols) + 0.5) * width / spec.cols
    ys = (np.arange(spec.rows) + 0.5) * depth / spec.rows
    pitch = math.radians(spec.pitch_deg)
    yaw = math.radians(spec.yaw_deg)
    return [CameraView.from_fov((x, y, spec.altitude), pitch, yaw, focal, hfov_deg, vfov_deg)
            for y in ys for x in xs]


def run_seeds(master: int, n: int) -> List[int]:
    return [int(s) for s in np.random.SeedSequence(master).generate_state(n)]


def evaluation_vertices(n_vertices: int, cap: Optional[int], seed: int) -> Optional[np.ndarray]:
    """Uniform random subset of at most ``cap`` vertex ids (sorted), or ``None`` for all."""
    if cap is None or cap >= n_vertices:
        return None
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_vertices, size=cap, replace=False))


def optimize_view(ctx: FitnessContext, cfg: ExperimentConfig, seed) -> evolution.EvolutionResult:
    """One EA search for the next view under ``cfg.heuristic``."""
    fit = heuristic_function(cfg.heuristic)
    evo = EvolutionConfig(**{**cfg.evolution.to_dict(), "seed": seed})
    return evolution.run(lambda g: fit(ctx, cfg.camera(g)), cfg.bounds(), evo)


@dataclass
class RunReport:
    config: ExperimentConfig
    run_seed: int
    cameras: List[CameraView]
    n_initial: int
    detection: DetectionTable
    convergence: List[List[GenerationStats]]
    trace: List[tuple]
    n_vertices_evaluated: int
    seconds: float = 0.0

    def curve(self) -> np.ndarray:
        """Rows ``(n_cameras, visible_manikins, total_pixels)`` from the initial grid on."""
        vis = self.detection.visible_curve()
        pix = self.detection.pixel_curve()
        ks = np.arange(self.n_initial, len(self.cameras) + 1)
        if len(vis) == 0:
            return np.column_stack([ks, np.zeros_like(ks), np.zeros_like(ks)])
        return np.column_stack([ks, vis[ks - 1], pix[ks - 1]])

    def summary(self) -> dict:
        c = self.curve()
        return {
            "schema_version": SCHEMA_VERSION,
            "run_seed": self.run_seed,
            "heuristic": self.config.heuristic,
            "n_cameras": len(self.cameras),
            "n_initial": self.n_initial,
            "n_manikins": len(self.detection.manikin_ids),
            "n_vertices_evaluated": self.n_vertices_evaluated,
            "vertex_cap": self.config.max_vertices,
            "visible_initial": int(c[0, 1]),
            "visible_final": int(c[-1, 1]),
            "pixels_final": int(c[-1, 2]),
            "seconds": round(self.seconds, 3),
        }


def _write_curve(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS)
        for row in curve.tolist():
            w.writerow([int(v) for v in row])


def read_curve(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[int(r[c]) for c in CURVE_COLUMNS] for r in rows], dtype=np.int64).reshape(-1, 3)


def _write_convergence(path, convergence) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["nbv", "generation", "max_fitness", "mean_fitness", "best_ever"])
        for k, hist in enumerate(convergence, start=1):
            for h in hist:
                w.writerow([k, h.generation, repr(h.max_fitness), repr(h.mean_fitness), repr(h.best_ever)])


def run_simulation_experiment(cfg: ExperimentConfig, run_seed: Optional[int] = None,
                              output_dir=None) -> RunReport:
    """Generate a scene, plan ``cfg.n_nbv`` views, then score manikin detection.

    With ``output_dir`` set, camera poses, the fitness trace and EA
    convergence are rewritten after every committed view, so an interrupted
    run keeps everything completed so far.
    """
    t0 = time.perf_counter()
    run_seed = cfg.seed if run_seed is None else run_seed
    scene_seed, manikin_seed, ea_seed, vertex_seed = np.random.SeedSequence(run_seed).generate_state(4)
    out = Path(output_dir) if output_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps({**cfg.to_dict(), "run_seed": run_seed}, indent=2))

    scene = generate_scene(cfg.scene, int(scene_seed))
    manikins = place_manikins(scene, cfg.manikins, int(manikin_seed), cfg.under_canopy)
    index = scene.index
    if out is not None:
        write_obj(out / "scene.obj", scene.mesh)
        write_tags(out / "scene_tags.csv", scene.mesh)
        with open(out / "manikins.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["manikin_id", "x", "y", "yaw_deg"])
            for m in manikins:
                w.writerow([m.id, repr(m.position[0]), repr(m.position[1]), repr(math.degrees(m.yaw))])

    cameras = make_initial_grid(cfg.grid, cfg.scene.width, cfg.scene.depth,
                                cfg.focal, cfg.hfov_deg, cfg.vfov_deg)
    n_initial = len(cameras)
    vids = evaluation_vertices(scene.mesh.n_vertices, cfg.max_vertices, int(vertex_seed))
    ctx = build_context(index, cameras, vids, cfg.mu, cfg.reg)

    convergence: List[List[GenerationStats]] = []
    trace: List[tuple] = []
    for k in range(1, cfg.n_nbv + 1):
        res = optimize_view(ctx, cfg, [int(ea_seed), k])
        cam = cfg.camera(res.best.genome)
        jv, jd = score_candidate(ctx, cam)
        trace.append((k, f"nbv{k}", jv, jd))
        convergence.append(res.history)
        ctx = commit_view(ctx, cam)
        cameras.append(cam)
        log.info("nbv %d/%d %r fitness=%.4f", k, cfg.n_nbv, cam, res.best.fitness)
        if out is not None:
            write_cameras(out / "cameras.csv", cameras)
            write_trace(out / "trace.csv", trace)
            _write_convergence(out / "convergence.csv", convergence)

    table = detection_table(index, manikins, cameras, cfg.resolution)
    report = RunReport(cfg, run_seed, cameras, n_initial, table, convergence, trace,
                       ctx.n_vertices, time.perf_counter() - t0)
    if out is not None:
        write_cameras(out / "cameras.csv", cameras)
        write_trace(out / "trace.csv", trace)
        _write_convergence(out / "convergence.csv", convergence)
        table.write_csv(out / "detection.csv")
        _write_curve(out / "curve.csv", report.curve())
        (out / "report.json").write_text(json.dumps(report.summary(), indent=2))
    return report


def aggregate_curves(curves: Sequence[np.ndarray]) -> np.ndarray:
    """Per camera count: mean, min and max of visible manikins and of pixels."""
    stack = np.stack([np.asarray(c, dtype=np.float64) for c in curves])
    ks = stack[0, :, 0]
    if not np.all(stack[:, :, 0] == ks):
        raise ValueError("runs disagree on camera counts")
    vis, pix = stack[:, :, 1], stack[:, :, 2]
    return np.column_stack([ks, vis.mean(0), vis.min(0), vis.max(0), pix.mean(0), pix.min(0), pix.max(0)])


def write_aggregate(path, agg: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        for row in agg.tolist():
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def read_aggregate(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[float(r[c]) for c in AGGREGATE_COLUMNS] for r in rows])


def aggregate_from_dir(path) -> np.ndarray:
    """Recompute the batch aggregate from the ``run_*/curve.csv`` files under ``path``."""
    files = sorted(Path(path).glob("run_*/curve.csv"))
    if not files:
        raise FileNotFoundError(f"no run_*/curve.csv under {path}")
    return aggregate_curves([read_curve(f) for f in files])


@dataclass
class BatchResult:
    reports: List[RunReport]
    aggregate: np.ndarray

    def final(self, column: str = "visible_mean") -> float:
        return float(self.aggregate[-1, AGGREGATE_COLUMNS.index(column)])


def run_batch(cfg: ExperimentConfig, n_runs: Optional[int] = None, output_dir=None,
              n_jobs: int = 1) -> BatchResult:
    """``n_runs`` independent runs with seeds derived from ``cfg.seed``."""
    n_runs = cfg.runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    seeds = run_seeds(cfg.seed, n_runs)
    out = Path(output_dir) if output_dir is not None else None
    dirs = [None if out is None else out / f"run_{i:03d}" for i in range(n_runs)]
    if n_jobs == 1:
        reports = [run_simulation_experiment(cfg, s, d) for s, d in zip(seeds, dirs)]
    else:
        from joblib import Parallel, delayed

        reports = Parallel(n_jobs=n_jobs)(
            delayed(run_simulation_experiment)(cfg, s, d) for s, d in zip(seeds, dirs))
    agg = aggregate_curves([r.curve() for r in reports])
    if out is not None:
        write_aggregate(out / "aggregate.csv", agg)
        (out / "batch.json").write_text(json.dumps(
            {"schema_version": SCHEMA_VERSION, "n_runs": n_runs, "master_seed": cfg.seed,
             "heuristic": cfg.heuristic, "runs": [r.summary() for r in reports]}, indent=2))
    return BatchResult(reports, agg)


def convergence_gain(cfg: ExperimentConfig, short: int = 20, long: int = 40,
                     n_runs: int = 10) -> Dict[str, np.ndarray]:
    """Best-ever fitness after ``short`` and ``long`` generations for the first NBV.

    Both values come from a single ``long``-generation search per run; the
    per-generation RNG streams make the prefix identical to a ``short`` run.
    """
    g_short, g_long, monotone = [], [], []
    for s in run_seeds(cfg.seed, n_runs):
        scene_seed, _, ea_seed, vertex_seed = np.random.SeedSequence(s).generate_state(4)
        scene = generate_scene(cfg.scene, int(scene_seed))
        cams = make_initial_grid(cfg.grid, cfg.scene.width, cfg.scene.depth,
                                 cfg.focal, cfg.hfov_deg, cfg.vfov_deg)
        vids = evaluation_vertices(scene.mesh.n_vertices, cfg.max_vertices, int(vertex_seed))
        ctx = build_context(scene.index, cams, vids, cfg.mu, cfg.reg)
        long_cfg = ExperimentConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)},
                                       "evolution": EvolutionConfig(**{**cfg.evolution.to_dict(),
                                                                       "generations": long})})
        curve = optimize_view(ctx, long_cfg, [int(ea_seed), 1]).best_ever_curve()
        g_short.append(curve[short])
        g_long.append(curve[long])
        monotone.append(bool(np.all(np.diff(curve) >= 0)))
    return {"short": np.array(g_short), "long": np.array(g_long), "monotone": np.array(monotone)}
