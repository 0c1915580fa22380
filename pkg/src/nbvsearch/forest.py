"""Procedural forest scenes with hidden manikins, and target-pixel rendering."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .camera import Z_NEAR, CameraView, to_local
from .exceptions import PlacementError
from .mesh import AccelIndex, TriangleMesh, build_accel

MANIKIN_SIZE = (1.7, 0.5, 0.3)


@dataclass
class ForestParams:
    """Scene generation ranges; every ``(lo, hi)`` pair is sampled uniformly."""

    width: float = 30.0
    depth: float = 30.0
    density: float = 0.3
    trunk_radius: Tuple[float, float] = (0.15, 0.4)
    trunk_height: Tuple[float, float] = (2.0, 5.0)
    canopy_radius: Tuple[float, float] = (1.0, 3.0)
    canopy_height: Tuple[float, float] = (2.0, 6.0)
    cone_fraction: float = 0.5
    canopy_jitter: float = 0.15
    ground_spacing: float = 1.0
    trunk_sides: int = 8
    canopy_segments: int = 8

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0:
            raise ValueError("scene extent must be positive")
        if self.density < 0:
            raise ValueError("tree density must be non-negative")
        for name in ("trunk_radius", "trunk_height", "canopy_radius", "canopy_height"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < lo <= hi, got {(lo, hi)}")
            setattr(self, name, (float(lo), float(hi)))
        if not 0 <= self.canopy_jitter < 1:
            raise ValueError("canopy_jitter must lie in [0, 1)")
        if not 0 <= self.cone_fraction <= 1:
            raise ValueError("cone_fraction must lie in [0, 1]")
        if self.ground_spacing <= 0:
            raise ValueError("ground_spacing must be positive")

    @property
    def n_trees(self) -> int:
        return int(round(self.density * self.width * self.depth))

    @classmethod
    def from_mapping(cls, data: Mapping) -> "ForestParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scene key(s): {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TreeDesc:
    position: Tuple[float, float]
    trunk_radius: float
    trunk_height: float
    canopy_radius: float
    canopy_height: float
    shape: str
    shape_seed: int


@dataclass(frozen=True, eq=False)
class Manikin:
    id: int
    position: Tuple[float, float]
    yaw: float
    mesh: TriangleMesh

    @property
    def corners(self) -> np.ndarray:
        return self.mesh.vertices


@dataclass(frozen=True, eq=False)
class ForestScene:
    params: ForestParams
    seed: Optional[int]
    trees: Tuple[TreeDesc, ...]
    ground: TriangleMesh
    mesh: TriangleMesh

    @cached_property
    def index(self) -> AccelIndex:
        return build_accel(self.mesh)


def ground_mesh(width: float, depth: float, spacing: float) -> TriangleMesh:
    nx = max(1, int(round(width / spacing)))
    ny = max(1, int(round(depth / spacing)))
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, depth, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    faces = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriangleMesh(verts, faces, np.full(len(faces), "ground", dtype=object))


def _ring(n: int, radius, z: float, cx: float, cy: float) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(n) / n
    r = np.broadcast_to(radius, (n,))
    return np.column_stack([cx + r * np.cos(ang), cy + r * np.sin(ang), np.full(n, z)])


def _band(lo0: int, hi0: int, n: int) -> List[Tuple[int, int, int]]:
    """Quads between two rings of ``n`` vertices starting at ``lo0`` / ``hi0``."""
    out = []
    for j in range(n):
        k = (j + 1) % n
        out.append((lo0 + j, lo0 + k, hi0 + k))
        out.append((lo0 + j, hi0 + k, hi0 + j))
    return out


def _fan(center: int, ring0: int, n: int, flip: bool) -> List[Tuple[int, int, int]]:
    out = []
    for j in range(n):
        k = (j + 1) % n
        out.append((center, ring0 + k, ring0 + j) if flip else (center, ring0 + j, ring0 + k))
    return out


def tree_mesh(tree: TreeDesc, params: ForestParams) -> TriangleMesh:
    """Open 8-sided trunk plus a closed, jittered ellipsoid or cone canopy."""
    cx, cy = tree.position
    n = params.trunk_sides
    verts = [_ring(n, tree.trunk_radius, 0.0, cx, cy), _ring(n, tree.trunk_radius, tree.trunk_height, cx, cy)]
    faces = _band(0, n, n)
    base = 2 * n

    rng = np.random.default_rng(tree.shape_seed)
    m = params.canopy_segments
    jit = params.canopy_jitter
    z0 = tree.trunk_height
    h = tree.canopy_height
    r = tree.canopy_radius
    # (height fraction above canopy base, radius fraction), bottom to top
    if tree.shape == "cone":
        levels = [(0.0, 1.0), (0.45, 0.6)]
    else:
        levels = [(0.15, 0.71), (0.5, 1.0), (0.85, 0.71)]
    rings = []
    for t, s in levels:
        radii = r * s * (1.0 + jit * rng.uniform(-1.0, 1.0, m))
        rings.append(_ring(m, radii, z0 + t * h, cx, cy))
    bottom = np.array([[cx, cy, z0]])
    top = np.array([[cx, cy, z0 + h]])
    canopy = np.concatenate(rings + [bottom, top])
    starts = [base + i * m for i in range(len(rings))]
    c_bottom = base + len(rings) * m
    c_top = c_bottom + 1
    faces += _fan(c_bottom, starts[0], m, flip=True)
    for a_, b_ in zip(starts[:-1], starts[1:]):
        faces += _band(a_, b_, m)
    faces += _fan(c_top, starts[-1], m, flip=False)
    verts.append(canopy)
    all_v = np.concatenate(verts)
    return TriangleMesh(all_v, np.array(faces), np.full(len(faces), "tree", dtype=object))


def generate_scene(params: Optional[ForestParams] = None, seed: Optional[int] = None) -> ForestScene:
    """Random forest over ``width x depth`` with ``round(density * area)`` trees.

    Deterministic for a given seed.
    """
    params = params or ForestParams()
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(params.n_trees):
        x = rng.uniform(0.0, params.width)
        y = rng.uniform(0.0, params.depth)
        trees.append(TreeDesc(
            position=(float(x), float(y)),
            trunk_radius=float(rng.uniform(*params.trunk_radius)),
            trunk_height=float(rng.uniform(*params.trunk_height)),
            canopy_radius=float(rng.uniform(*params.canopy_radius)),
            canopy_height=float(rng.uniform(*params.canopy_height)),
            shape="cone" if rng.random() < params.cone_fraction else "ellipsoid",
            shape_seed=int(rng.integers(0, 2**32)),
        ))
    ground = ground_mesh(params.width, params.depth, params.ground_spacing)
    mesh = TriangleMesh.merge([ground] + [tree_mesh(t, params) for t in trees])
    return ForestScene(params, seed, tuple(trees), ground, mesh)


def manikin_mesh(x: float, y: float, yaw: float, size=MANIKIN_SIZE) -> TriangleMesh:
    """Closed box lying on the ground, long axis along ``yaw``; faces tagged ``target``."""
    L, W, H = size
    c, s = math.cos(yaw), math.sin(yaw)
    local = np.array([[-L / 2, -W / 2], [L / 2, -W / 2], [L / 2, W / 2], [-L / 2, W / 2]])
    xy = local @ np.array([[c, s], [-s, c]]) + (x, y)
    verts = np.concatenate([np.column_stack([xy, np.zeros(4)]), np.column_stack([xy, np.full(4, H)])])
    faces = [(0, 2, 1), (0, 3, 2), (4, 5, 6), (4, 6, 7)]
    for j in range(4):
        k = (j + 1) % 4
        faces += [(j, k, 4 + k), (j, 4 + k, 4 + j)]
    return TriangleMesh(verts, np.array(faces), np.full(len(faces), "target", dtype=object))


def _rect_circle_distance(center, yaw, half, point) -> float:
    """Distance from ``point`` to a rotated rectangle with half-extents ``half``."""
    c, s = math.cos(yaw), math.sin(yaw)
    dx, dy = point[0] - center[0], point[1] - center[1]
    lx, ly = c * dx + s * dy, -s * dx + c * dy
    qx = max(abs(lx) - half[0], 0.0)
    qy = max(abs(ly) - half[1], 0.0)
    return math.hypot(qx, qy)


def place_manikins(scene: ForestScene, count: int, seed: Optional[int] = None,
                   under_canopy: bool = True, max_attempts: int = 10000) -> List[Manikin]:
    """Rejection-sample ``count`` manikins on the ground.

    Candidates are rejected if they touch a trunk, come within one bounding
    circle of another manikin, leave the scene extent or (with
    ``under_canopy``) do not lie under some canopy.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = np.random.default_rng(seed)
    L, W, _ = MANIKIN_SIZE
    half = (L / 2, W / 2)
    reach = math.hypot(*half)
    p = scene.params
    trunks = [(t.position, t.trunk_radius) for t in scene.trees]
    canopy_xy = np.array([t.position for t in scene.trees]).reshape(-1, 2)
    canopy_r = np.array([t.canopy_radius for t in scene.trees])
    placed: List[Manikin] = []
    centers: List[Tuple[float, float]] = []
    for mid in range(count):
        for _ in range(max_attempts):
            x = rng.uniform(reach, p.width - reach)
            y = rng.uniform(reach, p.depth - reach)
            yaw = rng.uniform(-math.pi, math.pi)
            if under_canopy and not np.any(np.hypot(*(canopy_xy - (x, y)).T) <= canopy_r):
                continue
            if any(_rect_circle_distance((x, y), yaw, half, pos) <= r for pos, r in trunks):
                continue
            if any(math.hypot(x - cx, y - cy) <= 2 * reach for cx, cy in centers):
                continue
            break
        else:
            raise PlacementError(f"could not place manikin {mid} after {max_attempts} attempts")
        centers.append((x, y))
        placed.append(Manikin(mid, (float(x), float(y)), float(yaw), manikin_mesh(x, y, yaw)))
    return placed


def _pixel_window(cam: CameraView, corners: np.ndarray, width: int, height: int):
    """Pixel rectangle containing the projection of a convex target; ``None`` if behind."""
    local = to_local(cam, corners)
    z = local[:, 2]
    if np.all(z <= 0.0):
        return None
    if np.any(z <= Z_NEAR):
        return 0, width, 0, height
    u = cam.f * local[:, 0] / z
    v = cam.f * local[:, 1] / z
    du = 2.0 * cam.half_width / width
    dv = 2.0 * cam.half_height / height
    px0 = int(math.floor((u.min() + cam.half_width) / du)) - 1
    px1 = int(math.ceil((u.max() + cam.half_width) / du)) + 1
    py0 = int(math.floor((v.min() + cam.half_height) / dv)) - 1
    py1 = int(math.ceil((v.max() + cam.half_height) / dv)) + 1
    px0, px1 = max(px0, 0), min(px1, width)
    py0, py1 = max(py0, 0), min(py1, height)
    if px0 >= px1 or py0 >= py1:
        return None
    return px0, px1, py0, py1


def render_count_target_pixels(index: AccelIndex, target: TriangleMesh, cam: CameraView,
                               resolution: Tuple[int, int] = (160, 120)) -> int:
    """Pixels whose primary ray meets ``target`` before any face of the scene.

    Equivalent to rendering the scene with only this target inserted and
    counting target-coloured pixels. Only rays inside the target's projected
    bounding rectangle are cast; the target must be convex.
    """
    width, height = resolution
    if width <= 0 or height <= 0:
        raise ValueError("resolution must be positive")
    win = _pixel_window(cam, target.vertices, width, height)
    if win is None:
        return 0
    px0, px1, py0, py1 = win
    return int(_kernels.render_target_kernel(
        cam.position, cam.rotation, cam.f, cam.half_width, cam.half_height, width, height,
        px0, px1, py0, py1, target.vertices, target.faces, *index.arrays()))


@dataclass
class DetectionTable:
    """Target pixel counts per (manikin, camera)."""

    pixels: np.ndarray
    manikin_ids: List[int] = field(default_factory=list)
    camera_ids: List = field(default_factory=list)

    @property
    def detected(self) -> np.ndarray:
        return self.pixels > 0

    @property
    def seen_by_any(self) -> np.ndarray:
        return self.detected.any(axis=1)

    @property
    def n_seen(self) -> int:
        return int(self.seen_by_any.sum())

    @property
    def total_pixels(self) -> int:
        return int(self.pixels.sum())

    def visible_curve(self) -> np.ndarray:
        """Manikins seen by at least one of the first ``k`` cameras, for k = 1..K."""
        if self.pixels.shape[1] == 0:
            return np.zeros(0, dtype=np.int64)
        return np.logical_or.accumulate(self.detected, axis=1).sum(axis=0)

    def pixel_curve(self) -> np.ndarray:
        """Target pixels summed over manikins and the first ``k`` cameras."""
        return np.cumsum(self.pixels.sum(axis=0))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["manikin_id", "camera_id", "pixels"])
            for i, mid in enumerate(self.manikin_ids):
                for k, cid in enumerate(self.camera_ids):
                    w.writerow([mid, cid, int(self.pixels[i, k])])


def detection_table(index: AccelIndex, manikins: Sequence[Manikin], cams: Sequence[CameraView],
                    resolution: Tuple[int, int] = (160, 120), camera_ids=None) -> DetectionTable:
    pixels = np.zeros((len(manikins), len(cams)), dtype=np.int64)
    for k, cam in enumerate(cams):
        for i, man in enumerate(manikins):
            pixels[i, k] = render_count_target_pixels(index, man.mesh, cam, resolution)
    ids = list(camera_ids) if camera_ids is not None else list(range(len(cams)))
    return DetectionTable(pixels, [m.id for m in manikins], ids)
