"""Pinhole camera with zero roll: pose transforms, projection and Jacobian.

Angle convention: pitch is measured from the horizontal (``-pi/2`` looks
straight down), yaw from global +X towards +Y. The local frame has +Z along
the view direction, +X horizontal to the right and +Y = Z x X.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import BehindCameraError, DatasetSchemaError

Z_NEAR = 0.01
DEFAULT_HFOV_DEG = 84.0
DEFAULT_VFOV_DEG = 62.0

POSE_COLUMNS = ("id", "x", "y", "z", "pitch_deg", "yaw_deg", "f", "hfov_deg", "vfov_deg")


def wrap_yaw(yaw: float) -> float:
    """Map an angle into ``(-pi, pi]``."""
    y = math.fmod(yaw + math.pi, 2.0 * math.pi)
    if y <= 0.0:
        y += 2.0 * math.pi
    return y - math.pi


def rotation_from_angles(pitch: float, yaw: float) -> np.ndarray:
    """Local-to-global rotation ``R`` whose columns are the camera axes X, Y, Z."""
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    z = np.array([cp * cy, cp * sy, sp])
    x = np.array([sy, -cy, 0.0])
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


@dataclass(frozen=True, eq=False)
class CameraView:
    """One camera pose plus pinhole intrinsics.

    ``half_width`` and ``half_height`` are the image-plane extents in the
    same units as ``f``. Use :meth:`from_fov` to set them from field-of-view
    angles.
    """

    position: np.ndarray
    pitch: float
    yaw: float
    f: float = 1.0
    half_width: float = math.tan(math.radians(DEFAULT_HFOV_DEG) / 2)
    half_height: float = math.tan(math.radians(DEFAULT_VFOV_DEG) / 2)

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3).copy()
        pos.setflags(write=False)
        if not np.all(np.isfinite(pos)):
            raise ValueError("camera position must be finite")
        if not (self.f > 0 and self.half_width > 0 and self.half_height > 0):
            raise ValueError("focal length and image extents must be positive")
        pitch = float(self.pitch)
        if abs(pitch) > math.pi / 2 + 1e-12:
            raise ValueError(f"pitch {pitch} outside [-pi/2, pi/2]")
        pitch = min(max(pitch, -math.pi / 2), math.pi / 2)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "pitch", pitch)
        object.__setattr__(self, "yaw", wrap_yaw(float(self.yaw)))
        object.__setattr__(self, "f", float(self.f))
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "half_height", float(self.half_height))
        R = rotation_from_angles(pitch, self.yaw)
        R.setflags(write=False)
        object.__setattr__(self, "_R", R)

    @classmethod
    def from_fov(cls, position, pitch, yaw, f=1.0, hfov_deg=DEFAULT_HFOV_DEG,
                 vfov_deg=DEFAULT_VFOV_DEG) -> "CameraView":
        return cls(position, pitch, yaw, f,
                   f * math.tan(math.radians(hfov_deg) / 2),
                   f * math.tan(math.radians(vfov_deg) / 2))

    @property
    def rotation(self) -> np.ndarray:
        return self._R

    @property
    def direction(self) -> np.ndarray:
        return self._R[:, 2]

    @property
    def hfov_deg(self) -> float:
        return math.degrees(2 * math.atan(self.half_width / self.f))

    @property
    def vfov_deg(self) -> float:
        return math.degrees(2 * math.atan(self.half_height / self.f))

    def with_pose(self, position, pitch, yaw) -> "CameraView":
        """Same intrinsics, new pose."""
        return CameraView(position, pitch, yaw, self.f, self.half_width, self.half_height)

    def genome(self) -> np.ndarray:
        return np.array([*self.position, self.pitch, self.yaw])

    def __repr__(self):
        x, y, z = self.position
        return (f"CameraView(({x:.3f}, {y:.3f}, {z:.3f}), pitch={math.degrees(self.pitch):.2f}deg, "
                f"yaw={math.degrees(self.yaw):.2f}deg)")


def to_local(cam: CameraView, n) -> np.ndarray:
    """Global point(s) into the camera frame: ``R^T (n - o)``."""
    n = np.asarray(n, dtype=np.float64)
    return (n - cam.position) @ cam.rotation


def to_global(cam: CameraView, n_local) -> np.ndarray:
    """Inverse of :func:`to_local`: ``o + R n'``."""
    n_local = np.asarray(n_local, dtype=np.float64)
    return cam.position + n_local @ cam.rotation.T


def project_many(cam: CameraView, points, z_near: float = Z_NEAR) -> Tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates of many points and a mask of those inside the frustum.

    Entries of ``uv`` where the mask is False are NaN.
    """
    local = to_local(cam, np.asarray(points, dtype=np.float64).reshape(-1, 3))
    z = local[:, 2]
    front = z > z_near
    uv = np.full((len(local), 2), np.nan)
    uv[front] = cam.f * local[front, :2] / z[front, None]
    inside = front.copy()
    inside[front] = (np.abs(uv[front, 0]) <= cam.half_width) & (np.abs(uv[front, 1]) <= cam.half_height)
    uv[~inside] = np.nan
    return uv, inside


def project(cam: CameraView, n, z_near: float = Z_NEAR) -> Optional[Tuple[float, float]]:
    """Co-linearity projection ``(f x'/z', f y'/z')``; ``None`` outside the field of view."""
    uv, inside = project_many(cam, n, z_near)
    if not inside[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1])


def jacobians_many(cam: CameraView, points, z_near: float = Z_NEAR) -> np.ndarray:
    """Stacked 2x3 Jacobians of ``(u, v)`` w.r.t. the global point, shape (n, 2, 3)."""
    local = to_local(cam, np.asarray(points, dtype=np.float64).reshape(-1, 3))
    x, y, z = local[:, 0:1], local[:, 1:2], local[:, 2:3]
    if np.any(z <= z_near):
        raise BehindCameraError("point at or behind the near plane")
    R = cam.rotation
    r1, r2, r3 = R[:, 0], R[:, 1], R[:, 2]
    z2 = z * z
    du = cam.f * (z * r1 - x * r3) / z2
    dv = cam.f * (z * r2 - y * r3) / z2
    return np.stack([du, dv], axis=1)


def colinearity_jacobian(cam: CameraView, n, z_near: float = Z_NEAR) -> np.ndarray:
    """2x3 Jacobian of the projection at ``n``; rows are grad u and grad v."""
    return jacobians_many(cam, n, z_near)[0]


def read_cameras(path) -> Tuple[List[str], List[CameraView]]:
    """Parse a pose CSV (angles in degrees). Returns ``(ids, cameras)``."""
    ids, cams, _ = _read_pose_rows(path, extra_prefix=None)
    return ids, cams


def _read_pose_rows(path, extra_prefix: Optional[str]):
    ids: List[str] = []
    cams: List[CameraView] = []
    extras: List[dict] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in POSE_COLUMNS if c not in header]
        if missing:
            raise DatasetSchemaError(f"{path}: line 1: missing column(s) {', '.join(missing)}")
        extra_cols = [c for c in header if extra_prefix and c.startswith(extra_prefix)]
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            try:
                vals = {c: float(row[c]) for c in POSE_COLUMNS[1:]}
                cam = CameraView.from_fov(
                    (vals["x"], vals["y"], vals["z"]),
                    math.radians(vals["pitch_deg"]), math.radians(vals["yaw_deg"]),
                    vals["f"], vals["hfov_deg"], vals["vfov_deg"],
                )
                extra = {c: int(row[c]) for c in extra_cols if row[c] not in ("", None)}
            except (TypeError, ValueError) as exc:
                raise DatasetSchemaError(f"{path}: line {lineno}: {exc}") from exc
            rid = (row["id"] or "").strip()
            if not rid or rid in seen:
                raise DatasetSchemaError(f"{path}: line {lineno}: missing or duplicate id {rid!r}")
            seen.add(rid)
            ids.append(rid)
            cams.append(cam)
            extras.append(extra)
    return ids, cams, extras


def pose_row(cid, cam: CameraView) -> list:
    x, y, z = cam.position
    return [cid, repr(float(x)), repr(float(y)), repr(float(z)),
            repr(math.degrees(cam.pitch)), repr(math.degrees(cam.yaw)),
            repr(cam.f), repr(cam.hfov_deg), repr(cam.vfov_deg)]


def write_cameras(path, cameras: Sequence[CameraView], ids: Optional[Iterable] = None,
                  extra: Optional[Sequence[dict]] = None) -> None:
    """Write a pose CSV; ``extra`` adds per-row columns (e.g. manikin labels)."""
    ids = list(ids) if ids is not None else list(range(len(cameras)))
    extra_cols = sorted({k for e in (extra or []) for k in e})
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(POSE_COLUMNS) + extra_cols)
        for i, (cid, cam) in enumerate(zip(ids, cameras)):
            row = pose_row(cid, cam)
            if extra_cols:
                row += [extra[i].get(k, "") for k in extra_cols]
            w.writerow(row)
