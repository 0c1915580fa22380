"""Input coercion shared by the estimator and the CLI."""

from __future__ import annotations

from typing import List, Sequence

import numpy as np

from .camera import CameraView
from .evolution import PoseBounds
from .mesh import TriangleMesh


def check_mesh(mesh) -> TriangleMesh:
    """Accept a :class:`TriangleMesh` or a ``(vertices, faces)`` pair."""
    if isinstance(mesh, TriangleMesh):
        return mesh
    try:
        vertices, faces = mesh
    except (TypeError, ValueError):
        raise TypeError("mesh must be a TriangleMesh or a (vertices, faces) pair") from None
    return TriangleMesh(vertices, faces)


def check_cameras(cameras, focal: float = 1.0, hfov_deg: float = 84.0,
                  vfov_deg: float = 62.0) -> List[CameraView]:
    """Accept CameraView objects or an ``(n, 5)`` array of ``(x, y, z, pitch, yaw)`` genomes."""
    if cameras is None:
        return []
    if isinstance(cameras, np.ndarray):
        arr = np.atleast_2d(np.asarray(cameras, dtype=np.float64))
        if arr.size == 0:
            return []
        if arr.shape[1] != 5:
            raise ValueError(f"pose array must have 5 columns, got {arr.shape[1]}")
        return [CameraView.from_fov(g[:3], g[3], g[4], focal, hfov_deg, vfov_deg) for g in arr]
    out = list(cameras)
    for c in out:
        if not isinstance(c, CameraView):
            raise TypeError(f"expected CameraView, got {type(c).__name__}")
    return out


def check_bounds(bounds, mesh: TriangleMesh, margin: float = 5.0,
                 z_range: Sequence[float] = (2.0, 30.0)) -> PoseBounds:
    """Explicit bounds, or the mesh footprint grown by ``margin`` with z above its lowest point."""
    if isinstance(bounds, PoseBounds):
        return bounds
    if bounds is not None:
        lo, hi = bounds
        return PoseBounds(lo, hi)
    vmin = mesh.vertices.min(axis=0)
    vmax = mesh.vertices.max(axis=0)
    b = PoseBounds.around_extent(vmax[0] - vmin[0], vmax[1] - vmin[1], margin, tuple(z_range))
    shift = np.array([vmin[0], vmin[1], vmin[2], 0.0, 0.0])
    return PoseBounds(b.lower + shift, b.upper + shift)
