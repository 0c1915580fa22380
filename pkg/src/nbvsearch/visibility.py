"""Per-vertex visibility of a mesh from one or many cameras."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .camera import Z_NEAR, CameraView
from .mesh import AccelIndex


@dataclass(frozen=True, eq=False)
class VisibilityRecord:
    """Binary visibility matrix (vertices x cameras) and its row sums."""

    matrix: np.ndarray
    counts: np.ndarray

    @property
    def n_cameras(self) -> int:
        return self.matrix.shape[1]


def _vertex_ids(index: AccelIndex, vertex_ids) -> np.ndarray:
    if vertex_ids is None:
        return np.arange(index.mesh.n_vertices, dtype=np.int64)
    return np.ascontiguousarray(vertex_ids, dtype=np.int64)


def visibility_vector(index: AccelIndex, cam: CameraView,
                      vertex_ids: Optional[np.ndarray] = None) -> np.ndarray:
    """Binary vector: 1 where a vertex projects into the image and its sight line is clear.

    The sight line runs from the camera centre to the vertex; hits closer than
    ``1e-6 * distance`` to either end and faces incident to the vertex are
    ignored.
    """
    ids = _vertex_ids(index, vertex_ids)
    pts = np.ascontiguousarray(index.mesh.vertices[ids])
    return _kernels.visibility_kernel(pts, ids, cam.position, cam.rotation, cam.f,
                                      cam.half_width, cam.half_height, Z_NEAR, *index.arrays())


def points_visible(index: AccelIndex, cam: CameraView, points) -> np.ndarray:
    """Visibility of arbitrary points (no incident-face exclusion)."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    ids = np.full(len(pts), -1, dtype=np.int64)
    return _kernels.visibility_kernel(pts, ids, cam.position, cam.rotation, cam.f,
                                      cam.half_width, cam.half_height, Z_NEAR, *index.arrays())


def visibility_matrix(index: AccelIndex, cams: Sequence[CameraView],
                      vertex_ids: Optional[np.ndarray] = None) -> VisibilityRecord:
    ids = _vertex_ids(index, vertex_ids)
    M = np.zeros((len(ids), len(cams)), dtype=np.uint8)
    for k, cam in enumerate(cams):
        M[:, k] = visibility_vector(index, cam, ids)
    return VisibilityRecord(M, M.sum(axis=1, dtype=np.int64))


def coverage_counts(index: AccelIndex, cams: Sequence[CameraView]) -> np.ndarray:
    """Number of cameras seeing each mesh vertex."""
    counts = np.zeros(index.mesh.n_vertices, dtype=np.int64)
    for cam in cams:
        counts += visibility_vector(index, cam)
    return counts


def coverage_export(mesh, counts, path) -> None:
    """Write ``mesh`` as PLY with ``counts`` in the vertex ``quality`` property."""
    from .io import write_ply

    counts = np.asarray(counts)
    if len(counts) != mesh.n_vertices:
        raise ValueError(f"{len(counts)} counts for {mesh.n_vertices} vertices")
    write_ply(path, mesh, quality=counts)
