"""Triangle meshes, rays and a bounding-volume hierarchy for ray queries."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import _kernels
from .exceptions import EmptyMeshError

_MAX_DEPTH = 60
_LEAF_SIZE = 4


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Vertices (meters, global frame) and triangular faces.

    Faces with repeated indices or zero area are dropped with a warning;
    out-of-range indices and non-finite coordinates raise ``ValueError``.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
    faces : array_like of int, shape (m, 3)
    face_tags : sequence of str, optional
        One label per face, e.g. ``"ground"``, ``"tree"``, ``"target"``.
    """

    vertices: np.ndarray
    faces: np.ndarray
    face_tags: Optional[np.ndarray] = None

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(verts)):
            raise ValueError("vertex coordinates must be finite")
        if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
            raise ValueError("face index out of range")
        tags = None
        if self.face_tags is not None:
            tags = np.asarray(self.face_tags, dtype=object).reshape(-1)
            if len(tags) != len(faces):
                raise ValueError(f"got {len(tags)} face tags for {len(faces)} faces")

        keep = np.ones(len(faces), dtype=bool)
        if len(faces):
            repeated = (
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 0] == faces[:, 2])
            )
            tri = verts[faces]
            area2 = np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
            keep = ~repeated & (area2 > 0.0)
            if not keep.all():
                warnings.warn(f"dropping {int((~keep).sum())} degenerate face(s)", stacklevel=3)
                faces = faces[keep]
                if tags is not None:
                    tags = tags[keep]

        object.__setattr__(self, "vertices", _readonly(verts))
        object.__setattr__(self, "faces", _readonly(faces))
        object.__setattr__(self, "face_tags", None if tags is None else _readonly(tags))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def tag_mask(self, tag: str) -> np.ndarray:
        """Boolean face mask for ``tag`` (all False for untagged meshes)."""
        if self.face_tags is None:
            return np.zeros(self.n_faces, dtype=bool)
        return self.face_tags == tag

    def vertex_tag_mask(self, tag: str) -> np.ndarray:
        """Vertices referenced by at least one face carrying ``tag``."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.faces[self.tag_mask(tag)].ravel()] = True
        return mask

    @classmethod
    def merge(cls, meshes: Sequence["TriangleMesh"], default_tag: str = "") -> "TriangleMesh":
        """Concatenate meshes, offsetting face indices; untagged parts get ``default_tag``."""
        verts, faces, tags = [], [], []
        offset = 0
        for m in meshes:
            verts.append(m.vertices)
            faces.append(m.faces + offset)
            if m.face_tags is None:
                tags.append(np.full(m.n_faces, default_tag, dtype=object))
            else:
                tags.append(m.face_tags)
            offset += m.n_vertices
        if not meshes:
            return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
        return cls(np.concatenate(verts), np.concatenate(faces), np.concatenate(tags))


@dataclass(frozen=True)
class Ray:
    """Ray with unit ``direction`` and parametric range ``(0, t_max]``."""

    origin: np.ndarray
    direction: np.ndarray
    t_max: float = np.inf

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must have unit norm")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "t_max", float(self.t_max))

    @classmethod
    def between(cls, a, b) -> "Ray":
        """Segment ray from ``a`` to ``b`` (``t_max`` is their distance)."""
        a = np.asarray(a, dtype=np.float64)
        delta = np.asarray(b, dtype=np.float64) - a
        dist = float(np.linalg.norm(delta))
        return cls(a, delta / dist, dist)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


class Hit(NamedTuple):
    t: float
    face_id: int
    barycentric: np.ndarray
    point: np.ndarray


@dataclass(frozen=True, eq=False)
class AccelIndex:
    """Flattened mid-point-split BVH over the faces of ``mesh``.

    Each face appears in exactly one leaf. Build with :func:`build_accel`.
    """

    mesh: TriangleMesh
    bmin: np.ndarray
    bmax: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    depth: int = field(default=0)

    @property
    def n_nodes(self) -> int:
        return len(self.left)

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.left < 0))

    def arrays(self):
        """Argument tuple expected by the traversal kernels."""
        return (self.mesh.vertices, self.mesh.faces, self.bmin, self.bmax,
                self.left, self.right, self.start, self.count, self.order)


def build_accel(mesh: TriangleMesh, leaf_size: int = _LEAF_SIZE) -> AccelIndex:
    """Build a BVH by splitting centroid bounds at the midpoint of the longest axis.

    Deterministic for a fixed mesh. Raises :class:`EmptyMeshError` for a mesh
    without faces.
    """
    if mesh.n_faces == 0:
        raise EmptyMeshError("cannot build an index over a mesh with no faces")

    tri = mesh.vertices[mesh.faces]
    fmin = tri.min(axis=1)
    fmax = tri.max(axis=1)
    cent = tri.mean(axis=1)
    pad = 1e-9 * max(1.0, float(np.abs(mesh.vertices).max()))

    bmin, bmax, left, right, start, count = [], [], [], [], [], []
    order: list = []
    max_depth = 0

    def new_node(ids):
        bmin.append(fmin[ids].min(axis=0) - pad)
        bmax.append(fmax[ids].max(axis=0) + pad)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(left) - 1

    # explicit stack of (node, ids, depth); children are allocated before descent
    root = new_node(np.arange(mesh.n_faces))
    stack = [(root, np.arange(mesh.n_faces), 0)]
    while stack:
        node, ids, depth = stack.pop()
        max_depth = max(max_depth, depth)
        c = cent[ids]
        lo = c.min(axis=0)
        hi = c.max(axis=0)
        extent = hi - lo
        axis = int(np.argmax(extent))
        if len(ids) <= leaf_size or depth >= _MAX_DEPTH or extent[axis] <= 0.0:
            start[node] = len(order)
            count[node] = len(ids)
            order.extend(ids.tolist())
            continue
        mid = 0.5 * (lo[axis] + hi[axis])
        mask = c[:, axis] < mid
        if mask.all() or not mask.any():
            srt = ids[np.argsort(c[:, axis], kind="stable")]
            half = len(ids) // 2
            lids, rids = srt[:half], srt[half:]
        else:
            lids, rids = ids[mask], ids[~mask]
        ln = new_node(lids)
        rn = new_node(rids)
        left[node] = ln
        right[node] = rn
        stack.append((rn, rids, depth + 1))
        stack.append((ln, lids, depth + 1))

    return AccelIndex(
        mesh=mesh,
        bmin=_readonly(np.array(bmin, dtype=np.float64)),
        bmax=_readonly(np.array(bmax, dtype=np.float64)),
        left=_readonly(np.array(left, dtype=np.int64)),
        right=_readonly(np.array(right, dtype=np.int64)),
        start=_readonly(np.array(start, dtype=np.int64)),
        count=_readonly(np.array(count, dtype=np.int64)),
        order=_readonly(np.array(order, dtype=np.int64)),
        depth=max_depth,
    )


def _make_hit(ray: Ray, t, f, u, v, w) -> Optional[Hit]:
    if f < 0:
        return None
    return Hit(float(t), int(f), np.array([u, v, w]), ray.at(t))


def intersect_first(index: AccelIndex, ray: Ray) -> Optional[Hit]:
    """Nearest hit with ``0 < t <= ray.t_max``, or ``None``."""
    res = _kernels.bvh_query(ray.origin, ray.direction, 0.0, ray.t_max, True, False, -1,
                             *index.arrays())
    return _make_hit(ray, *res)


def any_hit(index: AccelIndex, ray: Ray, skip_vertex: int = -1) -> bool:
    """Whether any face is met with ``eps < t < t_max - eps``, ``eps = 1e-6 * t_max``.

    Faces incident to ``skip_vertex`` are ignored when it is non-negative.
    """
    eps = _kernels.segment_eps(ray.t_max) if np.isfinite(ray.t_max) else 0.0
    t, *_ = _kernels.bvh_query(ray.origin, ray.direction, eps, ray.t_max - eps, False, True,
                               skip_vertex, *index.arrays())
    return bool(np.isfinite(t))


def brute_force_first(mesh: TriangleMesh, ray: Ray) -> Optional[Hit]:
    """Exhaustive-scan counterpart of :func:`intersect_first` (no index)."""
    res = _kernels.brute_query(ray.origin, ray.direction, 0.0, ray.t_max, True, False, -1,
                               mesh.vertices, mesh.faces)
    return _make_hit(ray, *res)


def brute_force_any(mesh: TriangleMesh, ray: Ray, skip_vertex: int = -1) -> bool:
    """Exhaustive-scan counterpart of :func:`any_hit`."""
    eps = _kernels.segment_eps(ray.t_max) if np.isfinite(ray.t_max) else 0.0
    t, *_ = _kernels.brute_query(ray.origin, ray.direction, eps, ray.t_max - eps, False, True,
                                 skip_vertex, mesh.vertices, mesh.faces)
    return bool(np.isfinite(t))
