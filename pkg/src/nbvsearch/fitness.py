"""Visibility and D-optimality fitness of a candidate view against placed views."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .camera import CameraView, jacobians_many
from .mesh import AccelIndex
from .visibility import visibility_vector

DEFAULT_MU = 3.0
DEFAULT_REG = 1e-9


def weights(counts, mu: float = DEFAULT_MU) -> np.ndarray:
    """``(1 - tanh(m - mu)) / 2``: close to 1 for rarely seen vertices, decaying with ``m``."""
    m = np.asarray(counts, dtype=np.float64)
    return (1.0 - np.tanh(m - mu)) / 2.0


def det3(G: np.ndarray) -> np.ndarray:
    """Closed-form determinant of a stack of 3x3 matrices, shape (..., 3, 3)."""
    a, b, c = G[..., 0, 0], G[..., 0, 1], G[..., 0, 2]
    d, e, f = G[..., 1, 0], G[..., 1, 1], G[..., 1, 2]
    g, h, i = G[..., 2, 0], G[..., 2, 1], G[..., 2, 2]
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def outer_information(jac: np.ndarray) -> np.ndarray:
    """``A^T A`` for each stacked 2x3 Jacobian."""
    return np.einsum("nki,nkj->nij", jac, jac)


@dataclass(frozen=True, eq=False)
class FitnessContext:
    """State of the placed views as seen by the fitness functions.

    Attributes
    ----------
    index : AccelIndex
        BVH over the scene mesh, used for every occlusion query.
    vertex_ids : ndarray of int
        Mesh vertices the heuristics are evaluated on (all by default).
    cameras : tuple of CameraView
        Placed views, in commit order.
    counts : ndarray of int
        Number of placed views seeing each evaluated vertex.
    info : ndarray, shape (N, 3, 3)
        Sum of ``A^T A`` over placed views that see each vertex.
    mu, reg : float
        Weight offset and the ridge added before taking determinants.
    """

    index: AccelIndex
    vertex_ids: np.ndarray
    cameras: Tuple[CameraView, ...]
    counts: np.ndarray
    info: np.ndarray
    mu: float = DEFAULT_MU
    reg: float = DEFAULT_REG
    alpha: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.reg < 0:
            raise ValueError("regularizer must be non-negative")
        object.__setattr__(self, "alpha", weights(self.counts, self.mu))

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    @property
    def points(self) -> np.ndarray:
        return self.index.mesh.vertices[self.vertex_ids]


def empty_context(index: AccelIndex, vertex_ids: Optional[np.ndarray] = None,
                  mu: float = DEFAULT_MU, reg: float = DEFAULT_REG) -> FitnessContext:
    if vertex_ids is None:
        vertex_ids = np.arange(index.mesh.n_vertices, dtype=np.int64)
    vertex_ids = np.ascontiguousarray(vertex_ids, dtype=np.int64)
    n = len(vertex_ids)
    return FitnessContext(index, vertex_ids, (), np.zeros(n, dtype=np.int64),
                          np.zeros((n, 3, 3)), mu, reg)


def build_context(index: AccelIndex, cameras: Sequence[CameraView] = (),
                  vertex_ids: Optional[np.ndarray] = None, mu: float = DEFAULT_MU,
                  reg: float = DEFAULT_REG) -> FitnessContext:
    """Context with ``cameras`` committed in order."""
    ctx = empty_context(index, vertex_ids, mu, reg)
    for cam in cameras:
        ctx = commit_view(ctx, cam)
    return ctx


def candidate_visibility(ctx: FitnessContext, cam: CameraView) -> np.ndarray:
    return visibility_vector(ctx.index, cam, ctx.vertex_ids)


def _candidate_information(ctx: FitnessContext, cam: CameraView, w: np.ndarray):
    vis = np.flatnonzero(w)
    return vis, outer_information(jacobians_many(cam, ctx.points[vis]))


def visibility_fitness(ctx: FitnessContext, cam: CameraView, w: Optional[np.ndarray] = None) -> float:
    """Weighted count of vertices the candidate sees."""
    if w is None:
        w = candidate_visibility(ctx, cam)
    return float(ctx.alpha @ w)


def information_matrices(ctx: FitnessContext, cam: Optional[CameraView] = None,
                         w: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-vertex ``G_i (+ A^T A of the candidate where visible) + reg * I``."""
    G = ctx.info.copy()
    if cam is not None:
        if w is None:
            w = candidate_visibility(ctx, cam)
        vis, extra = _candidate_information(ctx, cam, w)
        G[vis] += extra
    G[:, [0, 1, 2], [0, 1, 2]] += ctx.reg
    return G


def information_determinants(ctx: FitnessContext, cam: Optional[CameraView] = None,
                             w: Optional[np.ndarray] = None) -> np.ndarray:
    return det3(information_matrices(ctx, cam, w))


def geometry_fitness(ctx: FitnessContext, cam: CameraView, w: Optional[np.ndarray] = None) -> float:
    """Sum over vertices of ``log det`` of the would-be information matrices.

    Logarithm of the product of per-vertex determinants; the candidate only
    contributes to vertices it can see.
    """
    dets = information_determinants(ctx, cam, w)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(dets > 0, np.log(np.where(dets > 0, dets, 1.0)), -np.inf)
    return float(logs.sum())


def baseline_log_det(ctx: FitnessContext) -> float:
    """Value of :func:`geometry_fitness` without a candidate."""
    dets = information_determinants(ctx)
    with np.errstate(divide="ignore"):
        return float(np.log(dets).sum())


def score_candidate(ctx: FitnessContext, cam: CameraView) -> Tuple[float, float]:
    """Both heuristics from a single visibility pass: ``(J_v, log J_d)``."""
    w = candidate_visibility(ctx, cam)
    return visibility_fitness(ctx, cam, w), geometry_fitness(ctx, cam, w)


def heuristic_function(name: str):
    """Map ``"visibility"`` / ``"geometry"`` to the matching fitness function."""
    try:
        return {"visibility": visibility_fitness, "geometry": geometry_fitness}[name]
    except KeyError:
        raise ValueError(f"unknown heuristic {name!r}; expected 'visibility' or 'geometry'") from None


def commit_view(ctx: FitnessContext, cam: CameraView) -> FitnessContext:
    """New context with ``cam`` appended to the placed views."""
    w = candidate_visibility(ctx, cam)
    counts = ctx.counts + w
    info = ctx.info.copy()
    vis, extra = _candidate_information(ctx, cam, w)
    info[vis] += extra
    return replace(ctx, cameras=ctx.cameras + (cam,), counts=counts, info=info)


TRACE_COLUMNS = ("iteration", "candidate_id", "J_v", "logJ_d")


def write_trace(path, rows) -> None:
    """Fitness trace CSV; ``rows`` are ``(iteration, candidate_id, J_v, logJ_d)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for it, cid, jv, jd in rows:
            w.writerow([it, cid, repr(float(jv)), repr(float(jd))])
