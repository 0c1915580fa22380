"""Estimator-style front end: fit plans views on a mesh, transform scores candidates."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import evolution
from ._validation import check_bounds, check_cameras, check_mesh
from .camera import DEFAULT_HFOV_DEG, DEFAULT_VFOV_DEG, CameraView
from .dataset import PosedImageRecord, brute_force_nbv
from .evolution import EvolutionConfig
from .fitness import (
    DEFAULT_MU,
    DEFAULT_REG,
    build_context,
    commit_view,
    heuristic_function,
    score_candidate,
)
from .mesh import build_accel


class NextBestViewPlanner(BaseEstimator):
    """Plan ``n_views`` successive views by evolutionary search.

    Parameters
    ----------
    heuristic : {"visibility", "geometry"}
    n_views : int
        Views to add after the initial cameras.
    population, generations, crossover_rate, mutation_rate, tournament_size, sigma_fraction
        Evolutionary search settings.
    bounds : PoseBounds or (lower, upper), optional
        Pose limits. Defaults to the mesh footprint plus ``margin``, heights
        ``z_range`` above the lowest vertex, pitch in ``[-pi/2, 0]``.
    focal, hfov_deg, vfov_deg : float
        Intrinsics of the planned views.
    mu, reg : float
        Weight offset and determinant ridge.
    random_state : int, optional

    Attributes
    ----------
    views_ : list of CameraView
        Planned views in order.
    context_ : FitnessContext
        Context after committing the initial and planned views.
    history_ : list of list of GenerationStats
        EA convergence per planned view.
    fitness_trace_ : ndarray, shape (n_views, 2)
        ``(J_v, log J_d)`` of each planned view at the time it was chosen.
    """

    def __init__(self, heuristic: str = "visibility", n_views: int = 20, population: int = 50,
                 generations: int = 20, crossover_rate: float = 0.8, mutation_rate: float = 0.2,
                 tournament_size: int = 3, sigma_fraction: float = 0.05, bounds=None,
                 margin: float = 5.0, z_range=(2.0, 30.0), focal: float = 1.0,
                 hfov_deg: float = DEFAULT_HFOV_DEG, vfov_deg: float = DEFAULT_VFOV_DEG,
                 mu: float = DEFAULT_MU, reg: float = DEFAULT_REG,
                 random_state: Optional[int] = None):
        self.heuristic = heuristic
        self.n_views = n_views
        self.population = population
        self.generations = generations
        self.crossover_rate = crossover_rate
        self.mutation_rate = mutation_rate
        self.tournament_size = tournament_size
        self.sigma_fraction = sigma_fraction
        self.bounds = bounds
        self.margin = margin
        self.z_range = z_range
        self.focal = focal
        self.hfov_deg = hfov_deg
        self.vfov_deg = vfov_deg
        self.mu = mu
        self.reg = reg
        self.random_state = random_state

    def _camera(self, genome) -> CameraView:
        return CameraView.from_fov(genome[:3], genome[3], genome[4], self.focal, self.hfov_deg, self.vfov_deg)

    def fit(self, mesh, cameras=None, vertex_ids=None):
        """Commit ``cameras`` then plan ``n_views`` further views."""
        fit = heuristic_function(self.heuristic)
        if self.n_views < 0:
            raise ValueError("n_views must be non-negative")
        mesh = check_mesh(mesh)
        cams = check_cameras(cameras, self.focal, self.hfov_deg, self.vfov_deg)
        self.bounds_ = check_bounds(self.bounds, mesh, self.margin, self.z_range)
        self.index_ = build_accel(mesh)
        ctx = build_context(self.index_, cams, vertex_ids, self.mu, self.reg)
        evo = EvolutionConfig(self.population, self.generations, self.crossover_rate,
                              self.mutation_rate, self.tournament_size, self.sigma_fraction)
        root = np.random.SeedSequence(self.random_state)
        self.views_, self.history_, trace = [], [], []
        for k in range(self.n_views):
            evo.seed = [root.entropy, k]
            res = evolution.run(lambda g: fit(ctx, self._camera(g)), self.bounds_, evo)
            cam = self._camera(res.best.genome)
            trace.append(score_candidate(ctx, cam))
            ctx = commit_view(ctx, cam)
            self.views_.append(cam)
            self.history_.append(res.history)
        self.context_ = ctx
        self.fitness_trace_ = np.array(trace, dtype=np.float64).reshape(-1, 2)
        self.n_initial_ = len(cams)
        return self

    def transform(self, cameras) -> np.ndarray:
        """``(J_v, log J_d)`` of each candidate against the fitted context."""
        check_is_fitted(self, "context_")
        cams = check_cameras(cameras, self.focal, self.hfov_deg, self.vfov_deg)
        return np.array([score_candidate(self.context_, c) for c in cams], dtype=np.float64).reshape(-1, 2)

    def score_views(self, cameras) -> np.ndarray:
        """Score of each candidate under the configured heuristic."""
        return self.transform(cameras)[:, 0 if self.heuristic == "visibility" else 1]


class BruteForceViewSelector(BaseEstimator):
    """Greedy selection of ``n_views`` from a fixed candidate set.

    Attributes
    ----------
    selected_ids_ : list of str
    fitness_ : ndarray
        Heuristic value of each selection when it was made.
    context_ : FitnessContext
    """

    def __init__(self, heuristic: str = "visibility", n_views: int = 20,
                 mu: float = DEFAULT_MU, reg: float = DEFAULT_REG):
        self.heuristic = heuristic
        self.n_views = n_views
        self.mu = mu
        self.reg = reg

    def fit(self, mesh, candidates, initial=None, vertex_ids=None):
        """``candidates`` are PosedImageRecords or CameraViews (ids become their positions)."""
        heuristic_function(self.heuristic)
        mesh = check_mesh(mesh)
        recs = [c if isinstance(c, PosedImageRecord) else PosedImageRecord(str(i), c)
                for i, c in enumerate(check_cameras(candidates) if isinstance(candidates, np.ndarray)
                                      else candidates)]
        index = build_accel(mesh)
        ctx = build_context(index, check_cameras(initial), vertex_ids, self.mu, self.reg)
        sel = brute_force_nbv(ctx, recs, self.heuristic, self.n_views)
        self.selected_ids_ = sel.ids
        self.fitness_ = np.array(sel.fitness)
        self.context_ = sel.context
        return self
