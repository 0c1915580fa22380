"""Next-best-view planning for camera search under occlusion."""

from .camera import CameraView, read_cameras, write_cameras
from .dataset import PosedImageRecord, brute_force_nbv, label_report, load_dataset
from .evolution import EvolutionConfig, PoseBounds
from .exceptions import (
    BehindCameraError,
    DatasetSchemaError,
    EmptyMeshError,
    PlacementError,
    UnevaluatedFitnessError,
)
from .experiment import ExperimentConfig, GridSpec, run_batch, run_simulation_experiment
from .fitness import FitnessContext, build_context, commit_view, geometry_fitness, visibility_fitness
from .forest import ForestParams, generate_scene, place_manikins
from .io import read_obj, write_obj
from .mesh import AccelIndex, Ray, TriangleMesh, any_hit, build_accel, intersect_first
from .planner import BruteForceViewSelector, NextBestViewPlanner
from .visibility import coverage_counts, visibility_vector

__version__ = "0.1.0"

__all__ = [
    "AccelIndex", "BehindCameraError", "BruteForceViewSelector", "CameraView", "DatasetSchemaError",
    "EmptyMeshError", "EvolutionConfig", "ExperimentConfig", "FitnessContext", "ForestParams",
    "GridSpec", "NextBestViewPlanner", "PlacementError", "PoseBounds", "PosedImageRecord", "Ray",
    "TriangleMesh", "UnevaluatedFitnessError", "any_hit", "brute_force_nbv", "build_accel",
    "build_context", "commit_view", "coverage_counts", "generate_scene", "geometry_fitness", "intersect_first",
    "label_report", "load_dataset", "place_manikins", "read_cameras", "read_obj", "run_batch",
    "run_simulation_experiment", "visibility_fitness", "visibility_vector", "write_cameras", "write_obj",
]
