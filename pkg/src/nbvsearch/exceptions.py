class EmptyMeshError(ValueError):
    """Raised when an index is requested for a mesh without faces."""


class BehindCameraError(ValueError):
    """Raised when a point is at or behind the camera near plane."""


class UnevaluatedFitnessError(RuntimeError):
    """Raised when selection meets an individual without a fitness value."""


class PlacementError(RuntimeError):
    """Raised when rejection sampling cannot place an object."""


class DatasetSchemaError(ValueError):
    """Raised for malformed pose/dataset files; the message names the line."""
