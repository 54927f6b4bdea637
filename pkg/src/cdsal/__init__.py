"""Evaluation toolkit for compressed-domain visual saliency models.

Modules: :mod:`core` (geometry, map primitives), :mod:`ingest` (file
formats), :mod:`models`, :mod:`metrics`, :mod:`centerbias`, :mod:`stats`,
:mod:`synth`, plus the :mod:`pipeline` driver and :mod:`cli` front-end.
"""
__version__ = "0.1.0"

from .core import (SFU_GEOMETRY, FrameFeatures, FrameType, GazePoint, GroundTruthMap,
                   MotionVector, Viewing, ViewingGeometry, diem_geometry, gaussian_blob,
                   minmax_normalize, pixels_per_degree, upsample_block_map)
from .errors import (ConfigError, DegenerateInputError, DimensionError, FitError, GeometryError,
                     ParameterError, ParseError, SaliencyError, SamplingError, StructuralError)

__all__ = [
    "SFU_GEOMETRY", "FrameFeatures", "FrameType", "GazePoint", "GroundTruthMap", "MotionVector",
    "Viewing", "ViewingGeometry", "diem_geometry", "gaussian_blob", "minmax_normalize",
    "pixels_per_degree", "upsample_block_map", "ConfigError", "DegenerateInputError",
    "DimensionError", "FitError", "GeometryError", "ParameterError", "ParseError",
    "SaliencyError", "SamplingError", "StructuralError",
]
