"""No-reference quality assessment for colored 3D point clouds and meshes."""

from .model_io import (ColoredMesh, ColoredPointCloud, load_model, parse_obj,
                       parse_ply, write_ply)
from .nss import ExtractionConfig, QualityFeatureVector, assemble_features
from .regression import SvrModel, predict, train_svr

__all__ = [
    "ColoredMesh",
    "ColoredPointCloud",
    "ExtractionConfig",
    "QualityFeatureVector",
    "SvrModel",
    "assemble_features",
    "load_model",
    "parse_obj",
    "parse_ply",
    "predict",
    "train_svr",
    "write_ply",
]

__version__ = "0.1.0"
