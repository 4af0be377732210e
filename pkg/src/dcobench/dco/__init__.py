"""Distance comparison operators: the pluggable admission test of the beam search."""

from .base import PRUNED, CompareOutcome, Dco, ExactDco, QueryContext, SearchStats
from .geometry import FingerDco, GeoModel, fit_finger
from .projection import ExternalDco, LshDco, chi2_quantile, load_external_projection
from .quant import OpqDco, QuantModel, encode, fit_opq, kmeans, reconstruct
from .store import load_model, save_model
from .transform import (
    TransformDco,
    TransformModel,
    apply_transform,
    fit_ads,
    fit_dwt,
    fit_pca,
    invert_transform,
)

__all__ = [
    "PRUNED",
    "CompareOutcome",
    "Dco",
    "ExactDco",
    "QueryContext",
    "SearchStats",
    "TransformDco",
    "TransformModel",
    "apply_transform",
    "invert_transform",
    "fit_pca",
    "fit_dwt",
    "fit_ads",
    "LshDco",
    "ExternalDco",
    "chi2_quantile",
    "load_external_projection",
    "OpqDco",
    "QuantModel",
    "kmeans",
    "fit_opq",
    "encode",
    "reconstruct",
    "FingerDco",
    "GeoModel",
    "fit_finger",
    "save_model",
    "load_model",
]
