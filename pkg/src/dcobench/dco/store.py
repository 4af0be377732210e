"""Comparator model persistence: a tagged npz container per fitted model.

Payload arrays are per-family; every file carries kind, a format version, and
the fingerprint of the dataset the model was fitted for. Edge-geometry models
additionally pin the adjacency fingerprint of the graph they were built from.
"""

from __future__ import annotations

import os

import numpy as np

from ..data import VectorSet
from .base import Dco, ExactDco
from .geometry import FingerDco, GeoModel
from .projection import ExternalDco, LshDco
from .quant import OpqDco, QuantModel
from .transform import TransformDco, TransformModel

__all__ = ["save_model", "load_model"]

_VERSION = 1


def save_model(dco: Dco, path: str | os.PathLike) -> None:
    payload: dict[str, object] = {
        "kind": dco.name,
        "version": _VERSION,
        "dataset_fingerprint": dco.dataset_fingerprint,
    }
    if isinstance(dco, TransformDco):
        m = dco.model
        payload.update(kind=m.kind, input_dim=m.input_dim, delta_d=m.delta_d,
                       epsilon0=m.epsilon0)
        if m.mean is not None:
            payload["mean"] = m.mean
        if m.rotation is not None:
            payload["rotation"] = m.rotation
        if m.padded_dim is not None:
            payload["padded_dim"] = m.padded_dim
            payload["droppable"] = m.droppable
    elif isinstance(dco, LshDco):
        payload.update(matrix=dco.matrix, p_tau=dco.p_tau)
    elif isinstance(dco, ExternalDco):
        payload.update(embeddings=dco.projected.vectors, alpha=dco.alpha)
        if dco.query_matrix is not None:
            payload["query_matrix"] = dco.query_matrix
        if dco.query_bias is not None:
            payload["query_bias"] = dco.query_bias
        if dco.query_embeddings is not None:
            payload["query_embeddings"] = dco.query_embeddings.vectors
    elif isinstance(dco, OpqDco):
        m = dco.model
        payload.update(m=m.m, ks=m.ks, input_dim=m.input_dim, padded_dim=m.padded_dim,
                       rotation=m.rotation, codebooks=m.codebooks, codes=m.codes,
                       alpha=m.alpha)
    elif isinstance(dco, FingerDco):
        g = dco.model
        payload.update(l_bits=g.l_bits, proj=g.proj, cnorm2=g.cnorm2, pc=g.pc,
                       td=g.td, dres=g.dres, bits=g.bits, alpha=g.alpha,
                       adjacency_fingerprint=g.adjacency_fingerprint)
    elif isinstance(dco, ExactDco):
        pass
    else:
        raise TypeError(f"cannot serialize comparator of type {type(dco).__name__}")
    np.savez_compressed(os.fspath(path), **payload)


def load_model(path: str | os.PathLike, dataset: VectorSet, index=None) -> Dco:
    """Rebuild a comparator from file, bound to `dataset` (and `index` for edge geometry)."""
    with np.load(os.fspath(path), allow_pickle=False) as z:
        kind = str(z["kind"])
        version = int(z["version"])
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")
        fp = int(z["dataset_fingerprint"])
        if fp != dataset.fingerprint():
            raise ValueError(f"{path}: model was fitted for a different dataset")
        if kind == "exact":
            return ExactDco(dataset)
        if kind in ("pca", "dwt", "ads"):
            model = TransformModel(
                kind=kind,
                input_dim=int(z["input_dim"]),
                delta_d=int(z["delta_d"]),
                epsilon0=float(z["epsilon0"]),
                mean=z["mean"] if "mean" in z else None,
                rotation=z["rotation"] if "rotation" in z else None,
                padded_dim=int(z["padded_dim"]) if "padded_dim" in z else None,
                droppable=z["droppable"] if "droppable" in z else None,
            )
            return TransformDco(model, dataset)
        if kind == "lsh":
            return LshDco(dataset, z["matrix"], float(z["p_tau"]))
        if kind == "external":
            qemb = VectorSet(z["query_embeddings"]) if "query_embeddings" in z else None
            return ExternalDco(
                dataset,
                VectorSet(z["embeddings"]),
                float(z["alpha"]),
                query_matrix=z["query_matrix"] if "query_matrix" in z else None,
                query_bias=z["query_bias"] if "query_bias" in z else None,
                query_embeddings=qemb,
            )
        if kind == "opq":
            model = QuantModel(
                m=int(z["m"]),
                ks=int(z["ks"]),
                input_dim=int(z["input_dim"]),
                padded_dim=int(z["padded_dim"]),
                rotation=z["rotation"],
                codebooks=z["codebooks"],
                codes=z["codes"],
                alpha=float(z["alpha"]),
            )
            return OpqDco(model, dataset)
        if kind == "finger":
            if index is None:
                raise ValueError(f"{path}: edge-geometry models need the graph index to load")
            l_bits = int(z["l_bits"])
            model = GeoModel(
                l_bits=l_bits,
                proj=z["proj"],
                cnorm2=z["cnorm2"],
                pc=z["pc"],
                td=z["td"],
                dres=z["dres"],
                bits=z["bits"],
                alpha=float(z["alpha"]),
                adjacency_fingerprint=int(z["adjacency_fingerprint"]),
                cos_table=np.cos(np.pi * np.arange(l_bits + 1) / l_bits),
            )
            return FingerDco(model, dataset, index)
    raise ValueError(f"{path}: unknown comparator kind {kind!r}")
