"""Synthetic dataset generators for tests, demos, and desk-scale benchmark runs."""

from __future__ import annotations

import numpy as np

from .data import VectorSet

__all__ = [
    "gaussian_isotropic",
    "gaussian_correlated",
    "uniform_cube",
    "line_embedded",
]


def gaussian_isotropic(count: int, dim: int, seed: int = 0) -> VectorSet:
    rng = np.random.default_rng(seed)
    return VectorSet(rng.standard_normal((count, dim)).astype(np.float32))


def gaussian_correlated(count: int, dim: int, condition_number: float = 100.0,
                        seed: int = 0) -> VectorSet:
    """Zero-mean Gaussian whose covariance spectrum decays geometrically.

    condition_number is the ratio of the largest to smallest covariance eigenvalue,
    so per-axis standard deviations span a sqrt(condition_number) range. Axes are
    mixed by a random rotation so the correlation is not axis-aligned.
    """
    rng = np.random.default_rng(seed)
    stds = np.sqrt(np.geomspace(condition_number, 1.0, dim))
    z = rng.standard_normal((count, dim)) * stds
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q *= np.sign(np.diag(r))
    return VectorSet((z @ q.T).astype(np.float32))


def uniform_cube(count: int, dim: int, seed: int = 0) -> VectorSet:
    rng = np.random.default_rng(seed)
    return VectorSet(rng.random((count, dim)).astype(np.float32))


def line_embedded(count: int, dim: int, seed: int = 0, noise: float = 0.0) -> VectorSet:
    """Points on a 1-D segment embedded in R^dim, optionally with isotropic jitter."""
    rng = np.random.default_rng(seed)
    t = rng.random(count)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    pts = np.outer(t, direction)
    if noise > 0:
        pts += noise * rng.standard_normal((count, dim))
    return VectorSet(pts.astype(np.float32))
