"""Coordinate-batch construction for sub-domain optimization sweeps.

Three strategies order the coordinates handed to the per-batch optimizer:
fresh random subsets, a chunked random permutation, and a local-contrast
ordering (descending 8-neighborhood intensity variance). Block orderings for
coarse lifted levels rank blocks by the variance of neighboring block means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lifting import LiftingOperator
from .oracle import InputTensor

STRATEGIES = ("random", "ordered", "variance")

_NEIGHBOR_OFFSETS = [
    (di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)
]


@dataclass
class SamplingPlan:
    """One sweep worth of coordinate batches."""

    batches: list[np.ndarray]
    strategy: str
    n: int
    b: int
    # variance plans must be rebuilt against the current perturbed image
    # after every full sweep
    recompute_on_image: bool = False


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _check_sizes(n: int, b: int) -> None:
    if n < 1:
        raise ValueError("dimension must be positive")
    if b < 1:
        raise ValueError("batch size must be positive")
    if b > n:
        raise ValueError(f"batch size {b} exceeds dimension {n}")


def _chunk(order: np.ndarray, b: int) -> list[np.ndarray]:
    return [order[i : i + b] for i in range(0, order.size, b)]


def random_plan(n: int, b: int, seed) -> SamplingPlan:
    """ceil(n/b) independent uniformly random b-subsets (one sweep's worth)."""
    _check_sizes(n, b)
    rng = _rng(seed)
    k = math.ceil(n / b)
    batches = [np.sort(rng.choice(n, size=b, replace=False)) for _ in range(k)]
    return SamplingPlan(batches, "random", n, b)


def ordered_plan(n: int, b: int, seed) -> SamplingPlan:
    """A random permutation chunked into disjoint batches covering 0..n-1.

    Pass a Generator (not an int) to draw a fresh permutation per sweep.
    """
    _check_sizes(n, b)
    rng = _rng(seed)
    batches = [np.sort(chunk) for chunk in _chunk(rng.permutation(n), b)]
    return SamplingPlan(batches, "ordered", n, b)


def _population_variance(values: list[float]) -> float:
    # fsum keeps the result independent of accumulation order, so orderings
    # agree bit-for-bit with any straightforward reimplementation
    k = len(values)
    if k == 0:
        return 0.0
    mean = math.fsum(values) / k
    return math.fsum((v - mean) ** 2 for v in values) / k


def pixel_variance_map(x: InputTensor) -> np.ndarray:
    """Per-pixel population variance of the in-bounds 8-neighborhood.

    Neighbors are taken within the pixel's own channel; the center pixel is
    excluded and border pixels use only the neighbors that exist.
    """
    h, w, c = x.shape
    img = x.data.reshape(h, w, c)
    out = np.zeros(h * w * c)
    for i in range(h):
        for j in range(w):
            coords = [
                (i + di, j + dj)
                for di, dj in _NEIGHBOR_OFFSETS
                if 0 <= i + di < h and 0 <= j + dj < w
            ]
            for ch in range(c):
                vals = [float(img[ni, nj, ch]) for ni, nj in coords]
                out[(i * w + j) * c + ch] = _population_variance(vals)
    return out


def _descending_order(scores: np.ndarray) -> np.ndarray:
    # stable sort on the negated scores: descending score, ties by index
    return np.argsort(-scores, kind="stable")


def variance_plan(x: InputTensor, b: int) -> SamplingPlan:
    """Pixel indices in decreasing local-variance order, chunked into batches."""
    n = x.n
    _check_sizes(n, b)
    order = _descending_order(pixel_variance_map(x))
    return SamplingPlan(_chunk(order, b), "variance", n, b, recompute_on_image=True)


def block_mean_intensities(x: InputTensor, lifting: LiftingOperator) -> np.ndarray:
    """Mean image intensity of each lifted block."""
    means = np.empty(lifting.m)
    for v in range(lifting.m):
        pixels = lifting.pixels_of(v)
        means[v] = math.fsum(float(t) for t in x.data[pixels]) / pixels.size
    return means


def block_variance_order(x: InputTensor, lifting: LiftingOperator) -> np.ndarray:
    """Block indices ranked by the variance of neighboring blocks' mean intensity.

    The neighborhood is the 8-neighborhood on the coarse grid within the same
    channel, center excluded, truncated at the grid border; descending, ties
    by ascending block index.
    """
    gh, gw = lifting.grid_h, lifting.grid_w
    c = lifting.image_shape[2]
    means = block_mean_intensities(x, lifting).reshape(gh, gw, c)
    scores = np.zeros(lifting.m)
    for gi in range(gh):
        for gj in range(gw):
            coords = [
                (gi + di, gj + dj)
                for di, dj in _NEIGHBOR_OFFSETS
                if 0 <= gi + di < gh and 0 <= gj + dj < gw
            ]
            for ch in range(c):
                vals = [float(means[ni, nj, ch]) for ni, nj in coords]
                scores[(gi * gw + gj) * c + ch] = _population_variance(vals)
    return _descending_order(scores)
