"""Hierarchical block liftings from coarse grids to pixel space.

A lifting assigns every pixel to exactly one coarse-grid block within its
channel; applying it broadcasts one coefficient per block onto that block's
pixels. Levels refine by doubling the grid per axis until the grid equals
the image and the lifting is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LiftingOperator:
    """Sparse 0/1 lifting stored as a pixel-to-block assignment map."""

    level: int
    grid_h: int
    grid_w: int
    image_shape: tuple[int, int, int]
    assignment: np.ndarray  # (n,) block index owning each pixel
    # CSR-style view: pixel indices sorted by block, plus block start offsets
    pixel_order: np.ndarray = field(repr=False)
    block_starts: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.grid_h * self.grid_w * self.image_shape[2]

    @property
    def n(self) -> int:
        h, w, c = self.image_shape
        return h * w * c

    @property
    def is_pixel_level(self) -> bool:
        return (self.grid_h, self.grid_w) == self.image_shape[:2]

    def pixels_of(self, block: int) -> np.ndarray:
        """Pixel indices owned by one block."""
        return self.pixel_order[self.block_starts[block] : self.block_starts[block + 1]]


def _band_sizes(extent: int, bands: int) -> np.ndarray:
    # floor-sized bands with the remainder absorbed at the trailing edge
    base, extra = divmod(extent, bands)
    return np.array([base] * (bands - extra) + [base + 1] * extra)


def build_block_lifting(
    image_shape: tuple[int, int, int], grid_h: int, grid_w: int, level: int = 1
) -> LiftingOperator:
    """Partition an image into a grid of contiguous per-channel blocks.

    Rows split into ``grid_h`` bands of size floor(h/grid_h) or one more
    (larger bands at the trailing edge), columns likewise; every (band,
    column band, channel) triple is one block.
    """
    h, w, c = image_shape
    if not 1 <= grid_h <= h or not 1 <= grid_w <= w:
        raise ValueError(f"grid ({grid_h}, {grid_w}) exceeds image dims ({h}, {w})")
    row_band = np.repeat(np.arange(grid_h), _band_sizes(h, grid_h))
    col_band = np.repeat(np.arange(grid_w), _band_sizes(w, grid_w))
    block_2d = row_band[:, None] * grid_w + col_band[None, :]
    assignment = (block_2d[:, :, None] * c + np.arange(c)).ravel()
    order = np.argsort(assignment, kind="stable")
    starts = np.searchsorted(assignment[order], np.arange(grid_h * grid_w * c + 1))
    return LiftingOperator(level, grid_h, grid_w, (h, w, c), assignment, order, starts)


def apply_lifting(op: LiftingOperator, coeffs: np.ndarray) -> np.ndarray:
    """Broadcast one coefficient per block onto its pixels (length-n vector)."""
    coeffs = np.asarray(coeffs, dtype=np.float64).ravel()
    if coeffs.size != op.m:
        raise ValueError(f"expected {op.m} coefficients, got {coeffs.size}")
    return coeffs[op.assignment]


def refine_level(current: LiftingOperator, image_shape: tuple[int, int, int]) -> LiftingOperator:
    """Double the grid per axis, capping at the image dims (pixel identity)."""
    h, w, _ = image_shape
    if current.is_pixel_level:
        raise ValueError("already at pixel resolution; no finer level exists")
    return build_block_lifting(
        image_shape,
        min(2 * current.grid_h, h),
        min(2 * current.grid_w, w),
        level=current.level + 1,
    )


def reproject(x_plus_eta: np.ndarray, l: float, u: float) -> np.ndarray:
    """Clamp a perturbed image back into the valid pixel range; idempotent."""
    return np.clip(x_plus_eta, l, u)
