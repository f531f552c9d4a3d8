"""Automatic grid layout for camera tiles.

Tile width divides the horizontally usable screen area among the shown
cameras, capped at `max_columns` per row; overflow wraps to new rows.
Placements pack densely by position in the given sequence, so a sparse
camera set (say, camera 2 alone) still fills the grid from the top left.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyCameraSet

DEFAULT_ADJUST = 0.9
DEFAULT_ADJUST_W_H = 0.75
DEFAULT_MAX_COLUMNS = 3


@dataclass(frozen=True)
class LayoutParams:
    screen_width: int
    adjust: float = DEFAULT_ADJUST
    adjust_w_h: float = DEFAULT_ADJUST_W_H
    max_columns: int = DEFAULT_MAX_COLUMNS

    def __post_init__(self):
        if self.screen_width < 1:
            raise ValueError("screen_width must be >= 1")
        if not 0 < self.adjust <= 1:
            raise ValueError("adjust must be in (0, 1]")
        if self.adjust_w_h <= 0:
            raise ValueError("adjust_w_h must be positive")
        if self.max_columns < 1:
            raise ValueError("max_columns must be >= 1")


@dataclass(frozen=True)
class GridLayout:
    tile_width: int
    tile_height: int
    placements: tuple[tuple[int, int, int], ...]  # (camera_index, row, col)
    rows: int


def compute_layout(camera_indices, params: LayoutParams) -> GridLayout:
    """Compute tile geometry and (row, col) placement for each camera.

    `camera_indices` must be non-empty and strictly ascending; row/col
    are assigned by position in the sequence, not by camera ID.
    """
    indices = list(camera_indices)
    if not indices:
        raise EmptyCameraSet("no cameras to lay out")
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise ValueError("camera_indices must be strictly ascending")
    n = len(indices)
    cols = min(n, params.max_columns)
    tile_width = int((params.screen_width * params.adjust) / cols)
    tile_height = int(tile_width * params.adjust_w_h)
    placements = tuple(
        (camera, i // params.max_columns, i % params.max_columns)
        for i, camera in enumerate(indices)
    )
    rows = -(-n // params.max_columns)
    return GridLayout(tile_width=tile_width, tile_height=tile_height,
                      placements=placements, rows=rows)


def scroll_extent(layout: GridLayout, viewport_height: int,
                  tile_chrome_height: int) -> int:
    """Pixels of content below the viewport; 0 when everything fits."""
    if viewport_height <= 0:
        raise ValueError("viewport_height must be positive")
    content = layout.rows * (layout.tile_height + tile_chrome_height)
    return max(0, content - viewport_height)
