"""Grid-graph view of an image: 8-neighbor adjacency as a fixed stencil.

Vertices are pixels in row-major order (index = row * width + col). The
adjacency is never materialized as a matrix; it is the set of offsets at
Chebyshev distance 1, clipped at the image border. Per-vertex degrees carry
the +1 self term, so interior vertices have degree 9, border vertices 6,
and corners 4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# (drow, dcol) offsets of the 8-neighborhood, fixed order.
NEIGHBOR_OFFSETS: tuple[tuple[int, int], ...] = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)


@dataclass(frozen=True)
class GridGraph:
    """Immutable stencil graph of a width x height pixel grid."""

    width: int
    height: int
    degrees: np.ndarray = field(repr=False)  # (vertex_count,) float64, 1 + neighbor count

    @property
    def vertex_count(self) -> int:
        return self.width * self.height

    def neighbors(self, index: int) -> np.ndarray:
        """Indices of the vertices at Chebyshev distance 1 from `index`."""
        if not 0 <= index < self.vertex_count:
            raise IndexError(f"vertex index {index} out of range")
        row, col = divmod(index, self.width)
        out = []
        for dr, dc in NEIGHBOR_OFFSETS:
            r, c = row + dr, col + dc
            if 0 <= r < self.height and 0 <= c < self.width:
                out.append(r * self.width + c)
        return np.asarray(out, dtype=np.int64)


def neighbor_counts(width: int, height: int) -> np.ndarray:
    """Number of in-grid 8-neighbors per pixel, shape (height, width)."""
    counts = np.zeros((height, width), dtype=np.int64)
    for dr, dc in NEIGHBOR_OFFSETS:
        dst_r = slice(max(0, -dr), height - max(0, dr))
        dst_c = slice(max(0, -dc), width - max(0, dc))
        counts[dst_r, dst_c] += 1
    return counts


def build_grid_graph(width: int, height: int) -> GridGraph:
    """Build the 8-neighbor grid graph with self-loop-augmented degrees."""
    if width < 2 or height < 2:
        raise ValueError(f"grid must be at least 2x2, got {width}x{height}")
    degrees = 1.0 + neighbor_counts(width, height).astype(np.float64)
    degrees.setflags(write=False)
    return GridGraph(width=width, height=height, degrees=degrees.ravel())


def image_to_vertices(image: np.ndarray, graph: GridGraph) -> np.ndarray:
    """Flatten an image to the (vertex_count, channels) feature table.

    Accepts (height, width) or (height, width, channels) arrays; row i of the
    result is pixel (row, col) with i = row * width + col.
    """
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim != 3 or image.shape[0] != graph.height or image.shape[1] != graph.width:
        raise ValueError(
            f"image shape {image.shape} does not match {graph.height}x{graph.width} grid"
        )
    return image.reshape(graph.vertex_count, image.shape[2])


def vertices_to_image(values: np.ndarray, graph: GridGraph) -> np.ndarray:
    """Inverse of image_to_vertices; returns (height, width, channels)."""
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != graph.vertex_count:
        raise ValueError(
            f"{values.shape[0]} rows do not match {graph.vertex_count} vertices"
        )
    return values.reshape(graph.height, graph.width, values.shape[1])


def quarter_turn_indices(side: int, quarter_turns: int) -> np.ndarray:
    """Source-index permutation realizing an exact k*90-degree rotation.

    For a flattened side x side image, `rotated = flat[perm]`. The rotation
    convention matches `rotation.rotate`: the output pixel at (row, col)
    pulls from (side-1-col, row) for a single quarter turn.
    """
    k = quarter_turns % 4
    identity = np.arange(side * side, dtype=np.int64)
    if k == 0:
        return identity
    rows, cols = np.divmod(identity, side)
    single = (side - 1 - cols) * side + rows
    perm = identity
    for _ in range(k):
        perm = single[perm]
    return perm


def rotation_permutation(graph: GridGraph, quarter_turns: int) -> np.ndarray:
    """Vertex permutation for a rigid k*90-degree rotation of a square grid."""
    if graph.width != graph.height:
        raise ValueError(
            f"quarter-turn permutation needs a square grid, got {graph.width}x{graph.height}"
        )
    return quarter_turn_indices(graph.width, quarter_turns)
