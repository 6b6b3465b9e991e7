"""Square pixel grids over a box in the plane, boolean masks and their
connected components."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InvalidArgument

# 4-connectivity
_FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class Grid:
    """``resolution`` x ``resolution`` cells covering [lo, hi] (complex corners).
    Row index runs along the imaginary axis."""
    lo: complex
    hi: complex
    resolution: int

    @classmethod
    def square(cls, center, half_width, resolution):
        h = complex(half_width, half_width)
        return cls(complex(center) - h, complex(center) + h, int(resolution))

    @property
    def cell(self):
        return (self.hi.real - self.lo.real) / self.resolution

    def centers(self):
        n = self.resolution
        xs = self.lo.real + (np.arange(n) + 0.5) * (self.hi.real - self.lo.real) / n
        ys = self.lo.imag + (np.arange(n) + 0.5) * (self.hi.imag - self.lo.imag) / n
        return xs[None, :] + 1j * ys[:, None]

    def index_of(self, z):
        """(row, col) of the cell containing z, or None when outside."""
        n = self.resolution
        col = int(np.floor((z.real - self.lo.real) / (self.hi.real - self.lo.real) * n))
        row = int(np.floor((z.imag - self.lo.imag) / (self.hi.imag - self.lo.imag) * n))
        if 0 <= row < n and 0 <= col < n:
            return row, col
        return None

    def to_json(self):
        return {"lo": [self.lo.real, self.lo.imag], "hi": [self.hi.real, self.hi.imag],
                "resolution": self.resolution}


@dataclass(frozen=True, eq=False)
class GridMask:
    grid: Grid
    mask: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.grid.resolution, self.grid.resolution):
            raise InvalidArgument("mask shape does not match grid resolution")
        object.__setattr__(self, "mask", m)

    @property
    def resolution(self):
        return self.grid.resolution

    @property
    def area_cells(self):
        return int(self.mask.sum())

    @property
    def area(self):
        return self.area_cells * self.grid.cell ** 2

    def boundary_cells(self):
        """Cells of the mask with a 4-neighbour outside it (or on the grid edge)."""
        inner = ndimage.binary_erosion(self.mask, _FOUR, border_value=0)
        return np.argwhere(self.mask & ~inner)

    def contains_point(self, z):
        ij = self.grid.index_of(z)
        return ij is not None and bool(self.mask[ij])

    def touches_edge(self):
        m = self.mask
        return bool(m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any())

    def subset_of(self, other):
        _same_grid(self, other)
        return bool(np.all(~self.mask | other.mask))

    def disjoint_from(self, other):
        _same_grid(self, other)
        return not bool(np.any(self.mask & other.mask))

    def gap_to_complement(self, other):
        """Chebyshev cell distance from this mask to the outside of ``other``
        (0 when they touch).  Used for compact-containment certificates."""
        _same_grid(self, other)
        if not self.mask.any():
            return np.inf
        dist = ndimage.distance_transform_cdt(np.pad(other.mask, 1), metric="chessboard")[1:-1, 1:-1]
        return int(dist[self.mask].min()) - 1

    def with_mask(self, mask, **meta):
        return GridMask(self.grid, mask, {**self.meta, **meta})


def _same_grid(a, b):
    if a.grid != b.grid:
        raise InvalidArgument("masks live on different grids")


def component_at(mask, cell):
    """The 4-connected component of ``mask`` containing ``cell`` (row, col)."""
    if cell is None or not mask[cell]:
        return None
    lab, _ = ndimage.label(mask, structure=_FOUR)
    return lab == lab[cell]


def count_components(mask):
    return ndimage.label(mask, structure=_FOUR)[1]


def fill_holes(mask):
    return ndimage.binary_fill_holes(mask)


def disk_mask(grid, center, radius):
    return np.abs(grid.centers() - center) < radius


def save_png(path, image, overlays=(), grid=None, title=None):
    """Write an array (bool or float) as a PNG, optionally with polyline
    overlays given in plane coordinates."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 6), dpi=100)
    extent = None
    if grid is not None:
        extent = (grid.lo.real, grid.hi.real, grid.lo.imag, grid.hi.imag)
    ax.imshow(np.asarray(image, dtype=float), origin="lower", extent=extent,
              cmap="magma", interpolation="nearest")
    for line in overlays:
        line = np.asarray(line)
        ax.plot(line.real, line.imag, lw=0.8, color="cyan")
    if title:
        ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
