import numpy as np
import pytest

from yoccoz.errors import InvalidArgument
from yoccoz.raster import Grid, GridMask, component_at, count_components, disk_mask


def test_grid_index_round_trip():
    g = Grid.square(1 + 1j, 2.0, 64)
    z = g.centers()[10, 20]
    assert g.index_of(z) == (10, 20)
    assert g.index_of(100j) is None


def test_component_is_four_connected():
    m = np.zeros((5, 5), bool)
    m[1, 1] = m[2, 2] = True            # diagonal neighbours only
    assert component_at(m, (1, 1)).sum() == 1
    assert count_components(m) == 2
    assert component_at(m, (0, 0)) is None


def test_gap_to_complement():
    g = Grid.square(0, 1.0, 40)
    outer = GridMask(g, disk_mask(g, 0, 0.9))
    # chessboard distance: the diagonal gap 0.4 / sqrt(2) spans five whole cells
    assert GridMask(g, disk_mask(g, 0, 0.5)).gap_to_complement(outer) == 5
    assert outer.gap_to_complement(outer) == 0


def test_shape_checked():
    with pytest.raises(InvalidArgument):
        GridMask(Grid.square(0, 1.0, 16), np.zeros((8, 8), bool))
