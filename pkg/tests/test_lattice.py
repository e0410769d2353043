import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penaltystop.lattice import (
    Label,
    RegionGrid,
    StateGrid,
    TimeGrid,
    below,
    build_region,
    classify,
    everywhere,
    interval,
)


def grid(lo, hi, dx):
    return StateGrid.uniform(lo, hi, dx)


def test_classify_halfline_truncated():
    g = grid(-4.0, 2.0, 0.5)
    region = build_region(g, below(1.0))
    assert classify(region, g.index_of(-3.0)) is Label.INTERIOR
    assert classify(region, g.index_of(1.0)) is Label.BOUNDARY
    assert classify(region, g.index_of(1.5)) is Label.EXTERIOR


def test_classify_rejects_bad_index():
    region = build_region(grid(0, 1, 0.25), below(0.6))
    with pytest.raises(IndexError):
        classify(region, 5)


def test_predicate_below_one():
    g = grid(0.0, 2.0, 0.1)
    region = build_region(g, below(1.0))
    x = g.points
    assert np.all(region.interior == (x < 1 - 1e-9))
    assert np.flatnonzero(region.boundary).tolist() == [g.index_of(1.0)]
    assert np.all(region.exterior == (x > 1 + 1e-9))


def test_everywhere_warns_no_exterior():
    with pytest.warns(UserWarning, match="no exterior: exit time infinite"):
        region = build_region(grid(0, 1, 0.5), everywhere())
    assert region.interior.all()


def test_two_sided_interval_has_two_boundary_points():
    region = build_region(grid(-1.0, 2.0, 0.25), interval(0.0, 1.0))
    assert region.counts()[Label.BOUNDARY] == 2


def test_empty_interior_rejected():
    with pytest.raises(ValueError):
        build_region(grid(0, 1, 0.5), lambda x: False)


def test_adjacent_interior_points():
    region = build_region(grid(-1.0, 2.0, 0.25), interval(0.0, 1.0))
    x = region.grid.points[region.boundary_adjacent_interior()]
    assert np.allclose(x, [0.25, 0.75])


@pytest.mark.parametrize("pts", [[0.0], [0.0, 0.0, 1.0], [1.0, 0.0], [0.0, 1.0, 3.0]])
def test_state_grid_validation(pts):
    with pytest.raises(ValueError):
        StateGrid(np.array(pts))


def test_time_grid():
    tg = TimeGrid.bounded(1.0, 0.25)
    assert tg.slices == 4 and tg.horizon == pytest.approx(1.0)
    assert np.allclose(tg.times(), [0, 0.25, 0.5, 0.75, 1.0])
    assert TimeGrid(h=0.1).unbounded
    with pytest.raises(ValueError):
        TimeGrid.bounded(1.0, 0.3)
    with pytest.raises(ValueError):
        TimeGrid(h=0.0)


def test_region_is_read_only():
    region = build_region(grid(0, 1, 0.25), below(0.6))
    with pytest.raises(ValueError):
        region.labels[0] = 2


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), min_size=2, max_size=40).filter(any))
def test_partition_and_idempotence(mask):
    g = StateGrid(np.arange(len(mask), dtype=float))
    pred = lambda x: mask[int(x)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        region = build_region(g, pred)
        again = build_region(g, lambda x: bool(region.interior[int(x)]))
    assert sum(region.counts().values()) == g.size
    assert np.array_equal(region.labels, again.labels)
    inside = np.asarray(mask)
    for i, lab in enumerate(region.labels):
        near = inside[max(i - 1, 0):i + 2].any()
        if lab == Label.BOUNDARY:
            assert not inside[i] and near
        if lab == Label.EXTERIOR:
            assert not near


def test_region_grid_requires_interior():
    g = StateGrid(np.arange(3.0))
    with pytest.raises(ValueError):
        RegionGrid(g, np.full(3, Label.EXTERIOR))
