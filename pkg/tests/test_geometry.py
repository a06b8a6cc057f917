import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqftlab.geometry import (
    GridConfig,
    GridError,
    Region,
    build_grid,
    bump,
    causal_future,
    causal_past,
    later_than,
    lapse_profile,
    spacelike_separated,
    support_of,
    time_separated,
)

TWO_PI = 2 * np.pi


def test_grid_spacings(grid):
    assert grid.shape == (32, 32)
    assert grid.dt == pytest.approx(TWO_PI / 32)
    assert grid.dx == pytest.approx(TWO_PI / 32)
    assert np.all(grid.weights > 0)


def test_dt_above_dx_names_field():
    with pytest.raises(GridError, match="Nt"):
        build_grid(GridConfig(8, 32, TWO_PI, TWO_PI))


def test_odd_nx_rejected():
    with pytest.raises(GridError):
        build_grid(GridConfig(32, 31, TWO_PI, TWO_PI))


def test_missing_field_is_reported():
    with pytest.raises(GridError, match="Nx"):
        GridConfig.from_dict({"Nt": 4, "T": 1.0, "L": 1.0})


def test_config_round_trip(tmp_path):
    cfg = GridConfig(16, 16, 1.0, 2.0, mass=0.5, lapse_kind="cosine", lapse_params=(1.0, 0.2))
    path = tmp_path / "grid.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert GridConfig.from_json(path) == cfg


def test_lapse_positive():
    x = np.linspace(0, TWO_PI, 16, endpoint=False)
    assert np.all(lapse_profile("constant", (1.0,), x, TWO_PI) == 1.0)


def test_light_cone_of_point_is_exact(grid):
    p = Region.from_points(grid, [(10, 16)])
    fut = causal_future(grid, p)
    for n in range(10, 20):
        assert fut.mask[n].sum() == 2 * (n - 10) + 1
    assert not fut.mask[:10].any()
    assert (fut & causal_past(grid, p)) == p


def test_cone_wraps_periodically(grid):
    fut = causal_future(grid, Region.from_points(grid, [(0, 0)]))
    assert fut.mask[3, 31] and fut.mask[3, 3] and not fut.mask[3, 4]


def test_spacelike_and_time_ordering(grid):
    a = Region.slab(grid, 14, 17, 2, 4)
    b = Region.slab(grid, 14, 17, 18, 20)
    c = Region.slab(grid, 25, 27, 2, 4)
    assert spacelike_separated(grid, a, b)
    assert not spacelike_separated(grid, a, c)
    assert time_separated(c, a) and not time_separated(a, c)
    assert later_than(grid, c, a)


def test_empty_region_rejected(grid):
    with pytest.raises(GridError):
        causal_future(grid, Region(np.zeros(grid.shape, bool)))


def test_bump_is_compact(grid):
    f = bump(grid, np.pi, np.pi, 0.5, 0.5)
    s = support_of(f)
    assert 0 < len(s) < grid.size // 4
    assert f.max() == pytest.approx(1.0, abs=0.05)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(0, 31), j=st.integers(0, 31), cells=st.integers(0, 3))
def test_future_is_monotone(grid, n, j, cells):
    r = Region.from_points(grid, [(n, j)])
    assert causal_future(grid, r) <= causal_future(grid, r.dilate(cells))


@settings(max_examples=30, deadline=None)
@given(n1=st.integers(0, 31), j1=st.integers(0, 31), n2=st.integers(0, 31), j2=st.integers(0, 31))
def test_spacelike_is_symmetric(grid, n1, j1, n2, j2):
    a = Region.from_points(grid, [(n1, j1)])
    b = Region.from_points(grid, [(n2, j2)])
    assert spacelike_separated(grid, a, b) == spacelike_separated(grid, b, a)
