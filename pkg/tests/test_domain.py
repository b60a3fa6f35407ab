import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlvar.domain import (CellSet, ExteriorData, Field, Mesh, build_mesh, constant_field, indicator_field,
                          level_set, truncate_field, window_mesh)
from nlvar.errors import ShapeMismatch, SpecError


def test_build_mesh_counts():
    m = build_mesh((0, 1), 4, 1.0, 4)
    assert m.n_cells == 12
    assert m.h == 0.25
    assert np.allclose(np.diff(m.cell_edges), 0.25)


def test_zero_cells_rejected():
    with pytest.raises(SpecError):
        build_mesh((0, 1), 0, 0, 0)


def test_single_cell():
    m = build_mesh((0, 1), 1, 0, 0)
    assert m.n_cells == 1 and m.n_window == 0


def test_window_width_must_match():
    with pytest.raises(SpecError):
        build_mesh((0, 1), 4, 1.0, 3)


def test_window_mesh_helper():
    m = window_mesh((0, 1), 16, 4)
    assert m.window_halfwidth == pytest.approx(0.25)


def test_mesh_json_round_trip():
    m = build_mesh((0, 2), 8, 0.5, 2)
    assert Mesh.from_json(m.to_json()) == m


def test_exterior_shape_checked():
    m = build_mesh((0, 1), 4, 0.5, 2)
    with pytest.raises((ShapeMismatch, SpecError)):
        Field(m, np.zeros(4), ExteriorData(np.zeros(3), (0.0, 0.0)))


def test_truncate_examples():
    m = build_mesh((0, 1), 4, 0.5, 2)
    u = Field(m, [-1, 0.5, 1, 0], ExteriorData([0, 1, -1, 0.2], (0.0, 1.0)))
    assert np.array_equal(truncate_field(u, 2).cell_values, u.cell_values)
    five = constant_field(m, 5.0)
    assert np.all(truncate_field(five, 3).cell_values == 3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6), st.floats(0, 5))
def test_truncation_contracts_differences(vals, M):
    m = build_mesh((0, 1), 4, 0.25, 1)
    u = Field(m, vals[:4], ExteriorData(vals[4:], (0.0, 0.0)))
    a, b = u.cell_values, truncate_field(u, M).cell_values
    assert np.all(np.abs(b[:, None] - b[None, :]) <= np.abs(a[:, None] - a[None, :]) + 1e-15)


def test_indicator_examples():
    m = build_mesh((0, 1), 4, 0.5, 2)
    full = CellSet(m, np.ones(4, bool), np.ones(4, bool), (True, True))
    empty = CellSet(m, np.zeros(4, bool), np.zeros(4, bool), (False, False))
    assert np.all(indicator_field(full).cell_values == 1)
    assert np.all(indicator_field(empty).cell_values == 0)
    E = CellSet(m, np.array([1, 0, 1, 0], bool), np.array([0, 1, 1, 0], bool), (True, False))
    assert np.array_equal(indicator_field(E.complement()).cell_values, 1 - indicator_field(E).cell_values)


def test_level_set_includes_trace():
    m = build_mesh((0, 1), 2, 0.5, 1)
    u = Field(m, [0.2, 0.8], ExteriorData([0.0, 1.0], (0.0, 1.0)))
    E = level_set(u, 0.5)
    assert E.interior.tolist() == [False, True]
    assert E.window.tolist() == [False, True]
    assert E.far == (False, True)
