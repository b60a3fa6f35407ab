import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlvar.domain import build_mesh
from nlvar.errors import DomainError, SingularPair
from nlvar.kernel import Cell, assemble_weights, far_moment, pair_weight
from nlvar.oracle import far_moment_oracle, quad_weight_oracle


def test_adjacent_unit_cells():
    assert pair_weight(Cell(0, 1), Cell(1, 2), 0.5) == pytest.approx(8 - 4 * math.sqrt(2), rel=1e-12)


def test_distant_unit_cells():
    expected = 8 * math.sqrt(10) - 12 - 4 * math.sqrt(11)
    assert pair_weight(Cell(0, 1), Cell(10, 11), 0.5) == pytest.approx(expected, rel=1e-9)


def test_same_cell_is_singular():
    with pytest.raises(SingularPair):
        pair_weight(Cell(0, 1), Cell(0, 1), 0.5)


def test_overlap_is_singular():
    with pytest.raises(SingularPair):
        pair_weight(Cell(0, 1), Cell(0.5, 2), 0.3)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
def test_alpha_range(alpha):
    with pytest.raises(DomainError):
        pair_weight(Cell(0, 1), Cell(2, 3), alpha)


def test_far_moment_values():
    assert far_moment(Cell(0, 1), 2.0, "right", 0.5) == pytest.approx(4 * (math.sqrt(2) - 1), rel=1e-12)
    assert far_moment(Cell(0, 1), 1.0, "right", 0.5) == pytest.approx(4.0, rel=1e-12)
    assert far_moment(Cell(0, 1), math.inf, "right", 0.5) == 0.0
    assert far_moment(Cell(0, 1), -1.0, "left", 0.5) == pytest.approx(4 * (math.sqrt(2) - 1), rel=1e-12)


def test_far_moment_bad_side():
    with pytest.raises(DomainError):
        far_moment(Cell(0, 1), 2.0, "up", 0.5)
    with pytest.raises(DomainError):
        far_moment(Cell(0, 1), 0.5, "right", 0.5)


def test_two_cell_mesh_table():
    w = assemble_weights(build_mesh((0, 2), 2, 0, 0, far_field=False), 0.5)
    assert w.pair_weights[0, 1] == pytest.approx(8 - 4 * math.sqrt(2), rel=1e-12)
    assert np.all(w.far_moments == 0)


def test_table_symmetric_and_positive():
    w = assemble_weights(build_mesh((0, 1), 8, 0.5, 4), 0.5)
    P = w.pair_weights
    assert np.array_equal(P, P.T)
    off = P[~np.eye(P.shape[0], dtype=bool)]
    assert np.all(off > 0)
    assert np.all(w.far_moments > 0)


def test_table_read_only():
    w = assemble_weights(build_mesh((0, 1), 4), 0.4)
    with pytest.raises(ValueError):
        w.pair_weights[0, 1] = 1.0


cells = st.tuples(st.floats(-3, 3), st.floats(0.01, 2.0))


@settings(max_examples=40, deadline=None)
@given(cells, st.floats(0.0, 3.0), st.floats(0.01, 2.0), st.floats(0.05, 0.95))
def test_closed_form_matches_quadrature(a, gap, wb, alpha):
    A = Cell(a[0], a[0] + a[1])
    B = Cell(A.hi + gap, A.hi + gap + wb)
    assert pair_weight(A, B, alpha) == pytest.approx(quad_weight_oracle(A, B, alpha), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(cells, st.floats(0.0, 3.0), st.floats(0.01, 2.0), st.floats(0.05, 0.95), st.floats(0.1, 0.9))
def test_additivity(a, gap, wb, alpha, t):
    A = Cell(a[0], a[0] + a[1])
    B = Cell(A.hi + gap, A.hi + gap + wb)
    mid = B.lo + t * wb
    split = pair_weight(A, Cell(B.lo, mid), alpha) + pair_weight(A, Cell(mid, B.hi), alpha)
    assert split == pytest.approx(pair_weight(A, B, alpha), rel=1e-11)


@settings(max_examples=30, deadline=None)
@given(cells, st.floats(0.0, 5.0), st.floats(0.05, 0.95))
def test_far_moment_matches_quadrature(c, gap, alpha):
    C = Cell(c[0], c[0] + c[1])
    edge = C.hi + gap
    assert far_moment(C, edge, "right", alpha) == pytest.approx(far_moment_oracle(C, edge, "right", alpha),
                                                                 rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(cells, st.floats(0.0, 3.0), st.floats(0.05, 0.95))
def test_swap_symmetry(a, gap, alpha):
    A = Cell(a[0], a[0] + a[1])
    B = Cell(A.hi + gap, A.hi + gap + 0.5)
    assert pair_weight(A, B, alpha) == pair_weight(B, A, alpha)
