import math

import numpy as np
import pytest

from nlvar.domain import CellSet, ExteriorData, build_mesh, constant_field, indicator_field
from nlvar.errors import SingularPair, TooLarge
from nlvar.kernel import Cell, assemble_weights
from nlvar.oracle import dense_min_oracle, far_moment_oracle, fd_gradient_oracle, quad_weight_oracle
from nlvar.perimeter import min_set_bruteforce
from nlvar.solver_one import solve_one
from nlvar.energy import energy
from nlvar.solver_smooth import plap_apply

from conftest import random_field


def test_quadrature_values():
    assert quad_weight_oracle(Cell(0, 1), Cell(1, 2), 0.5) == pytest.approx(8 - 4 * math.sqrt(2), rel=1e-10)
    assert far_moment_oracle(Cell(0, 1), 2.0, "right", 0.5) == pytest.approx(4 * (math.sqrt(2) - 1), rel=1e-10)
    assert far_moment_oracle(Cell(0, 1), 1.0, "right", 0.5) == pytest.approx(4.0, rel=1e-10)


def test_quadrature_overlap():
    with pytest.raises(SingularPair):
        quad_weight_oracle(Cell(0, 1), Cell(0.5, 1.5), 0.5)


def test_quadrature_symmetric():
    a, b = Cell(0, 0.3), Cell(0.7, 2.0)
    assert quad_weight_oracle(a, b, 0.3) == pytest.approx(quad_weight_oracle(b, a, 0.3), rel=1e-12)


def test_fd_constant_is_zero():
    m = build_mesh((0, 1), 4, 0.5, 2)
    assert np.allclose(fd_gradient_oracle(constant_field(m, 1.0), 0.3, 2.0, assemble_weights(m, 0.6)), 0)


def test_fd_matches_plap_and_is_linear_at_p2(rng):
    m = build_mesh((0, 1), 8, 0.5, 4)
    w = assemble_weights(m, 0.6)
    u = random_field(m, rng)
    g = plap_apply(u, 0.3, 2.0, w)
    a, b = fd_gradient_oracle(u, 0.3, 2.0, w, 1e-6), fd_gradient_oracle(u, 0.3, 2.0, w, 1e-4)
    assert np.max(np.abs(a - g)) <= 1e-6 * np.max(np.abs(g))
    assert np.max(np.abs(a - b)) <= 1e-9


def test_dense_constant():
    m = build_mesh((0, 1), 6, 0.5, 3)
    for p in (1.0, 1.5):
        r = dense_min_oracle(m, ExteriorData.constant(m, 0.4), 0.4, p)
        assert r.value == pytest.approx(0.0, abs=1e-14)
        assert np.allclose(r.field.interior_values, 0.4, atol=1e-7)


def test_dense_agrees_with_solve_one(rng):
    m = build_mesh((0, 1), 10, 0.5, 5)
    w = assemble_weights(m, 0.5)
    for _ in range(5):
        phi = ExteriorData(rng.uniform(-1, 1, m.n_window), tuple(rng.uniform(-1, 1, 2)))
        u, _ = solve_one(m, phi, 0.5, w=w)
        assert dense_min_oracle(m, phi, 0.5, 1.0, w).value == pytest.approx(energy(u, 0.5, 1.0, w), abs=1e-8)


def test_dense_indicator_equals_bruteforce():
    m = build_mesh((0, 1), 8, 0.5, 4)
    trace = CellSet(m, np.zeros(8, bool), np.array([1, 1, 0, 0, 0, 1, 1, 0], bool), (False, True))
    phi = indicator_field(trace).exterior
    w = assemble_weights(m, 0.5)
    assert dense_min_oracle(m, phi, 0.5, 1.0, w).value == pytest.approx(
        min_set_bruteforce(m, trace, 0.5, w).min_value, abs=1e-12)


def test_dense_refuses_large():
    m = build_mesh((0, 1), 17)
    with pytest.raises(TooLarge):
        dense_min_oracle(m, ExteriorData.zero(m), 0.5, 1.0)
