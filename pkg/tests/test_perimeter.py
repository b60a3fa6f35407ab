import numpy as np
import pytest

from nlvar.domain import CellSet, ExteriorData, Field, build_mesh, constant_field, indicator_field
from nlvar.energy import energy
from nlvar.errors import DomainError, TooLarge
from nlvar.kernel import assemble_weights
from nlvar.perimeter import (frac_perimeter, level_set_check, min_set_bruteforce, perimeter_table,
                             regularity_report)
from nlvar.certificate import all_binary
from nlvar.solver_one import solve_one


def _empty(m):
    return CellSet(m, np.zeros(m.n_interior, bool), np.zeros(m.n_window, bool), (False, False))


def test_empty_set():
    m = build_mesh((0, 1), 4, 0.5, 2)
    assert frac_perimeter(_empty(m), 0.5, assemble_weights(m, 0.5)) == 0.0


def test_interval_with_empty_trace():
    m = build_mesh((0, 1), 4, 0.5, 2)
    E = CellSet(m, np.ones(4, bool), np.zeros(4, bool), (False, False))
    assert frac_perimeter(E, 0.5, assemble_weights(m, 0.5)) == pytest.approx(8.0, abs=1e-12)


def test_complement_invariance(rng):
    m = build_mesh((0, 1), 6, 0.5, 3)
    w = assemble_weights(m, 0.3)
    for _ in range(20):
        E = CellSet(m, rng.random(6) < 0.5, rng.random(6) < 0.5, (bool(rng.random() < 0.5), False))
        assert frac_perimeter(E, 0.3, w) == pytest.approx(frac_perimeter(E.complement(), 0.3, w), abs=1e-13)


def test_table_matches_direct_sums(rng):
    m = build_mesh((0, 1), 6, 0.5, 3)
    w = assemble_weights(m, 0.4)
    win, far = rng.random(6) < 0.5, (True, False)
    flags = all_binary(6)
    table = perimeter_table(m, win, far, 0.4, w, flags)
    direct = [frac_perimeter(CellSet(m, f, win, far), 0.4, w) for f in flags]
    assert np.allclose(table, direct, atol=1e-12)


def test_bruteforce_empty_trace():
    m = build_mesh((0, 1), 6, 0.5, 3)
    res = min_set_bruteforce(m, _empty(m), 0.5)
    assert res.min_value == 0.0
    assert any(not E.interior.any() for E in res.minimizers)


def test_bruteforce_mirror_closed():
    m = build_mesh((0, 1), 6, 0.5, 3)
    win = np.array([1, 0, 0, 0, 0, 1], bool)
    res = min_set_bruteforce(m, CellSet(m, np.zeros(6, bool), win, (True, True)), 0.5)
    found = {tuple(E.interior) for E in res.minimizers}
    assert {t[::-1] for t in found} == found


def test_bruteforce_right_window_vs_solver():
    m = build_mesh((0, 1), 8, 0.5, 4)
    win = np.r_[np.zeros(4, bool), np.ones(4, bool)]
    trace = CellSet(m, np.zeros(8, bool), win, (False, False))
    w = assemble_weights(m, 0.5)
    u, _ = solve_one(m, indicator_field(trace).exterior, 0.5, w=w)
    assert min_set_bruteforce(m, trace, 0.5, w).min_value == pytest.approx(energy(u, 0.5, 1.0, w), abs=1e-8)


def test_bruteforce_refuses_large():
    m = build_mesh((0, 1), 21)
    with pytest.raises(TooLarge):
        min_set_bruteforce(m, _empty(m), 0.5)


def test_level_sets_constant_and_indicator():
    m = build_mesh((0, 1), 6, 0.5, 3)
    w = assemble_weights(m, 0.5)
    assert level_set_check(constant_field(m, 2.0), 0.5, w).passed
    E = CellSet(m, np.zeros(6, bool), np.zeros(6, bool), (False, False))
    rep = level_set_check(indicator_field(E), 0.5, w)
    assert rep.passed


def test_level_sets_random(rng):
    m = build_mesh((0, 1), 8, 0.5, 4)
    w = assemble_weights(m, 0.5)
    for _ in range(3):
        phi = ExteriorData(rng.uniform(0, 1, m.n_window), tuple(rng.uniform(0, 1, 2)))
        u, _ = solve_one(m, phi, 0.5, w=w)
        assert level_set_check(u, 0.5, w).passed


def test_regularity_examples():
    m = build_mesh((0, 1), 8, 0.5, 4)
    pos = Field(m, np.linspace(0.1, 1, 8), ExteriorData.zero(m))
    assert regularity_report(pos, (0.25, 0.75)).inf_bound_ratio == 0.0
    c = regularity_report(constant_field(m, 3.0), (0.25, 0.75))
    assert c.bv_ratio == 0.0 and c.sup_bound_ratio > 0
    with pytest.raises(DomainError):
        regularity_report(pos, (0.0, 0.5))
    with pytest.raises(DomainError):
        regularity_report(pos, (0.3, 0.75))
