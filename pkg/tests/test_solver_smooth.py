import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlvar.domain import ExteriorData, Field, build_mesh, constant_field
from nlvar.energy import energy
from nlvar.errors import DomainError
from nlvar.kernel import assemble_weights
from nlvar.oracle import dense_min_oracle, fd_gradient_oracle
from nlvar.solver_smooth import SolveOptions, plap_apply, solve_p, solve_p_detailed

from conftest import random_field


def test_constant_has_zero_gradient():
    m = build_mesh((0, 1), 6, 0.5, 3)
    assert np.all(plap_apply(constant_field(m, 2.0), 0.3, 1.7, assemble_weights(m, 0.51)) == 0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_gradient_matches_finite_differences(p, rng):
    m = build_mesh((0, 1), 12, 0.5, 6)
    w = assemble_weights(m, 0.3 * p)
    for _ in range(5):
        u = random_field(m, rng)
        g, fd = plap_apply(u, 0.3, p, w), fd_gradient_oracle(u, 0.3, p, w)
        assert np.max(np.abs(g - fd)) <= 1e-6 * np.max(np.abs(g))


def test_mirror_antisymmetry(rng):
    m = build_mesh((0, 1), 8, 0.5, 4)
    u = random_field(m, rng)
    v = u.cell_values[m.mirror()]
    um = Field(m, v[m.interior], ExteriorData(v[m.window_index], u.exterior.far_field[::-1]))
    w = assemble_weights(m, 0.45)
    g, gm = plap_apply(u, 0.3, 1.5, w), plap_apply(um, 0.3, 1.5, w)
    assert np.allclose(gm, g[::-1], atol=1e-13)


def test_constant_data_gives_constant():
    m = build_mesh((0, 1), 8, 0.5, 4)
    r = solve_p_detailed(m, ExteriorData.constant(m, 0.7), 0.4, 1.8)
    assert np.allclose(r.field.interior_values, 0.7, atol=1e-12)
    assert r.energy == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("p", [1.1, 1.5, 2.5])
def test_initial_guess_independent(p, rng):
    m = build_mesh((0, 1), 10, 0.5, 5)
    phi = ExteriorData(rng.uniform(0, 1, m.n_window), (0.2, 0.9))
    a = solve_p(m, phi, 0.35, p, SolveOptions(init="zero"))
    b = solve_p(m, phi, 0.35, p, SolveOptions(init="supplied", u0=rng.uniform(0, 1, 10)))
    assert np.max(np.abs(a.interior_values - b.interior_values)) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1.05, 1.3, 2.0, 2.4]))
def test_maximum_principle(seed, p):
    m = build_mesh((0, 1), 8, 0.5, 4)
    rng = np.random.default_rng(seed)
    phi = ExteriorData(rng.uniform(0, 1, m.n_window), tuple(rng.uniform(0, 1, 2)))
    u = solve_p(m, phi, 0.4, p).interior_values
    assert u.min() >= 0.0 and u.max() <= 1.0


@pytest.mark.parametrize("p", [1.5, 2.0])
def test_matches_dense_oracle(p, rng):
    m = build_mesh((0, 1), 8, 0.5, 4)
    phi = ExteriorData(rng.uniform(-1, 1, m.n_window), (0.4, -0.3))
    w = assemble_weights(m, 0.3 * p)
    u = solve_p(m, phi, 0.3, p, w=w)
    ref = dense_min_oracle(m, phi, 0.3, p, w)
    assert energy(u, 0.3, p, w) == pytest.approx(ref.value, rel=1e-9)


def test_domain_errors():
    m = build_mesh((0, 1), 4)
    with pytest.raises(DomainError):
        solve_p(m, ExteriorData.zero(m), 0.5, 1.0)
    with pytest.raises(DomainError):
        solve_p(m, ExteriorData.zero(m), 0.5, 2.0)
    with pytest.raises(DomainError):
        SolveOptions(init="supplied")
