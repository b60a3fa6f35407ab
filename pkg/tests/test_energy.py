import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlvar.domain import ExteriorData, Field, build_mesh, constant_field
from nlvar.energy import (apriori_check, coarea_energy, embedding_check, energy, energy_breakdown, renormalized_diff,
                          seminorm, tail_report, tail_sup_check)
from nlvar.errors import AlphaMismatch, ExteriorMismatch
from nlvar.kernel import assemble_weights
from nlvar.asymptotics import bolas_profile
from nlvar.solver_smooth import solve_p

from conftest import random_field


def test_constant_has_zero_energy():
    m = build_mesh((0, 1), 4, 0.5, 2)
    b = energy_breakdown(constant_field(m, 3.0), 0.4, 1.5, assemble_weights(m, 0.6))
    assert b.total == b.interior_term == b.cross_term == b.far_term == 0.0


def test_step_checkpoint(step_field, step_mesh):
    b = energy_breakdown(step_field, 0.5, 1.0, assemble_weights(step_mesh, 0.5))
    assert b.total == pytest.approx(4.0, abs=1e-12)
    assert b.interior_term == pytest.approx(4 * (math.sqrt(2) - 1), abs=1e-12)
    assert b.cross_term + b.far_term == pytest.approx(8 - 4 * math.sqrt(2), abs=1e-12)


def test_step_seminorm(step_field, step_mesh):
    assert seminorm(step_field, 0.5, 1.0, assemble_weights(step_mesh, 0.5)) == pytest.approx(8 * (math.sqrt(2) - 1),
                                                                                          abs=1e-12)


def test_wrong_table_rejected(step_field, step_mesh):
    with pytest.raises(AlphaMismatch):
        energy(step_field, 0.5, 1.5, assemble_weights(step_mesh, 0.5))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.sampled_from([1.0, 1.3, 1.8]))
def test_homogeneity(seed, lam, p):
    m = build_mesh((0, 1), 6, 0.5, 3)
    rng = np.random.default_rng(seed)
    u = random_field(m, rng)
    w = assemble_weights(m, 0.5 * p)
    assert energy(u.scaled(lam), 0.5, p, w) == pytest.approx(abs(lam) ** p * energy(u, 0.5, p, w), rel=1e-10,
                                                             abs=1e-14)


def test_triangle_inequality(rng):
    m = build_mesh((0, 1), 8, 0.5, 4)
    for p in (1.0, 1.5):
        w = assemble_weights(m, 0.4 * p)
        for _ in range(100):
            u, v = random_field(m, rng, -1, 1), random_field(m, rng, -1, 1)
            uv = Field(m, u.interior_values + v.interior_values, u.exterior)
            assert seminorm(uv, 0.4, p, w) <= seminorm(u, 0.4, p, w) + seminorm(v, 0.4, p, w) + 1e-12


def test_tail_examples():
    m = build_mesh((0, 1), 8, 0.0, 0)
    assert np.all(tail_report(ExteriorData.zero(m), 0.5, 1.0, m).values == 0)
    assert tail_report(ExteriorData.constant(m, 1.0), 0.5, 1.0, m).l1_norm == pytest.approx(8.0, rel=1e-12)


def test_tail_sup_conditions():
    m = build_mesh((0, 1), 8, 0.5, 4)
    for phi in (ExteriorData.zero(m), ExteriorData.constant(m, 2.0)):
        rep = tail_sup_check(phi, 0.3, 2.5, [1.5, 2.0], mesh=m)
        assert rep.cond_i and rep.cond_ii and rep.cond_iii
    rep = tail_sup_check(bolas_profile(0.4, 4.0), 0.4, 2.0, [1.5])
    assert not rep.cond_iii


def test_embedding_examples(step_field, step_mesh):
    s, sigma, p = 0.5, 0.25, 1.5
    w_sp, w_sig = assemble_weights(step_mesh, s * p), assemble_weights(step_mesh, sigma)
    assert embedding_check(constant_field(step_mesh, 1.0), s, sigma, p, w_sp, w_sig).holds
    rep = embedding_check(step_field, s, sigma, p, w_sp, w_sig)
    assert rep.holds and rep.lhs > 0


def test_apriori_examples(rng):
    m = build_mesh((0, 1), 8, 0.5, 4)
    zero = ExteriorData.zero(m)
    u = solve_p(m, zero, 0.4, 1.5)
    assert np.all(u.interior_values == 0) and apriori_check(u, zero, 0.4, 1.5).holds
    one = ExteriorData.constant(m, 1.0)
    rep = apriori_check(solve_p(m, one, 0.4, 1.5), one, 0.4, 1.5)
    assert rep.holds and rep.lhs == pytest.approx(1.0, abs=1e-9)
    for p in (1.5, 1.1, 1.01):
        phi = ExteriorData(rng.uniform(-1, 1, m.n_window), (0.3, -0.2))
        assert apriori_check(solve_p(m, phi, 0.4, p), phi, 0.4, p).holds


def test_renormalized_identity(rng):
    m = build_mesh((0, 1), 6, 0.5, 3)
    w = assemble_weights(m, 0.5)
    u = random_field(m, rng)
    v = u.with_interior(rng.uniform(0, 1, 6))
    assert renormalized_diff(u, u, 0.5, w) == 0.0
    assert renormalized_diff(u, v, 0.5, w) == pytest.approx(2 * (energy(u, 0.5, 1, w) - energy(v, 0.5, 1, w)),
                                                             abs=1e-12)
    other = Field(m, v.interior_values, ExteriorData.zero(m))
    with pytest.raises(ExteriorMismatch):
        renormalized_diff(u, other, 0.5, w)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_coarea(seed):
    m = build_mesh((0, 1), 6, 0.5, 3)
    rng = np.random.default_rng(seed)
    u = random_field(m, rng, -2, 2)
    w = assemble_weights(m, 0.3)
    assert coarea_energy(u, 0.3, w) == pytest.approx(energy(u, 0.3, 1.0, w), rel=1e-12, abs=1e-14)
