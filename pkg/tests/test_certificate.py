import numpy as np
import pytest

from nlvar.certificate import (batch_minimality_gap, check_certificate, competitor_families, find_certificate,
                               minimality_gap, weak_residual_p)
from nlvar.domain import ExteriorData, build_mesh, constant_field
from nlvar.kernel import assemble_weights
from nlvar.solver_one import Certificate, solve_one
from nlvar.solver_smooth import SolveOptions, solve_p


@pytest.fixture
def instance(rng):
    m = build_mesh((0, 1), 10, 0.5, 5)
    phi = ExteriorData(rng.uniform(0, 1, m.n_window), (0.2, 0.7))
    return m, phi, assemble_weights(m, 0.5)


def test_constant_zero_certificate_passes():
    m = build_mesh((0, 1), 4, 0.5, 2)
    u = constant_field(m, 1.0)
    w = assemble_weights(m, 0.5)
    cert = find_certificate(u, 0.5, w)
    zero = Certificate(cert.pairs, np.zeros_like(cert.z), cert.balance_residual, 0.0, 0.0)
    assert check_certificate(u, zero, 0.5, w).passed


def test_solver_output_passes(instance):
    m, phi, w = instance
    u, cert = solve_one(m, phi, 0.5, w=w)
    rep = check_certificate(u, cert, 0.5, w, 1e-6)
    assert rep.passed and rep.antisymmetric and rep.worst_bound <= 1 + 1e-12


def test_bound_violation_detected(instance):
    m, phi, w = instance
    u, cert = solve_one(m, phi, 0.5, w=w)
    z = cert.z.copy()
    z[0] = 1 + 1e-3
    bad = Certificate(cert.pairs, z, cert.balance_residual, cert.complementarity_residual, cert.duality_gap)
    rep = check_certificate(u, bad, 0.5, w, 1e-6)
    assert not rep.passed
    assert rep.worst_bound == pytest.approx(1 + 1e-3)


def test_weak_residual(rng):
    m = build_mesh((0, 1), 8, 0.5, 4)
    phi = ExteriorData(rng.uniform(0, 1, m.n_window), (0.0, 1.0))
    w = assemble_weights(m, 0.6)
    opts = SolveOptions()
    u = solve_p(m, phi, 0.4, 1.5, opts, w)
    assert weak_residual_p(u, 0.4, 1.5, w) <= opts.grad_tol
    v = u.interior_values.copy()
    v[2] += 0.1
    assert weak_residual_p(u.with_interior(v), 0.4, 1.5, w) > 10 * opts.grad_tol
    assert weak_residual_p(constant_field(m, 3.0), 0.4, 1.5, w) == 0.0


def test_minimality_gap(instance, rng):
    m, phi, w = instance
    u, _ = solve_one(m, phi, 0.5, w=w)
    assert minimality_gap(u, [u], 0.5, w) == 0.0
    comps = rng.uniform(0, 1, (1000, m.n_interior))
    assert batch_minimality_gap(u, comps, 0.5, w) <= 1e-8
    worse = u.with_interior(comps[0])
    assert minimality_gap(worse, [u], 0.5, w) > 0


def test_batch_agrees_with_loop(instance, rng):
    m, phi, w = instance
    u, _ = solve_one(m, phi, 0.5, w=w)
    comps = rng.uniform(0, 1, (20, m.n_interior))
    loop = minimality_gap(u, [u.with_interior(c) for c in comps], 0.5, w)
    assert batch_minimality_gap(u, comps, 0.5, w) == pytest.approx(loop, abs=1e-12)


def test_families_cover_data_range(instance):
    m, phi, w = instance
    u, _ = solve_one(m, phi, 0.5, w=w)
    fams = competitor_families(u, np.random.default_rng(0), n_random=50)
    lo, hi = phi.all_values(m).min(), phi.all_values(m).max()
    for V in fams.values():
        assert V.min() >= lo and V.max() <= hi
    assert fams["indicators"].shape == (2 ** m.n_interior, m.n_interior)
