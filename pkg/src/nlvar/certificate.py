"""Verification of weak-solution conditions and of minimality against competitor families."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .domain import CellSet, Field, Mesh, indicator_field
from .energy import _check, field_interactions, renormalized_diff
from .errors import ShapeMismatch, TooLarge
from .kernel import WeightTable
from .solver_one import (Certificate, _layout, _matrices, balance, complementarity, fit_certificate, gap_of,
                         make_certificate)
from .solver_smooth import plap_apply

QUANT_LEVELS = 5
N_RANDOM_COMPETITORS = 1000
MAX_EXHAUSTIVE = 20


@dataclass(frozen=True)
class CertificateReport:
    passed: bool
    antisymmetric: bool
    worst_balance: float
    worst_complementarity: float
    worst_bound: float
    duality_gap: float

    def to_json(self):
        return {"pass": self.passed, "antisymmetric": self.antisymmetric, "worst_balance": self.worst_balance,
                "worst_complementarity": self.worst_complementarity, "worst_bound": self.worst_bound,
                "duality_gap": self.duality_gap}


def check_certificate(u: Field, cert: Certificate, s: float, w: WeightTable, tol: float = 1e-6) -> CertificateReport:
    """Recompute every residual of ``cert`` against ``u`` from scratch.

    Antisymmetry holds by storage (one value per unordered pair); duplicated or
    reversed pairs are rejected as malformed.  The bound is checked at
    ``1 + tol``, balance and complementarity at ``tol``.
    """
    _check(w, s, 1.0)
    I = field_interactions(u, w)
    L = _layout(I, u.mesh)
    Z, ZX = _matrices(L, cert, I.n, I.Wx.shape[1])
    antisym = bool(np.array_equal(Z, -Z.T))
    z = np.asarray(cert.z, dtype=float)
    worst_bound = float(np.max(np.abs(z))) if z.size else 0.0
    r = balance(I, Z, ZX)
    worst_balance = float(np.max(np.abs(r))) if r.size else 0.0
    worst_comp = complementarity(I, u.interior_values, Z, ZX)
    gap = gap_of(I, u.interior_values, Z, ZX)
    passed = (antisym and worst_bound <= 1.0 + tol and worst_balance <= tol and worst_comp <= tol)
    return CertificateReport(passed, antisym, worst_balance, worst_comp, worst_bound, gap)


def weak_residual_p(u: Field, s: float, p: float, w: WeightTable) -> float:
    """Largest pairing of the weak p-Laplace equation with an interior cell indicator."""
    g = plap_apply(u, s, p, w)
    return float(np.max(np.abs(g))) if g.size else 0.0


def find_certificate(u: Field, s: float, w: WeightTable):
    """Best z for a given ``u``: ``sign(u_i - u_j)`` where the values differ, free in [-1, 1] on ties.

    The free entries are fitted by bounded least squares to make every cell
    balance vanish; ``u`` is a weak solution exactly when the fit succeeds.
    """
    _check(w, s, 1.0)
    I = field_interactions(u, w)
    Z, ZX = fit_certificate(I, u.interior_values)
    return make_certificate(I, u.mesh, u.interior_values, Z, ZX)


def minimality_gap(u: Field, competitors, s: float, w: WeightTable) -> float:
    """Largest renormalised difference ``RENO(u, v)`` over the competitors.

    ``u`` is certified minimal against the list iff the result is ``<= tol``;
    a positive value is the amount by which the best competitor beats ``u``.
    """
    best = -np.inf
    for v in competitors:
        best = max(best, renormalized_diff(u, v, s, w))
    return float(best) if np.isfinite(best) else 0.0


def batch_minimality_gap(u: Field, interiors, s: float, w: WeightTable) -> float:
    """Same as :func:`minimality_gap` for competitors given as rows of interior values."""
    _check(w, s, 1.0)
    I = field_interactions(u, w)
    V = np.atleast_2d(np.asarray(interiors, dtype=float))
    if V.shape[1] != I.n:
        raise ShapeMismatch(f"competitors need {I.n} interior values")
    a = u.interior_values
    iu, ju = np.triu_indices(I.n, 1)
    wp = I.W[iu, ju]
    du = np.abs(a[iu] - a[ju])
    xu = np.abs(a[:, None] - I.b[None, :])
    best = -np.inf
    for k in range(0, V.shape[0], 4096):
        B = V[k:k + 4096]
        inner = (du[None, :] - np.abs(B[:, iu] - B[:, ju])) @ wp
        cross = np.einsum("kix,ix->k", xu[None] - np.abs(B[:, :, None] - I.b[None, None, :]), I.Wx)
        best = max(best, float(np.max(2.0 * inner + 2.0 * cross)))
    return best


# --------------------------------------------------------------------------- competitor families

def all_binary(n):
    if n > MAX_EXHAUSTIVE:
        raise TooLarge(f"2^{n} enumeration refused (limit {MAX_EXHAUSTIVE})")
    return ((np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)


def competitor_families(u: Field, rng=None, n_random=N_RANDOM_COMPETITORS, levels=QUANT_LEVELS, max_grid=400_000):
    """Competitor interiors: indicators, a value-quantised grid and random fields, all in the data range.

    Indicators are interiors with values in ``{min phi, max phi}`` (0/1 for
    indicator data).  The quantised grid uses ``levels`` equispaced values and
    is exhaustive when ``levels^N <= max_grid``, otherwise sampled.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n = u.mesh.n_interior
    ext = u.exterior.all_values(u.mesh)
    lo, hi = (float(ext.min()), float(ext.max())) if ext.size else (0.0, 0.0)
    fams = {}
    if n <= MAX_EXHAUSTIVE:
        fams["indicators"] = np.where(all_binary(n), hi, lo)
    else:
        fams["indicators"] = np.where(rng.random((2**12, n)) < 0.5, hi, lo)
    grid = np.linspace(lo, hi, levels)
    if levels**n <= max_grid:
        idx = np.array(list(itertools.product(range(levels), repeat=n)))
        fams["quantized"] = grid[idx]
    else:
        fams["quantized"] = grid[rng.integers(0, levels, size=(max_grid // 10, n))]
    fams["random"] = rng.uniform(lo, hi, size=(n_random, n))
    return fams


def family_gaps(u: Field, s: float, w: WeightTable, rng=None):
    return {k: batch_minimality_gap(u, V, s, w) for k, V in competitor_families(u, rng).items()}


# --------------------------------------------------------------------------- exhaustive set checks

def corollary_sets_check(mesh: Mesh, window_trace, far_trace, s: float, w: WeightTable, tol=1e-6):
    """For every interior set with the given trace: perimeter-argmin iff its indicator has a certificate.

    Returns ``(agree, n_sets, n_minimizers, min_value)``.
    """
    from .perimeter import perimeter_table  # local import to avoid a cycle

    n = mesh.n_interior
    flags = all_binary(n)
    pers = perimeter_table(mesh, window_trace, far_trace, s, w, flags)
    min_val = pers.min()
    agree = True
    n_min = 0
    scale = 1.0 + abs(min_val)
    for row, per in zip(flags, pers):
        E = CellSet(mesh, row, window_trace, far_trace)
        u = indicator_field(E)
        rep = check_certificate(u, find_certificate(u, s, w), s, w, tol)
        is_min = per <= min_val + 1e-12 * scale
        n_min += is_min
        if rep.passed != is_min:
            agree = False
    return agree, len(flags), int(n_min), float(min_val)
