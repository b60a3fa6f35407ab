"""Fractional perimeters of cell sets, exhaustive minimal-set search and level-set checks.

A cell set with a fixed exterior trace has perimeter ``E_s^1`` of its
indicator.  For boolean interior flags ``x`` that is the quadratic form

    Per(x) = x . (W 1) - x^T W x + x . a + (1 - x) . c

with ``a_i`` the weight from cell ``i`` to exterior nodes outside the trace
and ``c_i`` the weight to exterior nodes inside it, which lets all ``2^N``
subsets be scored with a few matrix products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import CellSet, Field, Mesh, indicator_field, level_set
from .energy import _check, energy, field_interactions
from .errors import DomainError, TooLarge
from .kernel import WeightTable, assemble_weights

MAX_BRUTEFORCE = 20
LEVEL_SET_MAX_N = 10
TIE_RTOL = 1e-12
LEVEL_TOL = 1e-8


def frac_perimeter(E: CellSet, s: float, w: WeightTable) -> float:
    """``Per_s(E, Omega) = E_s^1(chi_E)``; literally the same sum."""
    _check(w, s, 1.0)
    return energy(indicator_field(E), s, 1.0, w)


def _trace_field(mesh, window_trace, far_trace):
    E = CellSet(mesh, np.zeros(mesh.n_interior, bool), window_trace, tuple(far_trace))
    return indicator_field(E)


def perimeter_table(mesh: Mesh, window_trace, far_trace, s, w: WeightTable, flags, chunk=8192):
    """Perimeters of the interior sets given as rows of the boolean array ``flags``."""
    _check(w, s, 1.0)
    I = field_interactions(_trace_field(mesh, window_trace, far_trace), w)
    inside = I.b > 0.5
    a = I.Wx[:, ~inside].sum(axis=1)
    c = I.Wx[:, inside].sum(axis=1)
    deg = I.W.sum(axis=1)
    X = np.atleast_2d(np.asarray(flags, dtype=float))
    out = np.empty(X.shape[0])
    base = c.sum()
    for k in range(0, X.shape[0], chunk):
        B = X[k:k + chunk]
        quad = np.einsum("ki,ki->k", B @ I.W, B)
        out[k:k + chunk] = B @ (deg + a - c) - quad + base
    return out


@dataclass
class MinSetResult:
    minimizers: list
    min_value: float

    def to_json(self):
        return {"min_value": self.min_value,
                "minimizers": [E.interior.astype(int).tolist() for E in self.minimizers]}


def min_set_bruteforce(mesh: Mesh, trace: CellSet, s: float, w: WeightTable | None = None) -> MinSetResult:
    """All interior sets of least perimeter among those with the exterior trace of ``trace``.

    Ties are decided at relative tolerance ``1e-12`` of the perimeter scale so
    that mirror images, which round differently, are reported together.
    """
    n = mesh.n_interior
    if n > MAX_BRUTEFORCE:
        raise TooLarge(f"2^{n} enumeration refused (limit {MAX_BRUTEFORCE})")
    if w is None:
        w = assemble_weights(mesh, s)
    from .certificate import all_binary

    flags = all_binary(n)
    pers = perimeter_table(mesh, trace.window, trace.far, s, w, flags)
    m = float(pers.min())
    scale = 1.0 + float(np.abs(pers).max())
    hits = np.flatnonzero(pers <= m + TIE_RTOL * scale)
    mins = [CellSet(mesh, flags[i], trace.window, trace.far) for i in hits]
    # report the exact sum for the minimal value
    return MinSetResult(mins, min(frac_perimeter(E, s, w) for E in mins))


@dataclass
class LevelRow:
    lam: float
    perimeter: float
    min_value: float
    passed: bool


@dataclass
class LevelSetReport:
    rows: list
    passed: bool

    def to_json(self):
        return {"pass": self.passed,
                "levels": [{"lambda": r.lam, "perimeter": r.perimeter, "min_value": r.min_value,
                            "pass": r.passed} for r in self.rows]}

    def csv_rows(self):
        return [(r.lam, r.perimeter, r.min_value) for r in self.rows]


def level_lambdas(u: Field):
    """Midpoints between consecutive distinct values of ``u`` (exterior included)."""
    vals = np.unique(np.concatenate([u.interior_values, u.exterior.all_values(u.mesh)]))
    return 0.5 * (vals[:-1] + vals[1:])


def level_set_check(u: Field, s: float, w: WeightTable, tol: float = LEVEL_TOL,
                    max_n: int = LEVEL_SET_MAX_N) -> LevelSetReport:
    """Compare every superlevel set of ``u`` with the brute-force minimum for its trace."""
    if u.mesh.n_interior > max_n:
        raise TooLarge(f"level-set check needs N <= {max_n}, got {u.mesh.n_interior}")
    rows = []
    for lam in level_lambdas(u):
        E = level_set(u, lam)
        per = frac_perimeter(E, s, w)
        best = min_set_bruteforce(u.mesh, E, s, w).min_value
        rows.append(LevelRow(float(lam), float(per), float(best), bool(per <= best + tol)))
    return LevelSetReport(rows, all(r.passed for r in rows))


# --------------------------------------------------------------------------- regularity ratios

@dataclass(frozen=True)
class RegularityReport:
    sup_bound_ratio: float
    inf_bound_ratio: float
    bv_ratio: float
    dist: float

    def to_json(self):
        return {"sup_bound_ratio": self.sup_bound_ratio, "inf_bound_ratio": self.inf_bound_ratio,
                "bv_ratio": self.bv_ratio, "dist": self.dist}


def subinterval_cells(mesh: Mesh, omega_prime):
    """Interior-local indices of the cells tiling ``omega_prime``; it must be cell aligned and inside Omega."""
    lo, hi = float(omega_prime[0]), float(omega_prime[1])
    a, b, h = mesh.omega_lo, mesh.omega_hi, mesh.h
    if not (a < lo < hi < b):
        raise DomainError(f"({lo}, {hi}) is not compactly contained in ({a}, {b})")
    i0, i1 = (lo - a) / h, (hi - a) / h
    k0, k1 = round(i0), round(i1)
    if abs(i0 - k0) > 1e-9 * max(1.0, abs(i0)) or abs(i1 - k1) > 1e-9 * max(1.0, abs(i1)):
        raise DomainError(f"({lo}, {hi}) is not aligned with cells of width {h}")
    return np.arange(k0, k1)


def _ratio(num, den):
    if num <= 0:
        return 0.0
    return num / den if den > 0 else math.inf


def regularity_report(u: Field, omega_prime) -> RegularityReport:
    """Measured constants of the local sup and BV estimates (n = 1)."""
    mesh = u.mesh
    idx = subinterval_cells(mesh, omega_prime)
    v = u.interior_values
    dist = min(omega_prime[0] - mesh.omega_lo, mesh.omega_hi - omega_prime[1])
    h = mesh.h
    sub = v[idx]
    k_sup = _ratio(float(sub.max()) * dist, h * float(np.sum(np.maximum(v, 0.0))))
    k_inf = _ratio(float(-sub.min()) * dist, h * float(np.sum(np.maximum(-v, 0.0))))
    jumps = float(np.sum(np.abs(np.diff(sub))))  # interfaces strictly inside Omega'
    k_bv = _ratio(jumps, h * float(np.sum(np.abs(v))))
    return RegularityReport(k_sup, k_inf, k_bv, float(dist))
