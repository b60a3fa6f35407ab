"""Slow, independent reference computations.

Nothing here reuses the closed-form kernel or the package solvers:
weights come from adaptive quadrature after a distance substitution, the
p = 1 minimum from a linear program (HiGHS), subset minima from plain
enumeration, and p > 1 minima from quasi-Newton runs in scipy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy import integrate, optimize

from .domain import ExteriorData, Field, Mesh
from .energy import Interactions, energy, problem_interactions
from .errors import DomainError, SingularPair, TooLarge
from .kernel import Cell, WeightTable, assemble_weights, check_alpha

QUAD_RTOL = 1e-11
DENSE_MAX_N = 16


# --------------------------------------------------------------------------- kernel quadrature

def _overlap_length(a: Cell, b: Cell, t):
    """Length of ``{x in a : x + t in b}``; piecewise linear in ``t``."""
    return max(0.0, min(a.hi, b.hi - t) - max(a.lo, b.lo - t))


def _panels(lo, hi, kinks, near):
    """Breakpoints on ``[lo, hi]``: kinks plus geometric refinement towards ``near``."""
    pts = {lo, hi, *[k for k in kinks if lo < k < hi]}
    if near is not None and near > 0:
        # resolve the near-singular end when the gap is small compared with the cells
        r = near
        while r < hi:
            pts.add(r)
            r *= 2.0
    return sorted(pts)


def _integrate_panels(f, pts, rtol, alg_left=None):
    total = 0.0
    for t0, t1 in zip(pts[:-1], pts[1:]):
        if alg_left is not None and t0 == 0.0:
            g, alpha = alg_left
            val = integrate.quad(g, t0, t1, weight="alg", wvar=(-alpha, 0.0), epsabs=0.0, epsrel=rtol,
                                 limit=200)[0]
        else:
            val = integrate.quad(f, t0, t1, epsabs=0.0, epsrel=rtol, limit=200)[0]
        total += val
    return total


def quad_weight_oracle(a: Cell, b: Cell, alpha: float, rtol: float = QUAD_RTOL) -> float:
    """``iint_{a x b} |x-y|^-(1+alpha)`` by quadrature in the distance ``t = y - x``.

    The inner measure ``L(t) = |{x in a : x + t in b}|`` is piecewise linear,
    so the outer integrand is smooth between its kinks; a touching pair leaves
    ``t^-alpha`` at ``t = 0``, handled with an algebraic weight.
    """
    alpha = check_alpha(alpha)
    if a.lo > b.lo:
        a, b = b, a
    if b.lo < a.hi:
        raise SingularPair(f"cells [{a.lo}, {a.hi}] and [{b.lo}, {b.hi}] overlap")
    t_lo, t_hi = b.lo - a.hi, b.hi - a.lo
    kinks = [b.lo - a.lo, b.hi - a.hi]
    f = lambda t: _overlap_length(a, b, t) * t ** (-1.0 - alpha)
    if t_lo == 0.0:
        # L(t) = t near 0, so f = t^-alpha * (L(t) / t)
        g = lambda t: _overlap_length(a, b, t) / t if t > 0 else 1.0
        pts = _panels(0.0, t_hi, kinks, None)
        return _integrate_panels(f, pts, rtol, alg_left=(g, alpha))
    return _integrate_panels(f, _panels(t_lo, t_hi, kinks, t_lo), rtol)


def far_moment_oracle(c: Cell, edge: float, side: str, alpha: float, rtol: float = QUAD_RTOL) -> float:
    """Cell against a half line, by quadrature in the distance from the cell's points."""
    alpha = check_alpha(alpha)
    if side == "right":
        near = edge - c.hi
    elif side == "left":
        near = c.lo - edge
    else:
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    if near < 0:
        raise DomainError("far edge intersects the cell")
    width = c.width
    # the integral over the half line is elementary; the outer one runs over the distance d to the edge
    inner = lambda d: d ** (-alpha) / alpha
    if near == 0.0:
        return integrate.quad(lambda d: 1.0 / alpha, 0.0, width, weight="alg", wvar=(-alpha, 0.0),
                              epsabs=0.0, epsrel=rtol, limit=200)[0]
    pts = _panels(near, near + width, [], near)
    return _integrate_panels(inner, pts, rtol)


# --------------------------------------------------------------------------- gradient

def fd_gradient_oracle(u: Field, s: float, p: float, w: WeightTable, h: float = 1e-6):
    """Central differences of the energy in each interior value.

    The discrete p-Laplacian ``sum w |d|^(p-2) d`` equals the derivative of
    ``E_s^p`` itself (the ``1/p`` normalisation cancels the power's ``p``),
    so that is what is differenced here.
    """
    if p <= 1:
        raise DomainError(f"p must be > 1, got {p}")
    if h <= 0:
        raise DomainError(f"h must be > 0, got {h}")
    v = np.array(u.interior_values)
    out = np.empty(v.size)
    for i in range(v.size):
        vp, vm = v.copy(), v.copy()
        vp[i] += h
        vm[i] -= h
        out[i] = (energy(u.with_interior(vp), s, p, w) - energy(u.with_interior(vm), s, p, w)) / (2 * h)
    return out


# --------------------------------------------------------------------------- dense minimisation

@dataclass
class OracleResult:
    value: float
    field: Field
    method: str
    residual: float = 0.0

    def to_json(self):
        return {"value": self.value, "method": self.method, "residual": self.residual,
                "interior": self.field.interior_values.tolist()}


def _lp_system(I: Interactions):
    """Epigraph form of ``E^1``: variables ``(u, t_pairs, t_exterior)``, constraints ``A x <= rhs``."""
    n = I.n
    iu, ju = np.triu_indices(n, 1)
    pw = I.W[iu, ju]
    keep = pw > 0
    iu, ju, pw = iu[keep], ju[keep], pw[keep]
    m = pw.size
    X = I.Wx.shape[1]
    nv = n + m + n * X
    cost = np.concatenate([np.zeros(n), pw, I.Wx.ravel()])
    k = np.arange(m)
    # +-(u_i - u_j) - t_k <= 0
    rows = np.concatenate([2 * k, 2 * k, 2 * k, 2 * k + 1, 2 * k + 1, 2 * k + 1])
    cols = np.concatenate([iu, ju, n + k, iu, ju, n + k])
    vals = np.concatenate([np.ones(m), -np.ones(m), -np.ones(m), -np.ones(m), np.ones(m), -np.ones(m)])
    # +-(u_i - b_x) - t_ix <= -+b_x
    ii = np.repeat(np.arange(n), X)
    xx = np.tile(np.arange(X), n)
    q = np.arange(n * X)
    kk = n + m + q
    base = 2 * m
    rows = np.concatenate([rows, base + 2 * q, base + 2 * q, base + 2 * q + 1, base + 2 * q + 1])
    cols = np.concatenate([cols, ii, kk, ii, kk])
    vals = np.concatenate([vals, np.ones(n * X), -np.ones(n * X), -np.ones(n * X), -np.ones(n * X)])
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(base + 2 * n * X, nv))
    rhs = np.concatenate([np.zeros(base), np.column_stack([I.b[xx], -I.b[xx]]).ravel()])
    return cost, A, rhs


def _linprog(c, A, rhs, method="highs-ds"):
    res = optimize.linprog(c, A_ub=A, b_ub=rhs, bounds=[(None, None)] * c.size, method=method)
    if res.status != 0:
        raise DomainError(f"LP oracle failed: {res.message}")
    return res.x


def lp_min_one(I: Interactions):
    """Exact p = 1 minimiser as a linear program: one slack per interacting pair."""
    cost, A, rhs = _lp_system(I)
    u = _linprog(cost, A, rhs)[: I.n]
    return u, I.energy(u, 1.0)


def lp_extremal_one(I: Interactions, side: str = "max", rtol: float = 1e-10):
    """Pointwise largest (or smallest) p = 1 minimiser.

    Minimisers form a lattice, so the extremal one is unique; it is found by
    maximising ``sum u`` over the near-optimal face ``E <= E* (1 + rtol)``.
    LP values within ``1e-9`` of an exterior value are snapped onto it.
    """
    if side not in ("max", "min"):
        raise DomainError(f"side must be 'max' or 'min', got {side!r}")
    cost, A, rhs = _lp_system(I)
    # interior point with crossover is several times faster than dual simplex at N = 128
    E_star = I.energy(_linprog(cost, A, rhs, "highs-ipm")[: I.n], 1.0)
    obj = np.zeros(cost.size)
    obj[: I.n] = -1.0 if side == "max" else 1.0
    A2 = sparse.vstack([A, sparse.csr_matrix(cost)]).tocsr()
    rhs2 = np.append(rhs, E_star * (1.0 + rtol) + 1e-14)
    u = _linprog(obj, A2, rhs2, "highs-ipm")[: I.n]
    levels = np.unique(I.b)
    if levels.size:
        k = np.clip(np.searchsorted(levels, u), 1, max(levels.size - 1, 1))
        near = np.where(np.abs(u - levels[k - 1]) <= np.abs(u - levels[np.minimum(k, levels.size - 1)]),
                        levels[k - 1], levels[np.minimum(k, levels.size - 1)])
        span = max(1.0, float(np.ptp(levels)))
        u = np.where(np.abs(u - near) <= 1e-9 * span, near, u)
    return u, I.energy(u, 1.0)


def _enumerate_two_level(I: Interactions):
    """Best interior vector with values in {lo, hi} by exhaustive enumeration."""
    lo, hi = I.box
    n = I.n
    best_val, best = math.inf, None
    step = 1 << 14
    for start in range(0, 1 << n, step):
        idx = np.arange(start, min(start + step, 1 << n))
        flags = (idx[:, None] >> np.arange(n)[None, :]) & 1
        V = np.where(flags == 1, hi, lo)
        E = I.batch_energy(V, 1.0)
        k = int(np.argmin(E))
        if E[k] < best_val:
            best_val, best = float(E[k]), V[k].copy()
    return best, best_val


def _bfgs_min(I: Interactions, p, u0, gtol=1e-12):
    fun = lambda v: I.energy(v, p)
    jac = lambda v: I.gradient(v, p)
    res = optimize.minimize(fun, u0, jac=jac, method="BFGS",
                            options={"gtol": gtol, "maxiter": 20000, "norm": np.inf})
    u = res.x
    # a few L-BFGS-B restarts help once BFGS stalls on round-off
    for _ in range(3):
        r2 = optimize.minimize(fun, u, jac=jac, method="L-BFGS-B",
                               options={"gtol": gtol, "ftol": 0.0, "maxiter": 20000, "maxcor": 50})
        if r2.fun <= fun(u):
            u = r2.x
    return u, float(np.max(np.abs(jac(u)), initial=0.0))


def dense_min_oracle(mesh: Mesh, phi: ExteriorData, s: float, p: float, w: WeightTable | None = None,
                     max_n: int = DENSE_MAX_N) -> OracleResult:
    """Reference minimum of ``E_s^p`` with exterior ``phi``.

    p = 1: linear program, and for two-valued data also all ``2^N`` two-level
    fields; the lower energy wins.  p > 1: BFGS to a max-norm gradient of
    ``1e-12`` where round-off allows it; the reached value is in ``residual``.
    """
    n = mesh.n_interior
    if n > max_n:
        raise TooLarge(f"dense oracle limited to N <= {max_n}, got {n}")
    if p < 1 or s * p >= 1 or s <= 0:
        raise DomainError(f"need p >= 1 and 0 < s*p < 1 (s={s}, p={p})")
    if w is None:
        w = assemble_weights(mesh, s * p)
    I = problem_interactions(mesh, phi, w)
    if p == 1:
        u, val = lp_min_one(I)
        method = "lp"
        if np.unique(I.b[I.Wx.sum(axis=0) > 0]).size <= 2:
            v2, val2 = _enumerate_two_level(I)
            if val2 <= val:
                u, val, method = v2, val2, "enumeration"
        return OracleResult(val, Field(mesh, u, phi), method)
    lo, hi = I.box
    u0 = np.full(n, 0.5 * (lo + hi))
    u, gnorm = _bfgs_min(I, p, u0)
    return OracleResult(I.energy(u, p), Field(mesh, u, phi), "bfgs", gnorm)
