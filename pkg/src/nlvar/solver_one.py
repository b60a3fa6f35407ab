"""Minimisation of the nonsmooth energy ``E_s^1`` with a dual z-certificate.

The objective ``sum_k w_k |(K u - c)_k|`` (K: pairwise differences, c: the
exterior values on interior/exterior pairs) is written as the saddle problem

    min_u max_{|z| <= 1}  sum_k w_k z_k (K u - c)_k

and solved with diagonally preconditioned primal-dual hybrid gradient
iterations.  With the usual preconditioner ``sigma_k = 1/(2 w_k)``,
``tau_i = 1 / sum_k w_k |K_ki|`` every update is scale free: the dual step
on a pair is half the (extrapolated) difference and the primal step is the
negative cell balance ``r_i = sum_j w_ij z_ij + sum_x w_ix z_ix``.

First-order iterations reach the requested gap slowly on these
LP-like problems, so the run is finished by (a) Newton continuation on the
smoothed energy, whose smoothed sign ``t / sqrt(t^2 + eps^2)`` is an
interior dual point that one Laplacian solve balances exactly, and (b) a
coarea clean-up of the primal that places every value on the exterior
value set without increasing the energy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import lsq_linear

from .domain import ExteriorData, Field, Mesh
from .energy import Interactions, _check, field_interactions, problem_interactions
from .errors import DomainError, NoConvergence, ShapeMismatch
from .kernel import WeightTable, assemble_weights
from .solver_smooth import initial_guess, smooth_continuation, SolveOptions

BOUND_SLACK = 1e-12


@dataclass
class OneOptions:
    max_iters: int = 4000  # primal-dual iterations
    gap_tol: float = 1e-8  # relative to Interactions.scale()
    cert_tol: float = 1e-6
    check_every: int = 50
    polish: bool = True
    u0: np.ndarray | None = None

    def __post_init__(self):
        if self.gap_tol <= 0 or self.cert_tol <= 0 or self.max_iters < 0:
            raise DomainError("tolerances must be positive and max_iters >= 0")


@dataclass
class Certificate:
    """Antisymmetric dual field on cell pairs, stored once per unordered pair.

    ``pairs[k] = (a, b)`` are node labels: mesh cell indices, with
    ``n_cells`` and ``n_cells + 1`` standing for the far field left and right.
    ``z[k]`` is ``z_ab``; ``z_ba = -z_ab`` is implied.  At least one node of
    every pair is an interior cell.
    """

    pairs: np.ndarray
    z: np.ndarray
    balance_residual: np.ndarray
    complementarity_residual: float
    duality_gap: float

    def to_json(self):
        return {
            "pairs": self.pairs.tolist(),
            "z": self.z.tolist(),
            "balance_residual": self.balance_residual.tolist(),
            "complementarity_residual": self.complementarity_residual,
            "duality_gap": self.duality_gap,
            "summary": {
                "max_abs_z": float(np.max(np.abs(self.z))) if self.z.size else 0.0,
                "max_balance": float(np.max(np.abs(self.balance_residual))) if self.balance_residual.size else 0.0,
            },
        }

    @classmethod
    def from_json(cls, d):
        return cls(np.asarray(d["pairs"], dtype=int).reshape(-1, 2), np.asarray(d["z"], dtype=float),
                   np.asarray(d["balance_residual"], dtype=float), float(d["complementarity_residual"]),
                   float(d["duality_gap"]))

    def dumps(self):
        return json.dumps(self.to_json())


# --------------------------------------------------------------------------- layout

@dataclass
class _Layout:
    """Correspondence between certificate node labels and the Interactions arrays."""

    iu: np.ndarray  # interior-interior pairs (local indices, i < j)
    ju: np.ndarray
    interior_labels: np.ndarray  # local interior index -> node label
    exterior_labels: np.ndarray  # exterior column -> node label
    n_nodes: int

    @property
    def n_pairs(self):
        return self.iu.size + self.interior_labels.size * self.exterior_labels.size


def _layout(I: Interactions, mesh: Mesh) -> _Layout:
    K = mesh.n_cells
    free = I.free
    iu, ju = np.triu_indices(I.n, 1)
    keep = I.W[iu, ju] > 0
    ext = np.concatenate([np.flatnonzero(~free), [K, K + 1]])
    return _Layout(iu[keep], ju[keep], np.flatnonzero(free), ext, K + 2)


def _pairs_of(L: _Layout):
    inner = np.column_stack([L.interior_labels[L.iu], L.interior_labels[L.ju]])
    n, X = L.interior_labels.size, L.exterior_labels.size
    outer = np.column_stack([np.repeat(L.interior_labels, X), np.tile(L.exterior_labels, n)])
    return np.vstack([inner, outer]).astype(int)


def _flatten(L: _Layout, Z, ZX):
    return np.concatenate([Z[L.iu, L.ju], ZX.ravel()])


def _matrices(L: _Layout, cert: Certificate, n, X):
    """Certificate -> (Z antisymmetric n x n, ZX n x X); validates labels."""
    pairs = np.asarray(cert.pairs)
    z = np.asarray(cert.z, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] != z.size:
        raise ShapeMismatch(f"certificate has {pairs.shape} pairs for {z.size} values")
    if np.any(pairs < 0) or np.any(pairs >= L.n_nodes):
        raise ShapeMismatch("certificate references nodes outside the mesh")
    loc = np.full(L.n_nodes, -1)
    loc[L.interior_labels] = np.arange(n)
    col = np.full(L.n_nodes, -1)
    col[L.exterior_labels] = np.arange(X)
    Z = np.zeros((n, n))
    ZX = np.zeros((n, X))
    seen = set()
    for (a, b), val in zip(pairs, z):
        key = (min(a, b), max(a, b))
        if a == b or key in seen:
            raise ShapeMismatch(f"duplicate or diagonal pair {(a, b)}")
        seen.add(key)
        ia, ib = loc[a], loc[b]
        if ia >= 0 and ib >= 0:
            Z[ia, ib] = val
            Z[ib, ia] = -val
        elif ia >= 0:
            ZX[ia, col[b]] = val
        elif ib >= 0:
            ZX[ib, col[a]] = -val
        else:
            raise ShapeMismatch(f"pair {(a, b)} has no interior cell")
    return Z, ZX


# --------------------------------------------------------------------------- residuals

def balance(I: Interactions, Z, ZX):
    """Discrete weak equation tested with each interior cell indicator."""
    return np.sum(I.W * Z, axis=1) + np.sum(I.Wx * ZX, axis=1)


def complementarity(I: Interactions, u, Z, ZX):
    D = u[:, None] - u[None, :]
    X = u[:, None] - I.b[None, :]
    c1 = np.abs(I.W * (np.abs(D) - Z * D))
    c2 = np.abs(I.Wx * (np.abs(X) - ZX * X))
    return float(max(c1.max(initial=0.0), c2.max(initial=0.0)))


def dual_bound(I: Interactions, Z, ZX):
    """Lower bound on ``min E^1`` from any ``|z| <= 1``; minimisers lie in the exterior value box."""
    lo, hi = I.box
    r = balance(I, Z, ZX)
    return float(np.sum(np.minimum(r * lo, r * hi)) - np.sum(I.Wx * ZX * I.b[None, :]))


def gap_of(I: Interactions, u, Z, ZX):
    return I.energy(u, 1.0) - dual_bound(I, Z, ZX)


def make_certificate(I: Interactions, mesh: Mesh, u, Z, ZX) -> Certificate:
    L = _layout(I, mesh)
    return Certificate(_pairs_of(L), _flatten(L, Z, ZX), balance(I, Z, ZX), complementarity(I, u, Z, ZX),
                       gap_of(I, u, Z, ZX))


def duality_gap(u: Field, cert: Certificate, s: float, w: WeightTable) -> float:
    """Primal energy of ``u`` minus the dual bound carried by ``cert``."""
    _check(w, s, 1.0)
    I = field_interactions(u, w)
    L = _layout(I, u.mesh)
    Z, ZX = _matrices(L, cert, I.n, I.Wx.shape[1])
    return gap_of(I, u.interior_values, Z, ZX)


def certificate_matrices(u: Field, cert: Certificate, w: WeightTable):
    I = field_interactions(u, w)
    return I, _matrices(_layout(I, u.mesh), cert, I.n, I.Wx.shape[1])


# --------------------------------------------------------------------------- algorithms

def pdhg(I: Interactions, u, max_iters, gap_target, check_every=50):
    """Preconditioned primal-dual iterations; returns (u, Z, ZX, iterations, gap)."""
    lo, hi = I.box
    tau = 1.0 / np.maximum(I.W.sum(axis=1) + I.Wx.sum(axis=1), 1e-300)
    D = u[:, None] - u[None, :]
    X = u[:, None] - I.b[None, :]
    Z = np.sign(D)
    ZX = np.sign(X)
    u_bar = u.copy()
    best = (math.inf, u.copy(), Z.copy(), ZX.copy())
    it = 0
    for it in range(1, max_iters + 1):
        Z = np.clip(Z + 0.5 * (u_bar[:, None] - u_bar[None, :]), -1.0, 1.0)
        ZX = np.clip(ZX + (u_bar[:, None] - I.b[None, :]), -1.0, 1.0)
        u_new = np.clip(u - tau * balance(I, Z, ZX), lo, hi)
        u_bar = 2.0 * u_new - u
        u = u_new
        if it % check_every == 0 or it == max_iters:
            g = gap_of(I, u, Z, ZX)
            if g < best[0]:
                best = (g, u.copy(), Z.copy(), ZX.copy())
            if g <= gap_target:
                break
    g, u, Z, ZX = best
    return u, Z, ZX, it, g


def smoothed_dual(I: Interactions, u, eps):
    """Balanced dual point from the smoothed sign of ``u``; clipped to ``|z| <= 1``."""
    D = u[:, None] - u[None, :]
    X = u[:, None] - I.b[None, :]
    Z = D / np.sqrt(D * D + eps * eps)
    ZX = X / np.sqrt(X * X + eps * eps)
    r = balance(I, Z, ZX)
    Lap = -I.W.copy()
    Lap[np.diag_indices_from(Lap)] = I.W.sum(axis=1) + I.Wx.sum(axis=1)
    try:
        pot = -linalg.cho_solve(linalg.cho_factor(Lap, check_finite=False), r, check_finite=False)
        Z = Z + (pot[:, None] - pot[None, :])
        ZX = ZX + pot[:, None]
    except linalg.LinAlgError:
        pass
    return np.clip(Z, -1.0, 1.0), np.clip(ZX, -1.0, 1.0)


def coarea_cleanup(I: Interactions, u):
    """Rebuild ``u`` from minimal-perimeter superlevel sets, one per exterior value gap.

    For each pair of consecutive active exterior values ``v_{k-1} < v_k`` the
    superlevel sets ``{u >= lam}``, ``lam`` in ``(v_{k-1}, v_k]``, are finitely
    many; the one of least perimeter is kept.  Thresholds of one function are
    nested, so the result is a function with values in the exterior value set
    and, by the coarea formula, ``E^1(result) <= E^1(u)`` for ``u`` in the box.
    """
    active = I.Wx.sum(axis=0) > 0
    levels = np.unique(I.b[active])
    if levels.size <= 1:
        return np.full(I.n, levels[0] if levels.size else 0.0)
    u = np.clip(u, levels[0], levels[-1])
    out = np.full(I.n, levels[0])
    for v0, v1 in zip(levels[:-1], levels[1:]):
        cands = np.unique(np.concatenate([[v1], u[(u > v0) & (u < v1)]]))
        best_set, best_per = None, math.inf
        ext_in = I.b >= v1
        for lam in cands:
            S = u >= lam
            per = _set_perimeter(I, S, ext_in)
            if per < best_per:
                best_set, best_per = S, per
        out[best_set] = v1
    return out


def fit_certificate(I: Interactions, u):
    """Best ``(Z, ZX)`` for a fixed ``u``: signs where values differ, bounded least squares on ties.

    The tied entries are free in ``[-1, 1]`` and are fitted to make every cell
    balance vanish; ``u`` is a minimiser exactly when the fit succeeds.
    """
    D = u[:, None] - u[None, :]
    X = u[:, None] - I.b[None, :]
    Z = np.sign(D)
    ZX = np.sign(X)
    iu, ju = np.where(np.triu(D == 0, 1) & (I.W > 0))
    ix, xx = np.where((X == 0) & (I.Wx > 0))
    r0 = balance(I, Z, ZX)
    m = iu.size + ix.size
    if m:
        A = np.zeros((I.n, m))
        k = np.arange(iu.size)
        A[iu, k] = I.W[iu, ju]
        A[ju, k] = -I.W[iu, ju]
        A[ix, iu.size + np.arange(ix.size)] = I.Wx[ix, xx]
        sol = lsq_linear(A, -r0, bounds=(-1.0, 1.0), method="bvls", tol=1e-14).x
        Z[iu, ju] = sol[: iu.size]
        Z[ju, iu] = -sol[: iu.size]
        ZX[ix, xx] = sol[iu.size:]
    return Z, ZX


def extremal_minimizer(I: Interactions, Z, ZX, side="max", tol=1e-6):
    """Largest (or smallest) field allowed by complementary slackness with an optimal dual ``(Z, ZX)``.

    Every minimiser satisfies ``|d| = z d`` on every pair for every optimal
    ``z``, so ``|z| < 1`` pins ``u_i = u_j`` (or ``u_i = b_x``) and ``z = +-1``
    fixes an order.  The top of that order polyhedron is found by pushing upper
    bounds along the ``<=`` edges.  Entries within ``tol`` of ``+-1`` count as
    saturated.  Returns ``None`` when the result is infeasible or not optimal,
    which happens only if ``(Z, ZX)`` was not accurate enough.
    """
    if side not in ("max", "min"):
        raise DomainError(f"side must be 'max' or 'min', got {side!r}")
    sgn = 1.0 if side == "max" else -1.0
    Zs, ZXs, b = sgn * Z, sgn * ZX, sgn * I.b
    lo, hi = I.box
    top = hi if side == "max" else -lo
    # u_i <= u_j unless z_ij is saturated at +1 (then u_i >= u_j is all we know)
    le = (I.W > 0) & (Zs < 1.0 - tol)
    np.fill_diagonal(le, False)
    lex = (I.Wx > 0) & (ZXs < 1.0 - tol)
    U = np.minimum(top, np.min(np.where(lex, b[None, :], np.inf), axis=1))
    for _ in range(I.n + 1):
        nxt = np.minimum(U, np.min(np.where(le, U[None, :], np.inf), axis=1))
        if np.array_equal(nxt, U):
            break
        U = nxt
    u = sgn * U
    if not np.all(np.isfinite(u)):
        return None
    E, E_ref = I.energy(u, 1.0), dual_bound(I, Z, ZX)
    if E - E_ref > 1e-9 * I.scale():
        return None
    return u


def _set_perimeter(I: Interactions, S, ext_in):
    inner = np.sum(I.W[np.ix_(S, ~S)])
    cross = np.sum(I.Wx[np.ix_(S, ~ext_in)]) + np.sum(I.Wx[np.ix_(~S, ext_in)])
    return inner + cross


@dataclass
class OneResult:
    values: np.ndarray
    Z: np.ndarray = field(repr=False)
    ZX: np.ndarray = field(repr=False)
    energy: float = 0.0
    gap: float = 0.0
    iters: int = 0
    stage: str = ""


def minimize_one(I: Interactions, opts: OneOptions) -> OneResult:
    lo, hi = I.box
    scale = I.scale()
    target = opts.gap_tol * scale
    if opts.u0 is not None:
        u = np.clip(np.asarray(opts.u0, dtype=float).reshape(-1), lo, hi)
        if u.size != I.n:
            raise DomainError(f"initial guess needs {I.n} values, got {u.size}")
    else:
        u = initial_guess(I, SolveOptions())
    u, Z, ZX, iters, gap = pdhg(I, u, opts.max_iters, target, opts.check_every)
    stage = "pdhg"
    if opts.polish and hi > lo:
        # the smoothed dual is best just above the eps where round-off swamps the gradient
        osc = hi - lo
        u_s, eps_prev = u.copy(), None
        cands = [coarea_cleanup(I, u)]
        for k in range(6, 11):
            eps = osc * 10.0 ** -k
            u_s, eps, used, _ = smooth_continuation(I, u_s, 1.0, max_iters=500, grad_tol=1e-13,
                                                    eps_final=eps, eps_start=eps_prev)
            eps_prev = eps
            iters += used
            Zs, ZXs = smoothed_dual(I, u_s, eps)
            if dual_bound(I, Zs, ZXs) > dual_bound(I, Z, ZX):
                Z, ZX = Zs, ZXs
            cands.append(coarea_cleanup(I, u_s))
            if I.energy(u, 1.0) - dual_bound(I, Z, ZX) <= 1e-3 * target:
                break
        for cand in cands:
            if I.energy(cand, 1.0) <= I.energy(u, 1.0) + 1e-15 * scale:
                u = cand
        stage = "polished"
    E = I.energy(u, 1.0)
    gap = E - dual_bound(I, Z, ZX)
    return OneResult(u, Z, ZX, E, gap, iters, stage)


def _cert_residual(cert):
    return max(float(np.max(np.abs(cert.balance_residual), initial=0.0)), cert.complementarity_residual)


def solve_one(mesh: Mesh, phi: ExteriorData, s: float, opts: OneOptions | None = None,
              w: WeightTable | None = None):
    """Minimiser of ``E_s^1`` with exterior data ``phi`` and its z-certificate."""
    if not 0 < s < 1:
        raise DomainError(f"s must lie in (0, 1), got {s}")
    opts = opts or OneOptions()
    if w is None:
        w = assemble_weights(mesh, s)
    _check(w, s, 1.0)
    I = problem_interactions(mesh, phi, w)
    res = minimize_one(I, opts)
    u = Field(mesh, res.values, phi)
    cert = make_certificate(I, mesh, res.values, res.Z, res.ZX)
    worst = _cert_residual(cert)
    if worst > opts.cert_tol:
        # the box-constrained dual may close the gap without balancing (flat minimisers); refit on ties
        Z, ZX = fit_certificate(I, res.values)
        alt = make_certificate(I, mesh, res.values, Z, ZX)
        if _cert_residual(alt) < worst and alt.duality_gap <= opts.gap_tol * I.scale():
            cert, worst = alt, _cert_residual(alt)
    if cert.duality_gap > opts.gap_tol * I.scale() or worst > opts.cert_tol:
        raise NoConvergence(res.iters, cert.duality_gap)
    return u, cert
