"""Discrete nonlocal energies, seminorms, tails and the explicit inequalities they satisfy.

For a piecewise-constant field every double integral reduces to a finite sum
of cell-pair weights times ``|u_i - u_j|^p``; nothing here is approximate.
The free cells (normally the interior of the domain) interact with each other
and with *exterior nodes*: every non-free cell plus the two far-field half
lines.  That bipartite description is captured by :class:`Interactions`,
which the solvers and certificate checks reuse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .domain import ExteriorData, Field, Mesh, indicator_field, level_set
from .errors import AlphaMismatch, DomainError, ExteriorMismatch
from .kernel import WeightTable, assemble_weights, check_alpha

ALPHA_TOL = 1e-14
DIVERGENCE_FACTOR = 10.0
MAX_DOUBLINGS = 16


def signed_power(t, q):
    """``|t|^(q-1) t``, extended by 0 at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    if q == 2:
        return t
    a = np.abs(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a > 0, np.sign(t) * a ** (q - 1.0), 0.0)
    return out


@dataclass
class Interactions:
    """Weights seen by a set of free cells.

    ``W`` couples free cells among themselves (symmetric, zero diagonal),
    ``Wx[i, x]`` couples free cell ``i`` with exterior node ``x`` whose value
    is ``b[x]``.  ``far_mask`` marks the far-field nodes.
    """

    W: np.ndarray
    Wx: np.ndarray
    b: np.ndarray
    far_mask: np.ndarray
    h: float
    free: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.W.shape[0]

    def energy(self, u, p):
        return sum(self.energy_parts(u, p))

    def energy_parts(self, u, p):
        """(free-free, free-cell exterior, free-far) contributions of E^p."""
        u = np.asarray(u, dtype=float)
        D = np.abs(u[:, None] - u[None, :])
        X = np.abs(u[:, None] - self.b[None, :])
        if p != 1:
            D = D**p
            X = X**p
        inner = 0.5 * np.sum(self.W * D) / p
        WX = self.Wx * X
        cross = np.sum(WX[:, ~self.far_mask]) / p
        far = np.sum(WX[:, self.far_mask]) / p
        return inner, cross, far

    def gradient(self, u, p):
        """``dE^p/du_i``: the cell-tested discrete fractional p-Laplacian."""
        u = np.asarray(u, dtype=float)
        D = signed_power(u[:, None] - u[None, :], p)
        X = signed_power(u[:, None] - self.b[None, :], p)
        return np.sum(self.W * D, axis=1) + np.sum(self.Wx * X, axis=1)

    @property
    def box(self):
        """Range of the exterior values that actually interact; contains every minimiser."""
        active = self.Wx.sum(axis=0) > 0
        if not np.any(active):
            return 0.0, 0.0
        vals = self.b[active]
        return float(vals.min()), float(vals.max())

    def batch_energy(self, V, p, chunk=4096):
        """Energies of many interior vectors at once (rows of ``V``)."""
        V = np.atleast_2d(np.asarray(V, dtype=float))
        out = np.empty(V.shape[0])
        iu, ju = np.triu_indices(self.n, 1)
        wp = self.W[iu, ju]
        for a in range(0, V.shape[0], chunk):
            B = V[a:a + chunk]
            D = np.abs(B[:, iu] - B[:, ju])
            X = np.abs(B[:, :, None] - self.b[None, None, :])
            if p != 1:
                D = D**p
                X = X**p
            out[a:a + chunk] = (D @ wp + np.einsum("kix,ix->k", X, self.Wx)) / p
        return out

    def total_weight(self):
        return 0.5 * self.W.sum() + self.Wx.sum()

    def scale(self):
        """Energy scale used to normalise tolerances: oscillation of the data times total weight."""
        lo, hi = self.box
        return 1.0 + (hi - lo) * self.total_weight()


def build_interactions(w: WeightTable, cell_values, far_values, free) -> Interactions:
    """Interactions of the cells flagged in ``free`` (bool mask over all mesh cells)."""
    free = np.asarray(free, dtype=bool)
    ext = ~free
    P = w.pair_weights
    W = np.array(P[np.ix_(free, free)])
    far_w = w.far_moments[free] if w.mesh.far_field else np.zeros((free.sum(), 2))
    Wx = np.hstack([P[np.ix_(free, ext)], far_w])
    b = np.concatenate([np.asarray(cell_values, dtype=float)[ext], np.asarray(far_values, dtype=float)])
    far_mask = np.zeros(b.size, dtype=bool)
    far_mask[-2:] = True
    return Interactions(W, Wx, b, far_mask, w.mesh.h, free)


def interior_mask(mesh):
    m = np.zeros(mesh.n_cells, dtype=bool)
    m[mesh.interior] = True
    return m


def field_interactions(u: Field, w: WeightTable, free=None) -> Interactions:
    if free is None:
        free = interior_mask(u.mesh)
    return build_interactions(w, u.cell_values, u.exterior.far_field, free)


def problem_interactions(mesh: Mesh, phi: ExteriorData, w: WeightTable) -> Interactions:
    """Interactions of the interior cells with exterior data ``phi``; interior values unused."""
    dummy = Field(mesh, np.zeros(mesh.n_interior), phi)
    return field_interactions(dummy, w)


def _check(w, s, p):
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    if abs(w.alpha - s * p) > ALPHA_TOL:
        raise AlphaMismatch(f"weight table alpha={w.alpha} but s*p={s * p}")


@dataclass(frozen=True)
class EnergyBreakdown:
    s: float
    p: float
    interior_term: float
    cross_term: float
    far_term: float
    total: float

    def to_json(self):
        return {"s": self.s, "p": self.p, "interior_term": self.interior_term,
                "cross_term": self.cross_term, "far_term": self.far_term, "total": self.total}


def energy_breakdown(u: Field, s: float, p: float, w: WeightTable) -> EnergyBreakdown:
    """The three contributions of ``E_s^p(u)`` (Omega x Omega with 1/(2p), Omega x C(Omega) with 1/p)."""
    _check(w, s, p)
    inner, cross, far = field_interactions(u, w).energy_parts(u.interior_values, p)
    return EnergyBreakdown(s, p, inner, cross, far, inner + cross + far)


def energy(u: Field, s: float, p: float, w: WeightTable) -> float:
    return energy_breakdown(u, s, p, w).total


def subdomain_energy(u: Field, free, s: float, w: WeightTable) -> float:
    """``E_s(u, O)`` at p = 1 where ``O`` is the union of the cells flagged in ``free``."""
    _check(w, s, 1.0)
    free = np.asarray(free, dtype=bool)
    I = build_interactions(w, u.cell_values, u.exterior.far_field, free)
    return I.energy(u.cell_values[free], 1.0)


def seminorm(u: Field, s: float, p: float, w: WeightTable) -> float:
    """Gagliardo seminorm over Omega x Omega (ordered pairs, no 1/(2p) factor)."""
    _check(w, s, p)
    v = u.interior_values
    P = w.pair_weights[u.mesh.interior, u.mesh.interior]
    D = np.abs(v[:, None] - v[None, :]) ** p
    return float(np.sum(P * D)) ** (1.0 / p)


def lp_norm(u: Field, p: float) -> float:
    return float(u.mesh.h * np.sum(np.abs(u.interior_values) ** p)) ** (1.0 / p)


def sobolev_norm(u: Field, s: float, p: float, w: WeightTable) -> float:
    return seminorm(u, s, p, w) + lp_norm(u, p)


# --------------------------------------------------------------------------- tails

@dataclass(frozen=True)
class TailReport:
    s: float
    p: float
    values: np.ndarray  # cell averages of the tail
    l1_norm: float

    def to_json(self):
        return {"s": self.s, "p": self.p, "values": self.values.tolist(), "l1_norm": self.l1_norm}


def _cell_tails(phi: ExteriorData, s, p, mesh, w=None):
    """Integral of the tail over each interior cell (not yet divided by h)."""
    alpha = check_alpha(s * p)
    if w is None:
        w = assemble_weights(mesh, alpha)
    elif abs(w.alpha - alpha) > ALPHA_TOL:
        raise AlphaMismatch(f"weight table alpha={w.alpha} but s*p={alpha}")
    I = problem_interactions(mesh, phi, w)
    return I.Wx @ (np.abs(I.b) ** p)


def tail_report(phi: ExteriorData, s: float, p: float, mesh: Mesh, w=None) -> TailReport:
    cell = _cell_tails(phi, s, p, mesh, w)
    vals = cell / mesh.h
    return TailReport(s, p, vals, float(cell.sum()))


def diverges(partials, factor=DIVERGENCE_FACTOR):
    """Growing-window divergence: some partial exceeds ``factor`` times the first one."""
    partials = np.asarray(partials, dtype=float)
    if partials.size == 0 or not np.isfinite(partials).all():
        return not np.isfinite(partials).all()
    base = partials[0]
    if base <= 0:
        return bool(np.any(partials > 0)) and bool(np.max(partials) > factor * np.min(partials[partials > 0]))
    return bool(np.any(partials > factor * base))


def _cell_kernel(lo, hi, y, alpha):
    """``int_lo^hi |x - y|^-(1+alpha) dx`` for ``y`` outside ``[lo, hi]`` (vectorised in y)."""
    y = np.asarray(y, dtype=float)
    d1 = np.abs(y - lo)
    d2 = np.abs(y - hi)
    near, far = np.minimum(d1, d2), np.maximum(d1, d2)
    with np.errstate(divide="ignore"):
        return (near ** -alpha - far ** -alpha) / alpha


class Profile:
    """Exterior datum given as a function of position, vanishing for ``|y| < R``."""

    def __init__(self, fn, R, name="profile"):
        self.fn = fn
        self.R = float(R)
        self.name = name

    def __call__(self, y):
        return self.fn(y)


def profile_cell_tails(profile: Profile, s, p, omega, n_cells, radii):
    """Per-cell tail integrals of ``profile`` restricted to ``R < |y| < radius``.

    Returns an array ``(len(radii), n_cells)`` of cumulative values.  The
    profile must vanish on ``B_R`` and ``Omega`` must lie inside ``B_R``; the
    integrand is then never singular, so ``s p >= 1`` is allowed here.
    """
    alpha = float(s * p)
    if not alpha > 0:
        raise DomainError(f"s*p must be > 0, got {alpha}")
    lo, hi = omega
    if not (-profile.R < lo < hi < profile.R):
        raise DomainError("Omega must be compactly contained in B_R")
    edges = np.linspace(lo, hi, n_cells + 1)
    out = np.zeros((len(radii), n_cells))
    prev = profile.R
    acc = np.zeros(n_cells)
    for k, rad in enumerate(radii):
        if rad > prev:
            # geometric sub-panels keep quad accurate over long shells
            pts = np.geomspace(prev, rad, max(2, int(math.log2(rad / prev)) + 2))
            for i in range(n_cells):
                a, b = edges[i], edges[i + 1]

                def integrand(t, a=a, b=b):
                    g = abs(profile(t)) ** p * _cell_kernel(a, b, t, alpha)
                    g += abs(profile(-t)) ** p * _cell_kernel(a, b, -t, alpha)
                    return g

                for t0, t1 in zip(pts[:-1], pts[1:]):
                    acc[i] += integrate.quad(integrand, t0, t1, epsabs=0.0, epsrel=1e-10, limit=200)[0]
            prev = rad
        out[k] = acc
    return out


def _exterior_cell_tails_growing(phi: ExteriorData, s, p, mesh, radii):
    """Cumulative per-cell tails for mesh exterior data with the far constant cut at ``radii``.

    ``radii`` are distances from Omega; the window always counts in full.
    """
    alpha = check_alpha(s * p)
    w = assemble_weights(mesh.__class__(mesh.omega_lo, mesh.omega_hi, mesh.n_interior,
                                        mesh.window_halfwidth, mesh.n_window_per_side, False), alpha)
    window_part = problem_interactions(w.mesh, phi, w).Wx @ (np.abs(np.concatenate(
        [phi.window_values, [0.0, 0.0]])) ** p)
    edges = mesh.cell_edges[mesh.interior.start:mesh.interior.stop + 1]
    lo, hi = edges[:-1], edges[1:]
    beta = 1.0 - alpha
    cl, cr = (abs(c) ** p for c in phi.far_field)
    L = mesh.window_halfwidth
    a, b = mesh.omega_lo, mesh.omega_hi
    out = []
    for r in radii:
        if not mesh.far_field or r <= L:
            out.append(window_part.copy())
            continue
        # int over (b+L, b+r) of the cell kernel, closed form in G
        def band(e_near_r, e_far_r, side):
            if side == "right":
                n1, f1 = e_near_r - hi, e_near_r - lo
                n2, f2 = e_far_r - hi, e_far_r - lo
            else:
                n1, f1 = lo - e_near_r, hi - e_near_r
                n2, f2 = lo - e_far_r, hi - e_far_r
            g = lambda fr, nr: (fr**beta - nr**beta) / (alpha * beta)
            return g(f1, n1) - g(f2, n2)

        right = band(b + L, b + r, "right")
        left = band(a - L, a - r, "left")
        out.append(window_part + cr * right + cl * left)
    return np.array(out)


@dataclass(frozen=True)
class TailSupReport:
    cond_i: bool
    cond_ii: bool
    cond_iii: bool
    radii: np.ndarray
    sup_cellwise_partials: np.ndarray
    sup_l1_partials: np.ndarray
    t1_partials: np.ndarray
    tq_partials: np.ndarray

    def to_json(self):
        return {"cond_i": self.cond_i, "cond_ii": self.cond_ii, "cond_iii": self.cond_iii,
                "radii": self.radii.tolist(),
                "sup_cellwise_partials": self.sup_cellwise_partials.tolist(),
                "sup_l1_partials": self.sup_l1_partials.tolist(),
                "t1_partials": self.t1_partials.tolist(), "tq_partials": self.tq_partials.tolist()}


def growing_radii(base, doublings=MAX_DOUBLINGS):
    return base * 2.0 ** np.arange(doublings + 1)


def tail_sup_check(phi, s, q, p_grid, mesh=None, base_window=1.0, n_cells=8,
                   doublings=MAX_DOUBLINGS) -> TailSupReport:
    """Discrete version of the three equivalent tail conditions, on growing windows.

    ``phi`` is either :class:`ExteriorData` (with ``mesh``) or a :class:`Profile`.
    Condition (i) takes the cellwise maximum over ``p_grid`` together with the
    endpoint ``p = 1`` (the supremum over ``(1, q)`` dominates the ``p -> 1``
    limit); (ii) the maximum of the L1 norms; (iii) requires both ``T^1`` and
    ``T^q``.  A quantity is declared infinite when its partial over the window
    ``base * 2^k`` exceeds 10x the partial at ``base`` for some ``k <= 16``.
    """
    p_grid = [float(p) for p in p_grid]
    if not all(1 < p < q for p in p_grid):
        raise DomainError("p_grid must lie in (1, q)")
    if s * q >= 1:
        raise DomainError("s*q must be < 1")
    exps = [1.0] + p_grid + [q]
    if isinstance(phi, Profile):
        if mesh is not None:
            omega, n = (mesh.omega_lo, mesh.omega_hi), mesh.n_interior
        else:
            omega, n = (0.0, 1.0), n_cells
        radii = phi.R + growing_radii(base_window, doublings)
        cell = {p: profile_cell_tails(phi, s, p, omega, n, radii) for p in exps}
    else:
        if mesh is None:
            raise DomainError("mesh is required for ExteriorData")
        base = mesh.window_halfwidth or mesh.h
        radii = growing_radii(base, doublings)
        cell = {p: _exterior_cell_tails_growing(phi, s, p, mesh, radii) for p in exps}
    sup_grid = [1.0] + p_grid
    sup_cell = np.max(np.stack([cell[p] for p in sup_grid]), axis=0).sum(axis=1)
    sup_l1 = np.max(np.stack([cell[p].sum(axis=1) for p in sup_grid]), axis=0)
    t1 = cell[1.0].sum(axis=1)
    tq = cell[q].sum(axis=1)
    return TailSupReport(
        cond_i=not diverges(sup_cell), cond_ii=not diverges(sup_l1),
        cond_iii=not (diverges(t1) or diverges(tq)),
        radii=np.asarray(radii), sup_cellwise_partials=sup_cell, sup_l1_partials=sup_l1,
        t1_partials=t1, tq_partials=tq)


# --------------------------------------------------------------------------- inequalities

@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    rhs: float
    holds: bool

    def to_json(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "holds": self.holds}


def embedding_constant(mesh: Mesh, s, sigma, p):
    """Factor in ``[u]_{W^{sigma,1}} <= factor * [u]_{W^{s,p}}`` for n = 1."""
    c_n_omega = mesh.length * 2.0  # |Omega| * H^0(dB_1)
    return (c_n_omega * (p - 1) / (p * (s - sigma))) ** ((p - 1) / p) * mesh.length ** (s - sigma)


def embedding_check(u: Field, s, sigma, p, w_sp: WeightTable, w_sigma: WeightTable,
                    slack=1e-12) -> InequalityReport:
    if not (0 < sigma < s < 1) or p <= 1:
        raise DomainError(f"need 0 < sigma < s < 1 and p > 1 (got s={s}, sigma={sigma}, p={p})")
    lhs = seminorm(u, sigma, 1.0, w_sigma)
    rhs = embedding_constant(u.mesh, s, sigma, p) * seminorm(u, s, p, w_sp)
    return InequalityReport(lhs, rhs, bool(lhs <= rhs + slack))


def apriori_constant(mesh: Mesh):
    """Explicit constant of the uniform a priori bound, specialised to n = 1.

    Seminorm part contributes ``2^(1/p) <= 2``; the Poincare part contributes
    ``2 sup_s (2d)^s sup_p ((2d)^n / |Omega_d minus Omega|)^(1/p)`` with
    ``|Omega_d minus Omega| = 2d`` for an interval.
    """
    d = mesh.length
    ring = 2.0 * d
    return 2.0 + 2.0 * max(1.0, 2.0 * d) * max(1.0, (2.0 * d) / ring)


def apriori_check(u_min: Field, phi: ExteriorData, s, p, w=None, slack=1e-12) -> InequalityReport:
    mesh = u_min.mesh
    if w is None:
        w = assemble_weights(mesh, s * p)
    lhs = sobolev_norm(u_min, s, p, w)
    tail = tail_report(phi, s, p, mesh, w).l1_norm
    rhs = apriori_constant(mesh) * (1.0 + tail)
    return InequalityReport(lhs, rhs, bool(lhs <= rhs + slack))


def renormalized_diff(u: Field, v: Field, s: float, w: WeightTable) -> float:
    """Pairwise-combined ``iint_Q (|u(x)-u(y)| - |v(x)-v(y)|) k(x,y)`` over ordered pairs."""
    if not u.same_exterior(v):
        raise ExteriorMismatch("renormalized difference needs equal exterior data")
    _check(w, s, 1.0)
    I = field_interactions(u, w)
    a, c = u.interior_values, v.interior_values
    inner = np.abs(a[:, None] - a[None, :]) - np.abs(c[:, None] - c[None, :])
    cross = np.abs(a[:, None] - I.b[None, :]) - np.abs(c[:, None] - I.b[None, :])
    return float(np.sum(I.W * inner) + 2.0 * np.sum(I.Wx * cross))


def coarea_energy(u: Field, s: float, w: WeightTable) -> float:
    """``E^1(u)`` via the generalised coarea formula: integrate perimeters of superlevel sets."""
    _check(w, s, 1.0)
    lo_hi = np.unique(np.concatenate([u.interior_values, u.exterior.all_values(u.mesh)]))
    total = 0.0
    for lo, hi in zip(lo_hi[:-1], lo_hi[1:]):
        E = level_set(u, hi)
        total += (hi - lo) * energy(indicator_field(E), s, 1.0, w)
    return total
