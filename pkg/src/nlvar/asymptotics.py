"""Parameter sweeps towards p = 1 and s = 1, recovery sequences and pathological exterior data.

Every sweep keeps the mesh fixed: the limits studied are limits of the
discrete functionals, which the finite-sum arguments (Fatou, dominated
convergence) justify verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .certificate import check_certificate, find_certificate
from .domain import ExteriorData, Field, Mesh, truncate_field
from .energy import (Profile, _exterior_cell_tails_growing, apriori_constant, diverges, energy, growing_radii,
                     lp_norm, problem_interactions, profile_cell_tails, seminorm, subdomain_energy,
                     tail_report)
from .errors import DomainError, ParamError, ScheduleError
from .kernel import assemble_weights
from .solver_one import OneOptions, coarea_cleanup, solve_one
from .solver_smooth import SolveOptions, solve_p_detailed

SP_MARGIN = 1e-3
CAUCHY_TOL = 1e-6
DIVERGENCE_FACTOR = 10.0


def p_schedule(k_max, k_min=1):
    """``p_k = 1 + 2^-k``."""
    return [1.0 + 2.0 ** -k for k in range(k_min, k_max + 1)]


def s_schedule(k_max, k_min=1):
    """``s_k = 1 - 2^-k``."""
    return [1.0 - 2.0 ** -k for k in range(k_min, k_max + 1)]


@dataclass(frozen=True)
class SweepRow:
    """One sweep point: named energies, distances and residual summaries."""

    param: float
    energies: dict
    distances: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    param_name: str = "p"

    def __post_init__(self):
        for group in (self.energies, self.distances, self.residuals):
            for k, v in group.items():
                if not math.isfinite(float(v)):
                    raise DomainError(f"non-finite sweep entry {k}={v} at {self.param_name}={self.param}")

    def flat(self):
        out = {self.param_name: float(self.param)}
        for group in (self.energies, self.distances, self.residuals):
            out.update({k: float(v) for k, v in group.items()})
        return out


def _l1(mesh, a, b):
    return float(mesh.h * np.sum(np.abs(np.asarray(a) - np.asarray(b))))


def _check_decreasing_to_one(ps):
    ps = [float(p) for p in ps]
    if not ps or any(p <= 1 for p in ps) or any(b >= a for a, b in zip(ps, ps[1:])):
        raise ScheduleError("p schedule must be strictly decreasing and > 1")
    return ps


def _max_abs_phi(mesh, phi):
    vals = phi.all_values(mesh)
    return float(np.max(np.abs(vals))) if vals.size else 0.0


# --------------------------------------------------------------------------- p -> 1

@dataclass
class PSweep:
    rows: list
    fields: list
    reference: Field
    reference_energy: float
    candidate: Field | None

    @property
    def cauchy(self):
        return self.candidate is not None


def p_sweep_run(mesh: Mesh, phi: ExteriorData, s: float, p_schedule, opts: SolveOptions | None = None,
                one_opts: OneOptions | None = None) -> PSweep:
    """Solve along ``p_schedule`` and compare with a p = 1 reference from :func:`solve_one`.

    The accumulation candidate is the last iterate when the last two iterates
    are ``1e-6`` close in L1(Omega); otherwise none is claimed.
    """
    ps = _check_decreasing_to_one(p_schedule)
    if any(s * p >= 1 for p in ps):
        raise ScheduleError("every scheduled p needs s*p < 1")
    w1 = assemble_weights(mesh, s)
    ref, _ = solve_one(mesh, phi, s, one_opts, w1)
    E1 = energy(ref, s, 1.0, w1)
    bound = _max_abs_phi(mesh, phi)
    rows, fields = [], []
    prev = None
    for p in ps:
        w = assemble_weights(mesh, s * p)
        o = SolveOptions(**{**(opts.__dict__ if opts else {}), "init": "supplied" if prev is not None else "exterior-mean",
                            "u0": prev.interior_values if prev is not None else None})
        res = solve_p_detailed(mesh, phi, s, p, o, w)
        u = res.field
        rows.append(SweepRow(p, {
            "min_energy": res.energy,
            "fixed_energy": energy(ref, s, p, w),
            "one_energy": E1,
            "energy_at_one": energy(u, s, 1.0, w1),
        }, {
            "l1_to_reference": _l1(mesh, u.interior_values, ref.interior_values),
            "l1_to_previous": _l1(mesh, u.interior_values, prev.interior_values) if prev is not None else 0.0,
        }, {
            "grad_norm": res.grad_norm,
            "gap": res.gap,
            "max_principle_excess": max(0.0, float(np.max(np.abs(u.interior_values))) - bound),
        }))
        fields.append(u)
        prev = u
    cand = fields[-1] if len(fields) >= 2 and rows[-1].distances["l1_to_previous"] <= CAUCHY_TOL else None
    return PSweep(rows, fields, ref, E1, cand)


def p_sweep(mesh: Mesh, phi: ExteriorData, s: float, p_schedule, opts=None):
    return p_sweep_run(mesh, phi, s, p_schedule, opts).rows


def fixed_argument_errors(u: Field, s: float, p_schedule):
    """``|E_s^p(u) - E_s^1(u)|`` along the schedule for a fixed field."""
    E1 = energy(u, s, 1.0, assemble_weights(u.mesh, s))
    return [abs(energy(u, s, p, assemble_weights(u.mesh, s * p)) - E1) for p in p_schedule]


# --------------------------------------------------------------------------- s_p schedule

def s_p(s, p, n=1):
    """``s_p = s + n - n/p``, so that ``n + s_p p = (n + s) p``."""
    return s + n - n / p


@dataclass
class SpSweep:
    rows: list
    fields: list
    reference: Field
    reference_energy: float
    candidate: Field
    candidate_report: object
    tail_sup: float


def sp_sweep_run(mesh: Mesh, phi: ExteriorData, s: float, p_schedule, opts: SolveOptions | None = None,
                 cert_tol: float = 1e-5) -> SpSweep:
    """Solve the ``(s_p, p)`` problems and test the p = 1 limit candidate.

    The candidate is the last iterate rebuilt from its least-perimeter
    superlevel sets (the p = 1 problem is degenerate, so the raw iterate sits
    next to, not on, a minimiser); its certificate comes from
    :func:`find_certificate` and is checked at ``cert_tol``.
    """
    ps = _check_decreasing_to_one(p_schedule)
    for p in ps:
        if s_p(s, p) * p >= 1 - SP_MARGIN:
            raise ScheduleError(f"s_p * p = {s_p(s, p) * p} >= 1 - {SP_MARGIN} at p = {p}")
    # bounded-tail condition on growing windows, sup over the schedule
    tails = []
    radii = growing_radii(mesh.window_halfwidth or mesh.h)
    for p in ps:
        part = _exterior_cell_tails_growing(phi, s_p(s, p), p, mesh, radii).sum(axis=1)
        if diverges(part):
            raise DomainError(f"tail of the exterior data diverges at p = {p}")
        tails.append(tail_report(phi, s_p(s, p), p, mesh).l1_norm)
    w1 = assemble_weights(mesh, s)
    ref, _ = solve_one(mesh, phi, s, w=w1)
    E1 = energy(ref, s, 1.0, w1)
    rows, fields, prev = [], [], None
    for p, tail in zip(ps, tails):
        sp = s_p(s, p)
        w = assemble_weights(mesh, sp * p)
        o = SolveOptions(**{**(opts.__dict__ if opts else {}), "init": "supplied" if prev is not None else "exterior-mean",
                            "u0": prev.interior_values if prev is not None else None})
        res = solve_p_detailed(mesh, phi, sp, p, o, w)
        u = res.field
        rows.append(SweepRow(p, {
            "s_p": sp,
            "min_energy": res.energy,
            "one_energy": E1,
            "energy_at_one": energy(u, s, 1.0, w1),
        }, {
            "l1_to_reference": _l1(mesh, u.interior_values, ref.interior_values),
        }, {
            "gap": res.gap,
            "tail_l1": tail,
        }))
        fields.append(u)
        prev = u
    I1 = problem_interactions(mesh, phi, w1)
    cand = Field(mesh, coarea_cleanup(I1, fields[-1].interior_values), phi)
    rep = check_certificate(cand, find_certificate(cand, s, w1), s, w1, cert_tol)
    return SpSweep(rows, fields, ref, E1, cand, rep, max(tails))


def sp_sweep(mesh: Mesh, phi: ExteriorData, s: float, p_schedule, opts=None):
    return sp_sweep_run(mesh, phi, s, p_schedule, opts).rows


# --------------------------------------------------------------------------- s -> 1

def _window_mask(mesh: Mesh, window, allow_full):
    lo, hi = float(window[0]), float(window[1])
    a, b = mesh.omega_lo, mesh.omega_hi
    full = allow_full and lo == a and hi == b
    if not full and not (a < lo < hi < b):
        raise DomainError(f"O = ({lo}, {hi}) is not compactly contained in ({a}, {b})")
    edges = mesh.cell_edges
    tol = 1e-9 * mesh.h
    k0 = np.flatnonzero(np.abs(edges - lo) <= tol)
    k1 = np.flatnonzero(np.abs(edges - hi) <= tol)
    if k0.size != 1 or k1.size != 1:
        raise DomainError(f"O = ({lo}, {hi}) is not aligned with the mesh")
    mask = np.zeros(mesh.n_cells, dtype=bool)
    mask[k0[0]:k1[0]] = True
    return mask, int(k0[0]), int(k1[0])


def jump_mass(u: Field, window) -> float:
    """Total jump of ``u`` at cell interfaces in the closed window."""
    mesh = u.mesh
    _, k0, k1 = _window_mask(mesh, window, True)
    v = u.cell_values
    # interface k sits between cells k-1 and k
    return float(sum(abs(v[k] - v[k - 1]) for k in range(max(k0, 1), min(k1, mesh.n_cells - 1) + 1)))


def s_sweep(u: Field, window, s_schedule, allow_full: bool = False):
    """Rows of ``(1 - s) E_s(u, O)`` with exact weights; ``target`` is the jump mass in the closure of O.

    ``allow_full`` lets ``O`` equal Omega, which is only meant for checkpoints.
    """
    mesh = u.mesh
    mask, k0, k1 = _window_mask(mesh, window, allow_full)
    v = u.cell_values
    for k in (k0, k1):
        if 0 < k < mesh.n_cells and v[k] != v[k - 1] and not allow_full:
            raise DomainError(f"window endpoint {mesh.cell_edges[k]} is a jump point")
    target = jump_mass(u, window)
    rows = []
    for s in s_schedule:
        w = assemble_weights(mesh, s)
        E = subdomain_energy(u, mask, s, w)
        rows.append(SweepRow(s, {"energy": E, "scaled_energy": (1.0 - s) * E, "target": target},
                             param_name="s"))
    return rows


def richardson(values):
    """First-order Richardson extrapolation for errors halving along the schedule: ``2 v_{k+1} - v_k``."""
    v = np.asarray(values, dtype=float)
    return 2.0 * v[1:] - v[:-1]


def step_closed_form(s):
    """``(1 - s) E_s`` of the unit step at 1/2 on O = (1/4, 3/4): ``2^-(1-s) / s``."""
    return 2.0 ** -(1.0 - s) / s


# --------------------------------------------------------------------------- recovery

def recovery_sequence(u: Field, s: float, p_schedule, M_schedule):
    """Truncations ``u_k = T_{M_k} u`` evaluated at ``p_k``, compared with ``E_s^1(u)``."""
    ps = _check_decreasing_to_one(p_schedule)
    Ms = [float(M) for M in M_schedule]
    if len(Ms) != len(ps) or any(b < a for a, b in zip(Ms, Ms[1:])) or any(M < 0 for M in Ms):
        raise ScheduleError("M schedule must be nondecreasing, nonnegative and match the p schedule")
    E1 = energy(u, s, 1.0, assemble_weights(u.mesh, s))
    rows = []
    for p, M in zip(ps, Ms):
        w = assemble_weights(u.mesh, s * p)
        uk = truncate_field(u, M)
        Ek = energy(uk, s, p, w)
        Eu = energy(u, s, p, w)
        rows.append(SweepRow(p, {"energy": Ek, "untruncated_energy": Eu, "target": E1},
                             {"l1_to_u": _l1(u.mesh, uk.interior_values, u.interior_values)},
                             {"M": M, "truncation_excess": max(0.0, Ek - Eu)}))
    return rows


# --------------------------------------------------------------------------- compactness

def frak_c1(mesh: Mesh, s, sigma):
    """Embedding constant of ``W^{s,p} -> W^{sigma,1}`` uniform in p (n = 1).

    ``C_1 d^(s - sigma) + C_2`` with ``C_1 = sup_p (A (p-1)/p)^((p-1)/p)``,
    ``A = 2 |Omega| / (s - sigma)`` and ``C_2 = sup_p |Omega|^((p-1)/p)``.
    """
    if not 0 < sigma < s < 1:
        raise DomainError("need 0 < sigma < s < 1")
    L = mesh.length
    A = 2.0 * L / (s - sigma)
    # t log(A t) is convex in t = (p-1)/p, so the sup over (0, 1) sits at an endpoint
    c1 = max(1.0, A)
    return c1 * L ** (s - sigma) + max(1.0, L)


def equicoercivity_bounds(fields, phi: ExteriorData, s, p_list, sigma=None):
    """``(norms, bound)``: W^{sigma,1} norms of the iterates and the uniform bound ``c1 c0 (1 + sup tail)``."""
    if not fields:
        return [], 0.0
    mesh = fields[0].mesh
    sigma = s / 2 if sigma is None else sigma
    ws = assemble_weights(mesh, sigma)
    norms = [seminorm(u, sigma, 1.0, ws) + lp_norm(u, 1.0) for u in fields]
    tail = max(tail_report(phi, s, p, mesh).l1_norm for p in p_list)
    return norms, frak_c1(mesh, s, sigma) * apriori_constant(mesh) * (1.0 + tail)


# --------------------------------------------------------------------------- pathological data

@dataclass
class PathologyReport:
    kind: str
    params: dict
    windows: np.ndarray  # window sizes or k cut-offs
    partials: dict  # label -> partial sums along windows
    diverging: dict  # label -> bool
    increment_ratios: dict  # label -> max ratio of successive increments (converging ones)
    data: list  # (window half width, ExteriorData) samples

    def to_json(self):
        return {"kind": self.kind, "params": self.params, "windows": np.asarray(self.windows).tolist(),
                "partials": {k: np.asarray(v).tolist() for k, v in self.partials.items()},
                "diverging": self.diverging, "increment_ratios": self.increment_ratios}


def _max_increment_ratio(partials):
    inc = np.diff(np.asarray(partials, dtype=float))
    if inc.size < 2:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(inc[:-1] > 0, inc[1:] / inc[:-1], 0.0)
    return float(np.max(r))


def bolas_profile(s, R):
    """``|y|^s / log|y|`` outside ``B_R``, zero inside."""
    def fn(y):
        a = abs(y)
        return a**s / math.log(a) if a >= R else 0.0
    return Profile(fn, R, "bolas")


def fgr_annuli(k_max, n=1):
    """Radii ``r_k`` and measures ``|A_k| = H^{n-1}(dB_1) / (n k^2 log^2 k)`` for ``k = 2..k_max``."""
    k = np.arange(2, k_max + 1, dtype=float)
    lg2 = np.log(k) ** 2
    r = ((1.0 + k ** (n + 2) * lg2) / (k**2 * lg2)) ** (1.0 / n)
    sphere = 2.0 if n == 1 else 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    return k, r, sphere / (n * k**2 * lg2)


def fgr_profile(s, k_max, R=2.0):
    """``f(y) |y|^(1+s)`` outside ``B_R`` with ``f = k`` on the annulus ``A_k`` (n = 1)."""
    k, r, _ = fgr_annuli(k_max)

    def fn(y):
        a = abs(y)
        if a < R:
            return 0.0
        j = int(math.floor(a))
        if 2 <= j <= k_max and a < r[j - 2]:
            return j * a ** (1.0 + s)
        return 0.0
    return Profile(fn, R, "fgr")


def _sample_exterior(profile, mesh_h, halfwidth, omega=(0.0, 1.0), max_cells=4096):
    """Window cell averages of ``profile`` on a window of (about) the given half width."""
    M = int(math.ceil(halfwidth / mesh_h - 1e-9))
    if M == 0 or 2 * M > max_cells:
        return None
    lo, hi = omega
    left = lo - mesh_h * np.arange(M, 0, -1)
    right = hi + mesh_h * np.arange(0, M)
    vals = []
    for a in np.concatenate([left, right]):
        vals.append(integrate.quad(profile, a, a + mesh_h, limit=200)[0] / mesh_h)
    return ExteriorData(vals, (0.0, 0.0))


def pathology_phi(kind: str, params: dict | None = None) -> PathologyReport:
    """Growing-window diagnostics for the two pathological exterior data.

    bolas (params ``R``, ``s``, ``p_values``, ``omega``, ``doublings``,
    ``base``, ``n_cells``): tail L1 partials over windows ``R + base 2^k``;
    ``T^1`` should exceed ``10x`` its first partial, ``T^p`` (p > 1) should not.

    fgr (params ``k_max``, ``p_values``, ``n``): partial sums of
    ``sum k^p |A_k|`` at ``k = 2^j``; p = 1 converges, p > 1 diverges.
    """
    params = dict(params or {})
    if kind == "bolas":
        R = float(params.get("R", 4.0))
        s = float(params.get("s", 0.5))
        ps = [float(p) for p in params.get("p_values", [1.0, 2.0])]
        omega = tuple(params.get("omega", (0.0, 1.0)))
        doublings = int(params.get("doublings", 16))
        base = float(params.get("base", 1.0))
        n_cells = int(params.get("n_cells", 8))
        if R < 2 or not 0 < s < 1 or doublings < 0 or base <= 0 or n_cells < 1:
            raise ParamError(f"invalid bolas parameters {params}")
        if not (-R < omega[0] < omega[1] < R):
            raise ParamError("Omega must be compactly contained in B_R")
        if any(p < 1 for p in ps):
            raise ParamError("every p needs p >= 1")
        prof = bolas_profile(s, R)
        windows = base * 2.0 ** np.arange(doublings + 1) if doublings > 0 else np.zeros(0)
        partials, div, ratios = {}, {}, {}
        for p in ps:
            label = f"T{p:g}"
            if windows.size:
                part = profile_cell_tails(prof, s, p, omega, n_cells, R + windows).sum(axis=1)
            else:
                part = np.zeros(0)
            partials[label] = part
            div[label] = bool(diverges(part, DIVERGENCE_FACTOR)) if part.size else False
            ratios[label] = _max_increment_ratio(part)
        data = []
        h = (omega[1] - omega[0]) / n_cells
        for L in windows:
            ext = _sample_exterior(prof, h, R + L, omega)
            if ext is None:
                break
            data.append((float(h * (ext.window_values.size // 2)), ext))
        return PathologyReport("bolas", {"R": R, "s": s, "p_values": ps, "omega": list(omega),
                                         "doublings": doublings, "base": base, "n_cells": n_cells},
                               windows, partials, div, ratios, data)
    if kind == "fgr":
        k_max = int(params.get("k_max", 2**16))
        ps = [float(p) for p in params.get("p_values", [1.0, 1.1])]
        n = int(params.get("n", 1))
        if n < 1 or any(p < 1 for p in ps) or k_max < 0:
            raise ParamError(f"invalid fgr parameters {params}")
        if k_max < 2:
            return PathologyReport("fgr", {"k_max": k_max, "p_values": ps, "n": n}, np.zeros(0),
                                   {f"S{p:g}": np.zeros(0) for p in ps}, {f"S{p:g}": False for p in ps},
                                   {f"S{p:g}": 0.0 for p in ps}, [])
        k, _, meas = fgr_annuli(k_max, n)
        cut = 2 ** np.arange(1, int(math.floor(math.log2(k_max))) + 1)
        partials, div, ratios = {}, {}, {}
        for p in ps:
            label = f"S{p:g}"
            cs = np.cumsum(k**p * meas)
            part = cs[cut - 2]
            partials[label] = part
            div[label] = bool(diverges(part, DIVERGENCE_FACTOR))
            ratios[label] = _max_increment_ratio(part)
        return PathologyReport("fgr", {"k_max": k_max, "p_values": ps, "n": n}, cut.astype(float),
                               partials, div, ratios, [])
    raise ParamError(f"unknown pathology kind {kind!r}")
