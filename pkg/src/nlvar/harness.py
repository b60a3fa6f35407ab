"""Config-driven experiments: resolve a JSON config, run it, write manifest, CSV and summary.

Output directory layout for one run::

    manifest.json   resolved config, tool version, file list
    results.csv     one row per sweep point or instance (header row, LF endings)
    summary.json    pass/fail for every invariant the experiment asserts
    results.dat     optional whitespace table (``--gnuplot``)

Floats are written with ``repr`` (shortest round-trip form) and nothing
time-dependent goes to disk, so a config and seed determine the bytes.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (SP_MARGIN, p_schedule, pathology_phi, p_sweep_run, recovery_sequence, richardson,
                          s_schedule, s_sweep, sp_sweep_run, step_closed_form)
from .certificate import batch_minimality_gap, check_certificate, competitor_families, corollary_sets_check
from .domain import CellSet, ExteriorData, Field, build_mesh, indicator_field
from .energy import (apriori_check, coarea_energy, embedding_constant, energy, problem_interactions)
from .errors import ConfigError, NlvarError
from .kernel import Cell, assemble_weights, pair_weight
from .oracle import fd_gradient_oracle, lp_min_one, quad_weight_oracle
from .perimeter import level_set_check, regularity_report
from .solver_one import certificate_matrices, extremal_minimizer, solve_one
from .solver_smooth import plap_apply, solve_p

KINDS = ("p_sweep", "sp_sweep", "s_sweep", "recovery", "pathology", "perimeter", "equivalence", "regularity",
         "kernel", "gradient", "certificates", "embedding", "apriori", "coarea")

# kinds whose instances are drawn at random and therefore need a seed
RANDOM_KINDS = {"perimeter", "equivalence", "regularity", "kernel", "gradient", "certificates", "embedding",
                "apriori", "coarea", "recovery"}
NEEDS_MESH = set(KINDS) - {"pathology", "kernel"}
NEEDS_EXTERIOR = {"p_sweep", "sp_sweep", "pathology"}


# --------------------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    kind: str
    mesh: dict | None = None
    exterior: dict | None = None
    params: dict = field(default_factory=dict)
    seed: int | None = None
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        kind = d.get("kind")
        if kind not in KINDS:
            raise ConfigError("kind", f"unknown or missing experiment kind {kind!r}; expected one of {KINDS}")
        cfg = cls(kind, d.get("mesh"), d.get("exterior"), dict(d.get("params") or {}), d.get("seed"),
                  d.get("output_dir"))
        cfg.validate()
        return cfg

    def validate(self):
        if self.kind in NEEDS_MESH:
            if not isinstance(self.mesh, dict):
                raise ConfigError("mesh")
            if "n_interior" not in self.mesh:
                raise ConfigError("mesh.n_interior")
        if self.kind in NEEDS_EXTERIOR and not isinstance(self.exterior, dict):
            raise ConfigError("exterior")
        if self.exterior is not None and self.exterior.get("type") == "random" and self.seed is None:
            raise ConfigError("seed", "seed is mandatory when the exterior data is random")
        if self.kind in RANDOM_KINDS and self.seed is None:
            raise ConfigError("seed", f"seed is mandatory for {self.kind}")
        if self.seed is not None and (not isinstance(self.seed, int) or isinstance(self.seed, bool)):
            raise ConfigError("seed", "seed must be an integer")
        for key in REQUIRED_PARAMS.get(self.kind, ()):
            if key not in self.params:
                raise ConfigError(f"params.{key}")

    def to_json(self):
        return {"kind": self.kind, "mesh": self.mesh, "exterior": self.exterior, "params": self.params,
                "seed": self.seed, "output_dir": self.output_dir}


REQUIRED_PARAMS = {
    "p_sweep": ("s",), "sp_sweep": ("s",), "recovery": ("s",), "perimeter": ("s",), "equivalence": ("s",),
    "regularity": ("s",), "certificates": ("s",), "coarea": ("s",),
}


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path}: invalid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(d)


def _mesh_from(spec):
    try:
        omega = spec.get("omega", [0.0, 1.0])
        n = int(spec["n_interior"])
        if "window_cells" in spec:
            M = int(spec["window_cells"])
            L = M * (omega[1] - omega[0]) / n
        else:
            L = float(spec.get("halfwidth", 0.0))
            M = int(spec.get("cells_per_side", 0))
        return build_mesh(omega, n, L, M, bool(spec.get("far_field", True)))
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, NlvarError):
            raise ConfigError("mesh", str(exc)) from exc
        raise ConfigError("mesh", f"malformed mesh spec: {exc}") from exc


def _exterior_from(spec, mesh, rng):
    kind = spec.get("type")
    try:
        if kind == "constant":
            return ExteriorData.constant(mesh, float(spec["value"]))
        if kind == "window-values":
            return ExteriorData(spec["window"], tuple(spec.get("far", (0.0, 0.0))))
        if kind == "indicator":
            return ExteriorData(np.asarray(spec["window"], dtype=bool).astype(float),
                                tuple(float(bool(f)) for f in spec.get("far", (0, 0))))
        if kind == "random":
            lo, hi = float(spec.get("low", 0.0)), float(spec.get("high", 1.0))
            return ExteriorData(rng.uniform(lo, hi, mesh.n_window), tuple(rng.uniform(lo, hi, 2)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("exterior", f"malformed exterior spec: {exc}") from exc
    raise ConfigError("exterior.type", f"unknown exterior type {kind!r}")


def _schedule(spec, default_kmin, default_kmax, fn):
    if spec is None:
        return fn(default_kmax, default_kmin)
    if isinstance(spec, dict):
        return fn(int(spec.get("k_max", default_kmax)), int(spec.get("k_min", default_kmin)))
    return [float(x) for x in spec]


# --------------------------------------------------------------------------- outcome

@dataclass
class Outcome:
    columns: list
    rows: list
    checks: dict
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c["pass"] for c in self.checks.values())


def _check(value, limit, passed=None, cmp="<="):
    if passed is None:
        passed = value <= limit if cmp == "<=" else value >= limit
    return {"pass": bool(passed), "value": _num(value), "limit": _num(limit)}


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def _rows_from_sweep(rows):
    flat = [r.flat() for r in rows]
    cols = list(flat[0].keys()) if flat else []
    return cols, [[f[c] for c in cols] for f in flat]


# --------------------------------------------------------------------------- experiments

def exp_kernel(cfg, rng):
    P = cfg.params
    n = int(P.get("n_cases", 100))
    rtol = float(P.get("rtol", 1e-10))
    add_tol = float(P.get("additivity_tol", 1e-12))
    rows, worst, worst_add = [], 0.0, 0.0
    for k in range(n):
        alpha = float(rng.uniform(0.01, 0.99))
        a0 = float(rng.uniform(-4, 4))
        wa, wb = (float(10 ** rng.uniform(-2, 0.5)) for _ in range(2))
        gap = 0.0 if rng.random() < 0.25 else float(10 ** rng.uniform(-3, 1))
        a = Cell(a0, a0 + wa)
        b = Cell(a.hi + gap, a.hi + gap + wb)
        closed = pair_weight(a, b, alpha)
        quad = quad_weight_oracle(a, b, alpha)
        rel = abs(closed - quad) / abs(quad)
        t = float(rng.uniform(0.1, 0.9))
        mid = b.lo + t * wb
        split = pair_weight(a, Cell(b.lo, mid), alpha) + pair_weight(a, Cell(mid, b.hi), alpha)
        add = abs(split - closed) / closed
        worst, worst_add = max(worst, rel), max(worst_add, add)
        rows.append([k, alpha, a.lo, a.hi, b.lo, b.hi, closed, quad, rel, add])
    cols = ["case", "alpha", "a_lo", "a_hi", "b_lo", "b_hi", "closed_form", "quadrature", "rel_err",
            "additivity_err"]
    return Outcome(cols, rows, {"closed_vs_quadrature": _check(worst, rtol),
                                "additivity": _check(worst_add, add_tol)})


def _random_field(mesh, rng, lo=0.0, hi=1.0):
    ext = ExteriorData(rng.uniform(lo, hi, mesh.n_window), tuple(rng.uniform(lo, hi, 2)))
    return Field(mesh, rng.uniform(lo, hi, mesh.n_interior), ext)


def exp_gradient(cfg, rng):
    mesh = _mesh_from(cfg.mesh)
    P = cfg.params
    s = float(P.get("s", 0.3))
    ps = [float(p) for p in P.get("p_values", [1.5, 2.0, 3.0])]
    n = int(P.get("n_fields", 20))
    h = float(P.get("h", 1e-6))
    rtol = float(P.get("rtol", 1e-6))
    rows, worst, lin = [], 0.0, 0.0
    fields = [_random_field(mesh, rng) for _ in range(n)]
    for p in ps:
        w = assemble_weights(mesh, s * p)
        for k, u in enumerate(fields):
            g = plap_apply(u, s, p, w)
            fd = fd_gradient_oracle(u, s, p, w, h)
            rel = float(np.max(np.abs(g - fd)) / max(np.max(np.abs(g)), 1e-300))
            worst = max(worst, rel)
            if p == 2.0:
                lin = max(lin, float(np.max(np.abs(fd - fd_gradient_oracle(u, s, p, w, 10 * h)))))
            rows.append([p, k, rel])
    checks = {"plap_vs_finite_differences": _check(worst, rtol)}
    if 2.0 in ps:
        checks["p2_linearity"] = _check(lin, float(P.get("linearity_tol", 1e-9)))
    return Outcome(["p", "field", "rel_err"], rows, checks)


def exp_p_sweep(cfg, rng):
    mesh = _mesh_from(cfg.mesh)
    phi = _exterior_from(cfg.exterior, mesh, rng)
    P = cfg.params
    s = float(P["s"])
    ps = _schedule(P.get("p_schedule"), 1, 12, p_schedule)
    tail_tol = float(P.get("tail_tol", 1e-4))
    min_tol = float(P.get("minimality_tol", 1e-8))
    sweep = p_sweep_run(mesh, phi, s, ps)
    w1 = assemble_weights(mesh, s)
    I1 = problem_interactions(mesh, phi, w1)
    _, E_oracle = lp_min_one(I1)
    cols, rows = _rows_from_sweep(sweep.rows)
    cols.append("oracle_one_energy")
    for r in rows:
        r.append(E_oracle)
    gaps = [abs(r.energies["min_energy"] - E_oracle) for r in sweep.rows]
    fixed = [abs(r.energies["fixed_energy"] - E_oracle) for r in sweep.rows]
    floor = 1e-14 * (1.0 + abs(E_oracle))
    checks = {
        "tail_min_energy_gap": _check(gaps[-1], tail_tol),
        "min_energy_gap_decreasing": _check(_increases(gaps, floor), 0),
        "fixed_energy_gap_decreasing": _check(_increases(fixed, floor), 0),
        "max_principle": _check(max(r.residuals["max_principle_excess"] for r in sweep.rows), 1e-12),
        "reference_matches_oracle": _check(abs(sweep.reference_energy - E_oracle), 1e-8 * I1.scale()),
    }
    details = {"reference_energy": sweep.reference_energy, "oracle_energy": E_oracle, "cauchy": sweep.cauchy}
    if sweep.cauchy:
        fams = competitor_families(sweep.candidate, rng, n_random=int(P.get("n_random", 1000)))
        g = max(batch_minimality_gap(sweep.candidate, V, s, w1) for V in fams.values())
        checks["candidate_minimality_gap"] = _check(g, min_tol)
    else:
        details["candidate"] = "not Cauchy; only the energy-level assertion applies"
    return Outcome(cols, rows, checks, details)


def _increases(gaps, floor):
    """Steps where a gap fails to shrink, ignoring gaps already at round-off level."""
    g = np.asarray(gaps)
    return int(np.sum((np.diff(g) >= 0) & (g[:-1] > floor)))


def exp_sp_sweep(cfg, rng):
    mesh = _mesh_from(cfg.mesh)
    phi = _exterior_from(cfg.exterior, mesh, rng)
    P = cfg.params
    s = float(P["s"])
    ps = _schedule(P.get("p_schedule"), 2, 12, p_schedule)
    cert_tol = float(P.get("cert_tol", 1e-5))
    sweep = sp_sweep_run(mesh, phi, s, ps, cert_tol=cert_tol)
    cols, rows = _rows_from_sweep(sweep.rows)
    gaps = [abs(r.energies["min_energy"] - sweep.reference_energy) for r in sweep.rows]
    ident = max(abs(r.energies["s_p"] * r.param - ((1 + s) * r.param - 1)) for r in sweep.rows)
    rep = sweep.candidate_report
    checks = {
        "sp_identity": _check(ident, 1e-14),
        "tail_closest_to_optimum": _check(gaps[-1], min(gaps)),
        "candidate_certificate": {"pass": bool(rep.passed), "value": rep.to_json(), "limit": cert_tol},
        "candidate_energy": _check(abs(energy(sweep.candidate, s, 1.0, assemble_weights(mesh, s))
                                       - sweep.reference_energy), 1e-8 * (1 + sweep.reference_energy)),
    }
    return Outcome(cols, rows, checks, {"tail_sup": sweep.tail_sup})


def _step_field(mesh, jump, lo_val, hi_val):
    c = mesh.centers
    vals = np.where(c > jump, hi_val, lo_val)
    far = (lo_val if mesh.far_left_edge < jump else hi_val, hi_val if mesh.far_right_edge > jump else lo_val)
    return Field(mesh, vals[mesh.interior], ExteriorData(vals[mesh.window_index], far))


def exp_s_sweep(cfg, rng):
    mesh = _mesh_from(cfg.mesh)
    P = cfg.params
    u = _step_field(mesh, float(P.get("jump", 0.5)), float(P.get("low", 0.0)), float(P.get("high", 1.0)))
    window = tuple(P.get("window", [0.25, 0.75]))
    ss = _schedule(P.get("s_schedule"), 4, 12, s_schedule)
    rows = s_sweep(u, window, ss)
    cols, out = _rows_from_sweep(rows)
    vals = [r.energies["scaled_energy"] for r in rows]
    target = rows[-1].energies["target"]
    rich = richardson(vals)
    cols += ["closed_form", "richardson"]
    for k, r in enumerate(out):
        r += [step_closed_form(ss[k]) if P.get("closed_form", True) else float("nan"),
              float(rich[k - 1]) if k >= 1 else float("nan")]
    checks = {
        "raw_tail_rel_err": _check(abs(vals[-1] - target) / target, float(P.get("raw_rtol", 0.02))),
        "richardson_rel_err": _check(abs(rich[-1] - target) / target, float(P.get("richardson_rtol", 0.005))),
    }
    cp = P.get("checkpoint", {"s": 0.5, "expected": 4.0})
    if cp:
        E = s_sweep(u, (mesh.omega_lo, mesh.omega_hi), [float(cp["s"])], allow_full=True)[0].energies["energy"]
        checks["checkpoint"] = _check(abs(E - float(cp["expected"])), float(cp.get("tol", 1e-12)))
    return Outcome(cols, out, checks, {"target": target})


def exp_recovery(cfg, rng):
    mesh = _mesh_from(cfg.mesh)
    P = cfg.params
    s = float(P["s"])
    amp = float(P.get("amplitude", 1.0))
    u = _random_field(mesh, rng, -amp, amp)
    ps = _schedule(P.get("p_schedule"), 1, 20, p_schedule)
    top = float(np.max(np.abs(u.cell_values)))
    Ms = P.get("M_schedule")
    Ms = [top * (1.0 - 2.0 ** -(k + 1)) for k in range(len(ps) - 1)] + [top] if Ms is None else Ms
    rows = recovery_sequence(u, s, ps, Ms)
    cols, out = _rows_from_sweep(rows)
    tail = abs(rows[-1].energies["energy"] - rows[-1].energies["target"])
    checks = {
        "truncation_never_increases": _check(max(r.residuals["truncation_excess"] for r in rows), 0.0),
        "tail_energy_gap": _check(tail, float(P.get("tail_tol", 1e-4))),
    }
    return Outcome(cols, out, checks)


def exp_pathology(cfg, rng):
    spec = dict(cfg.exterior or {})
    kind = spec.pop("kind", None)
    if spec.pop("type", "pathology") != "pathology" or kind is None:
        raise ConfigError("exterior.kind", "pathology experiments need exterior {type: pathology, kind: ...}")
    rep = pathology_phi(kind, {**spec, **cfg.params})
    labels = list(rep.partials)
    cols = ["window"] + labels
    rows = [[float(wd)] + [float(rep.partials[l][k]) for l in labels] for k, wd in enumerate(rep.windows)]
    checks = {}
    for l in labels:
        p = float(l[1:])
        if kind == "bolas":
            if p == 1:
                checks[f"{l}_diverges"] = _check(rep.diverging[l], True, passed=rep.diverging[l])
            else:
                checks[f"{l}_converges"] = _check(rep.diverging[l], False, passed=not rep.diverging[l])
                checks[f"{l}_increments_shrink"] = _check(rep.increment_ratios[l], 1.0,
                                                          passed=rep.increment_ratios[l] < 1.0)
        else:
            if p == 1:
                checks[f"{l}_cauchy"] = _check(rep.increment_ratios[l], 1.0,
                                               passed=(not rep.diverging[l]) and rep.increment_ratios[l] < 1.0)
            else:
                checks[f"{l}_diverges"] = _check(rep.diverging[l], True, passed=rep.diverging[l])
    return Outcome(cols, rows, checks, {"report": rep.to_json()})


def exp_perimeter(cfg, rng):
    """Level sets of p = 1 minimisers against brute force."""
    mesh = _mesh_from(cfg.mesh)
    P = cfg.params
    s = float(P["s"])
    n = int(P.get("n_instances", 20))
    tol = float(P.get("tol", 1e-8))
    w = assemble_weights(mesh, s)
    rows, fails = [], 0
    for k in range(n):
        phi = _exterior_from(cfg.exterior or {"type": "random"}, mesh, rng)
        u, _ = solve_one(mesh, phi, s, w=w)
        rep = level_set_check(u, s, w, tol)
        for r in rep.rows:
            rows.append([k, r.lam, r.perimeter, r.min_value, int(r.passed)])
        fails += not rep.passed
    return Outcome(["instance", "lambda", "perimeter", "min_value", "pass"], rows,
                   {"all_level_sets_minimal": _check(fails, 0)})


def _random_traces(mesh, rng, n):
    bits = mesh.n_window + 2
    total = 1 << bits
    picks = rng.choice(total, size=min(n, total), replace=False)
    for code in picks:
        flags = [(int(code) >> i) & 1 for i in range(bits)]
        yield np.array(flags[:mesh.n_window], bool), (bool(flags[-2]), bool(flags[-1]))


def exp_equivalence(cfg, rng):
    mesh = _mesh_from(cfg.mesh)
    P = cfg.params
    s = float(P["s"])
    n = int(P.get("n_traces", 50))
    tol = float(P.get("cert_tol", 1e-6))
    etol = float(P.get("energy_tol", 1e-8))
    w = assemble_weights(mesh, s)
    rows, disagree, worst = [], 0, 0.0
    for k, (win, far) in enumerate(_random_traces(mesh, rng, n)):
        agree, n_sets, n_min, min_val = corollary_sets_check(mesh, win, far, s, w, tol)
        phi = indicator_field(CellSet(mesh, np.zeros(mesh.n_interior, bool), win, far)).exterior
        u, _ = solve_one(mesh, phi, s, w=w)
        E = energy(u, s, 1.0, w)
        worst = max(worst, abs(E - min_val))
        disagree += not agree
        rows.append([k, "".join(str(int(b)) for b in win) + "|" + "".join(str(int(f)) for f in far),
                     n_sets, n_min, min_val, E, int(agree)])
    return Outcome(["trace", "bits", "n_sets", "n_minimizers", "min_perimeter", "solve_one_energy", "agree"],
                   rows, {"argmin_iff_certificate": _check(disagree, 0),
                          "real_valued_equals_set_minimum": _check(worst, etol)})


def _block_exterior(mesh, values):
    """Exterior data constant on half-window blocks, independent of the mesh resolution."""
    L = mesh.window_halfwidth
    a, b = mesh.omega_lo, mesh.omega_hi
    cuts = [a - L, a - L / 2, a, b + L / 2, b + L]

    def fn(y):
        return values[int(np.searchsorted(cuts, y, side="right"))]
    return ExteriorData.from_function(mesh, fn, far=(values[0], values[5]))


def exp_regularity(cfg, rng):
    """Local sup and BV ratios of p = 1 minimisers across mesh refinements.

    p = 1 minimisers are often not unique (the energy can be flat in the
    position of an interior jump), so the ratios are measured on the
    pointwise-maximal minimiser (``selection: "max"``, or ``"min"``), which is
    unique.  ``"solver"`` measures the raw :func:`solve_one` output instead;
    its ratios are always reported as extra columns.
    """
    P = cfg.params
    s = float(P["s"])
    n = int(P.get("n_instances", 10))
    Ns = [int(x) for x in P.get("refinements", [32, 64, 128])]
    sub = tuple(P.get("omega_prime", [0.25, 0.75]))
    rtol = float(P.get("rtol", 0.2))
    frac = float(P.get("window_fraction", 0.25))
    selection = P.get("selection", "max")
    if selection not in ("max", "min", "solver"):
        raise ConfigError("params.selection", f"expected 'max', 'min' or 'solver', got {selection!r}")
    base = cfg.mesh
    rows, worst_sup, worst_bv, finite, missing = [], 0.0, 0.0, True, 0
    for k in range(n):
        vals = rng.uniform(0.0, 1.0, 6)
        ks, kb = [], []
        for N in Ns:
            mesh = _mesh_from({**base, "n_interior": N, "window_cells": max(1, int(round(frac * N)))})
            phi = _block_exterior(mesh, vals)
            w = assemble_weights(mesh, s)
            u, cert = solve_one(mesh, phi, s, w=w)
            raw = regularity_report(u, sub)
            v = u
            if selection != "solver":
                I, (Z, ZX) = certificate_matrices(u, cert, w)
                ext = extremal_minimizer(I, Z, ZX, selection)
                if ext is None:
                    missing += 1
                else:
                    v = Field(mesh, ext, phi)
            rep = regularity_report(v, sub)
            ks.append(rep.sup_bound_ratio)
            kb.append(rep.bv_ratio)
            finite &= all(math.isfinite(x) for x in (rep.sup_bound_ratio, rep.inf_bound_ratio, rep.bv_ratio))
            rows.append([k, N, rep.sup_bound_ratio, rep.inf_bound_ratio, rep.bv_ratio,
                         raw.sup_bound_ratio, raw.inf_bound_ratio, raw.bv_ratio])
        worst_sup = max(worst_sup, _variation(ks))
        worst_bv = max(worst_bv, _variation(kb))
    checks = {"finite": _check(finite, True, passed=finite),
              "K_sup_stable": _check(worst_sup, rtol), "K_bv_stable": _check(worst_bv, rtol)}
    if selection != "solver":
        checks["canonical_minimizer_found"] = _check(missing, 0)
    return Outcome(["instance", "n_interior", "K_sup", "K_inf", "K_bv", "solver_K_sup", "solver_K_inf",
                    "solver_K_bv"], rows, checks, {"selection": selection})


def _variation(xs):
    hi, lo = max(xs), min(xs)
    if hi == lo:
        return 0.0
    return (hi - lo) / max(abs(hi), abs(lo))


def exp_certificates(cfg, rng):
    mesh = _mesh_from(cfg.mesh)
    P = cfg.params
    s = float(P["s"])
    n = int(P.get("n_instances", 20))
    tol = float(P.get("cert_tol", 1e-6))
    gtol = float(P.get("gap_tol", 1e-8))
    w = assemble_weights(mesh, s)
    rows = []
    fails = {"pass": 0, "bound": 0, "gap": 0}
    for k in range(n):
        phi = _exterior_from(cfg.exterior or {"type": "random"}, mesh, rng)
        u, cert = solve_one(mesh, phi, s, w=w)
        rep = check_certificate(u, cert, s, w, tol)
        scale = problem_interactions(mesh, phi, w).scale()
        fails["pass"] += not rep.passed
        fails["bound"] += rep.worst_bound > 1 + 1e-12
        fails["gap"] += rep.duality_gap > gtol * scale
        rows.append([k, int(rep.passed), int(rep.antisymmetric), rep.worst_bound, rep.worst_balance,
                     rep.worst_complementarity, float(rep.duality_gap), scale])
    cols = ["instance", "pass", "antisymmetric", "worst_bound", "worst_balance", "worst_complementarity",
            "duality_gap", "scale"]
    return Outcome(cols, rows, {"certificates_pass": _check(fails["pass"], 0),
                                "bounds": _check(fails["bound"], 0), "duality_gaps": _check(fails["gap"], 0)})


def _admissible_triples(rng, n):
    out = []
    while len(out) < n:
        s = float(rng.uniform(0.05, 0.95))
        sigma = float(rng.uniform(0.0, s))
        p = float(rng.uniform(1.0, 1.0 / s))
        if sigma > 0 and p > 1 and s * p <= 1 - SP_MARGIN:
            out.append((s, sigma, p))
    return out


def _batch_seminorm(V, P, p):
    D = np.abs(V[:, :, None] - V[:, None, :])
    return np.einsum("kij,ij->k", D**p, P) ** (1.0 / p)


def exp_embedding(cfg, rng):
    mesh = _mesh_from(cfg.mesh)
    P = cfg.params
    n = int(P.get("n_fields", 1000))
    slack = float(P.get("slack", 1e-12))
    triples = _admissible_triples(rng, int(P.get("n_triples", 20)))
    V = rng.uniform(-1.0, 1.0, (n, mesh.n_interior))
    sl = mesh.interior
    rows, viol = [], 0
    for s, sigma, p in triples:
        Psp = assemble_weights(mesh, s * p).pair_weights[sl, sl]
        Psig = assemble_weights(mesh, sigma).pair_weights[sl, sl]
        lhs = _batch_seminorm(V, Psig, 1.0)
        rhs = embedding_constant(mesh, s, sigma, p) * _batch_seminorm(V, Psp, p)
        bad = int(np.sum(lhs > rhs + slack))
        viol += bad
        rows.append([s, sigma, p, float(np.max(lhs / rhs)), bad])
    return Outcome(["s", "sigma", "p", "max_ratio", "violations"], rows, {"violations": _check(viol, 0)})


def exp_apriori(cfg, rng):
    mesh = _mesh_from(cfg.mesh)
    P = cfg.params
    n = int(P.get("n_fields", 1000))
    slack = float(P.get("slack", 1e-12))
    triples = _admissible_triples(rng, int(P.get("n_triples", 20)))
    datas = [ExteriorData(rng.uniform(-1, 1, mesh.n_window), tuple(rng.uniform(-1, 1, 2))) for _ in range(n)]
    rows, viol = [], 0
    for s, _, p in triples:
        w = assemble_weights(mesh, s * p)
        worst, bad = 0.0, 0
        for phi in datas:
            u = solve_p(mesh, phi, s, p, w=w)
            rep = apriori_check(u, phi, s, p, w, slack)
            bad += not rep.holds
            worst = max(worst, rep.lhs / rep.rhs)
        viol += bad
        rows.append([s, p, worst, bad])
    return Outcome(["s", "p", "max_ratio", "violations"], rows, {"violations": _check(viol, 0)})


def exp_coarea(cfg, rng):
    mesh = _mesh_from(cfg.mesh)
    P = cfg.params
    s = float(P["s"])
    n = int(P.get("n_fields", 1000))
    tol = float(P.get("tol", 1e-12))
    w = assemble_weights(mesh, s)
    rows, worst = [], 0.0
    for k in range(n):
        u = _random_field(mesh, rng)
        if k % 2:
            # quantised values exercise ties between interior and exterior levels
            u = Field(mesh, np.round(u.interior_values * 4) / 4,
                      ExteriorData(np.round(u.exterior.window_values * 4) / 4,
                                   tuple(round(c * 4) / 4 for c in u.exterior.far_field)))
        E = energy(u, s, 1.0, w)
        C = coarea_energy(u, s, w)
        err = abs(E - C) / max(1.0, abs(E))
        worst = max(worst, err)
        rows.append([k, E, C, err])
    return Outcome(["field", "energy", "coarea", "rel_err"], rows, {"coarea_identity": _check(worst, tol)})


EXPERIMENTS = {
    "p_sweep": exp_p_sweep, "sp_sweep": exp_sp_sweep, "s_sweep": exp_s_sweep, "recovery": exp_recovery,
    "pathology": exp_pathology, "perimeter": exp_perimeter, "equivalence": exp_equivalence,
    "regularity": exp_regularity, "kernel": exp_kernel, "gradient": exp_gradient,
    "certificates": exp_certificates, "embedding": exp_embedding, "apriori": exp_apriori, "coarea": exp_coarea,
}


# --------------------------------------------------------------------------- output

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def csv_text(columns, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def gnuplot_text(columns, rows):
    lines = ["# " + " ".join(columns)]
    for r in rows:
        lines.append(" ".join(_fmt(x).replace(" ", "_") for x in r))
    return "\n".join(lines) + "\n"


def _write(path: Path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def resolve_output_dir(cfg: ExperimentConfig, out=None):
    if out:
        return Path(out)
    env = os.environ.get("NLVAR_OUT")
    if env:
        return Path(env)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path("nlvar-out") / cfg.kind


@dataclass
class RunResult:
    status: int
    outcome: Outcome | None
    out_dir: Path
    error: str | None = None


def run_experiment(config, out=None, seed=None, gnuplot=False) -> RunResult:
    """Run one experiment and write its artifacts.

    ``status`` is 0 whenever the run completes; failed invariants are reported in
    ``summary.json`` and ``outcome.passed`` (the CLI maps them to exit 3 under ``--strict``).
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(copy.deepcopy(config))
    if seed is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_json(), "seed": int(seed)})
    out_dir = resolve_output_dir(cfg, out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed if cfg.seed is not None else 0)
    outcome = EXPERIMENTS[cfg.kind](cfg, rng)
    files = ["manifest.json", "results.csv", "summary.json"] + (["results.dat"] if gnuplot else [])
    manifest = {"tool": "nlvar", "version": __version__, "config": cfg.to_json(), "files": files,
                "csv_columns": outcome.columns}
    summary = {"kind": cfg.kind, "pass": outcome.passed,
               "checks": {k: {kk: _num(vv) if not isinstance(vv, dict) else vv for kk, vv in v.items()}
                          for k, v in outcome.checks.items()},
               "details": _jsonable(outcome.details)}
    _write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    _write(out_dir / "results.csv", csv_text(outcome.columns, outcome.rows))
    _write(out_dir / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if gnuplot:
        _write(out_dir / "results.dat", gnuplot_text(outcome.columns, outcome.rows))
    return RunResult(0, outcome, out_dir)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return _num(x)
