"""Uniform 1D meshes of a bounded interval, its exterior window and the far field.

Cell order everywhere in the package is: left window cells, interior cells,
right window cells.  Beyond the window the exterior datum is a constant on
each side (the *far field*); a mesh may also drop the far region entirely, in
which case the exterior is truncated at the window edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExteriorMismatch, SpecError

_REL = 1e-9


@dataclass(frozen=True)
class Mesh:
    omega_lo: float
    omega_hi: float
    n_interior: int
    window_halfwidth: float = 0.0
    n_window_per_side: int = 0
    far_field: bool = True

    def __post_init__(self):
        a, b = self.omega_lo, self.omega_hi
        if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
            raise SpecError(f"omega_lo < omega_hi violated: ({a}, {b})")
        if int(self.n_interior) != self.n_interior or self.n_interior < 1:
            raise SpecError(f"n_interior >= 1 violated: {self.n_interior}")
        L, M = self.window_halfwidth, self.n_window_per_side
        if not math.isfinite(L) or L < 0:
            raise SpecError(f"window_halfwidth >= 0 violated: {L}")
        if int(M) != M or M < 0:
            raise SpecError(f"n_window_per_side >= 0 violated: {M}")
        if (L == 0) != (M == 0):
            raise SpecError("window cells must tile the window exactly (L and M both zero or both positive)")
        if M and abs(L / M - self.h) > _REL * self.h:
            raise SpecError(
                f"window cells must share the interior width {self.h}; got {L / M} (L={L}, M={M})"
            )

    # geometry -------------------------------------------------------------
    @property
    def h(self):
        return (self.omega_hi - self.omega_lo) / self.n_interior

    @property
    def length(self):
        return self.omega_hi - self.omega_lo

    @property
    def n_window(self):
        return 2 * self.n_window_per_side

    @property
    def n_cells(self):
        return self.n_interior + self.n_window

    @property
    def interior(self):
        M = self.n_window_per_side
        return slice(M, M + self.n_interior)

    @property
    def window_index(self):
        M, N = self.n_window_per_side, self.n_interior
        return np.concatenate([np.arange(M), np.arange(M + N, 2 * M + N)])

    @property
    def cell_edges(self):
        a, b, h, M = self.omega_lo, self.omega_hi, self.h, self.n_window_per_side
        left = a - h * np.arange(M, 0, -1)
        right = b + h * np.arange(1, M + 1)
        return np.concatenate([left, np.linspace(a, b, self.n_interior + 1), right])

    @property
    def centers(self):
        e = self.cell_edges
        return 0.5 * (e[:-1] + e[1:])

    @property
    def far_left_edge(self):
        return self.omega_lo - self.window_halfwidth

    @property
    def far_right_edge(self):
        return self.omega_hi + self.window_halfwidth

    def mirror(self):
        """Index permutation mapping each cell to its reflection about the midpoint."""
        return np.arange(self.n_cells)[::-1]

    def to_json(self):
        return {
            "omega": [self.omega_lo, self.omega_hi],
            "n_interior": self.n_interior,
            "window": {
                "halfwidth": self.window_halfwidth,
                "cells_per_side": self.n_window_per_side,
                "far_field": self.far_field,
            },
        }

    @classmethod
    def from_json(cls, d):
        try:
            lo, hi = d["omega"]
            w = d.get("window", {})
            return cls(float(lo), float(hi), int(d["n_interior"]),
                       float(w.get("halfwidth", 0.0)), int(w.get("cells_per_side", 0)),
                       bool(w.get("far_field", True)))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"malformed mesh JSON: {exc}") from exc


def build_mesh(omega=(0.0, 1.0), n_interior=1, window_halfwidth=0.0, n_window_per_side=0,
               far_field=True) -> Mesh:
    """Validated constructor; raises :class:`SpecError` naming the violated invariant."""
    lo, hi = omega
    return Mesh(float(lo), float(hi), n_interior, float(window_halfwidth), n_window_per_side, far_field)


def window_mesh(omega=(0.0, 1.0), n_interior=16, window_cells=None, far_field=True) -> Mesh:
    """Mesh whose window has ``window_cells`` cells per side of the interior width."""
    if window_cells is None:
        window_cells = max(1, n_interior // 4)
    h = (omega[1] - omega[0]) / n_interior
    return build_mesh(omega, n_interior, window_cells * h, window_cells, far_field)


def _far_pair(far):
    if far is None:
        return (0.0, 0.0)
    if np.ndim(far) == 0:
        return (float(far), float(far))
    left, right = far
    return (float(left), float(right))


@dataclass(frozen=True)
class ExteriorData:
    """Exterior datum: one value per window cell and a constant per far side."""

    window_values: np.ndarray
    far_field: tuple = (0.0, 0.0)

    def __post_init__(self):
        v = np.array(self.window_values, dtype=float).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "window_values", v)
        object.__setattr__(self, "far_field", _far_pair(self.far_field))
        if not (np.all(np.isfinite(v)) and all(math.isfinite(c) for c in self.far_field)):
            raise SpecError("exterior data must be finite")

    @classmethod
    def constant(cls, mesh, c):
        return cls(np.full(mesh.n_window, float(c)), (c, c))

    @classmethod
    def zero(cls, mesh):
        return cls.constant(mesh, 0.0)

    @classmethod
    def from_function(cls, mesh, fn, far=None):
        """Sample ``fn`` at window cell centres; far constants default to ``fn`` at the window edges."""
        x = mesh.centers[mesh.window_index]
        vals = np.array([fn(t) for t in x], dtype=float)
        if far is None:
            far = (fn(mesh.far_left_edge), fn(mesh.far_right_edge))
        return cls(vals, far)

    def all_values(self, mesh):
        """Exterior values that actually enter the problem on ``mesh``."""
        vals = list(self.window_values)
        if mesh.far_field:
            vals.extend(self.far_field)
        return np.array(vals, dtype=float)

    def equals(self, other):
        return (np.array_equal(self.window_values, other.window_values)
                and self.far_field == other.far_field)

    def scaled(self, lam):
        return ExteriorData(lam * self.window_values, tuple(lam * c for c in self.far_field))


@dataclass(frozen=True)
class Field:
    """Piecewise-constant function: interior cell values plus exterior data."""

    mesh: Mesh = field(repr=False)
    interior_values: np.ndarray
    exterior: ExteriorData

    def __post_init__(self):
        u = np.array(self.interior_values, dtype=float).reshape(-1)
        u.setflags(write=False)
        object.__setattr__(self, "interior_values", u)
        if u.size != self.mesh.n_interior:
            raise SpecError(f"expected {self.mesh.n_interior} interior values, got {u.size}")
        if self.exterior.window_values.size != self.mesh.n_window:
            raise SpecError(f"expected {self.mesh.n_window} window values, "
                            f"got {self.exterior.window_values.size}")
        if not np.all(np.isfinite(u)):
            raise SpecError("field values must be finite")

    @property
    def cell_values(self):
        """Values on all cells in mesh order (window, interior, window)."""
        M = self.mesh.n_window_per_side
        w = self.exterior.window_values
        return np.concatenate([w[:M], self.interior_values, w[M:]])

    def with_interior(self, values):
        return Field(self.mesh, values, self.exterior)

    def same_exterior(self, other):
        return self.mesh == other.mesh and self.exterior.equals(other.exterior)

    def require_same_exterior(self, other):
        if not self.same_exterior(other):
            raise ExteriorMismatch("fields do not share mesh and exterior data")

    def scaled(self, lam):
        return Field(self.mesh, lam * self.interior_values, self.exterior.scaled(lam))

    def value_range(self):
        vals = np.concatenate([self.interior_values, self.exterior.all_values(self.mesh)])
        return float(vals.min()), float(vals.max())

    def to_json(self):
        d = self.mesh.to_json()
        d["values"] = {"interior": self.interior_values.tolist(),
                       "window": self.exterior.window_values.tolist()}
        d["far_field"] = list(self.exterior.far_field)
        return d

    @classmethod
    def from_json(cls, d):
        mesh = Mesh.from_json(d)
        vals = d.get("values", {})
        ext = ExteriorData(vals.get("window", []), d.get("far_field"))
        return cls(mesh, vals.get("interior", []), ext)


def constant_field(mesh, c):
    return Field(mesh, np.full(mesh.n_interior, float(c)), ExteriorData.constant(mesh, c))


def truncate_field(u: Field, M: float) -> Field:
    """Clamp every value, exterior included, to ``[-M, M]``."""
    if M < 0:
        raise SpecError(f"truncation height must be >= 0, got {M}")
    ext = ExteriorData(np.clip(u.exterior.window_values, -M, M),
                       tuple(min(M, max(-M, c)) for c in u.exterior.far_field))
    return Field(u.mesh, np.clip(u.interior_values, -M, M), ext)


@dataclass(frozen=True)
class CellSet:
    """A set described cellwise: interior membership plus its exterior trace."""

    mesh: Mesh = field(repr=False)
    interior: np.ndarray
    window: np.ndarray
    far: tuple = (False, False)

    def __post_init__(self):
        for name, n in (("interior", self.mesh.n_interior), ("window", self.mesh.n_window)):
            arr = np.array(getattr(self, name), dtype=bool).reshape(-1)
            if arr.size != n:
                raise SpecError(f"CellSet.{name} needs {n} flags, got {arr.size}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "far", (bool(self.far[0]), bool(self.far[1])))

    def complement(self):
        return CellSet(self.mesh, ~self.interior, ~self.window, (not self.far[0], not self.far[1]))

    def with_interior(self, flags):
        return CellSet(self.mesh, flags, self.window, self.far)

    def same_trace(self, other):
        return np.array_equal(self.window, other.window) and self.far == other.far

    def __eq__(self, other):
        return (isinstance(other, CellSet) and self.mesh == other.mesh
                and np.array_equal(self.interior, other.interior) and self.same_trace(other))

    def __hash__(self):
        return hash((self.interior.tobytes(), self.window.tobytes(), self.far))

    def to_json(self):
        d = self.mesh.to_json()
        d["values"] = {"interior": self.interior.astype(int).tolist(),
                       "window": self.window.astype(int).tolist()}
        d["far_field"] = [int(f) for f in self.far]
        return d

    @classmethod
    def from_json(cls, d):
        mesh = Mesh.from_json(d)
        vals = d.get("values", {})
        far = d.get("far_field", [0, 0])
        return cls(mesh, vals.get("interior", []), vals.get("window", []), tuple(bool(f) for f in far))


def indicator_field(E: CellSet) -> Field:
    ext = ExteriorData(E.window.astype(float), tuple(float(f) for f in E.far))
    return Field(E.mesh, E.interior.astype(float), ext)


def level_set(u: Field, lam: float) -> CellSet:
    """The superlevel set ``{u >= lam}`` including its exterior trace."""
    ext = u.exterior
    return CellSet(u.mesh, u.interior_values >= lam, ext.window_values >= lam,
                   tuple(c >= lam for c in ext.far_field))


def exterior_trace(mesh, phi: ExteriorData, lam: float) -> CellSet:
    """Exterior trace of ``{phi >= lam}`` with an empty interior."""
    return CellSet(mesh, np.zeros(mesh.n_interior, bool), phi.window_values >= lam,
                   tuple(c >= lam for c in phi.far_field))
