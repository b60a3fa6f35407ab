"""Desk-scale laboratory for fractional W^{s,p} energies with Dirichlet exterior data in 1D."""

__version__ = "0.1.0"

from .domain import (CellSet, ExteriorData, Field, Mesh, build_mesh, constant_field, exterior_trace,
                     indicator_field, level_set, truncate_field, window_mesh)
from .errors import *  # noqa: F401,F403
from .kernel import Cell, WeightTable, assemble_weights, far_moment, pair_weight
from .energy import energy, energy_breakdown, seminorm, tail_report, tail_sup_check
from .solver_smooth import SolveOptions, plap_apply, solve_p
from .solver_one import Certificate, OneOptions, duality_gap, solve_one
from .certificate import check_certificate, find_certificate, minimality_gap
from .perimeter import frac_perimeter, level_set_check, min_set_bruteforce, regularity_report
from .asymptotics import p_sweep, pathology_phi, recovery_sequence, s_sweep, sp_sweep
from .harness import ExperimentConfig, run_experiment

__all__ = [
    "Cell", "CellSet", "Certificate", "ExperimentConfig", "ExteriorData", "Field", "Mesh", "OneOptions",
    "SolveOptions", "WeightTable", "assemble_weights", "build_mesh", "check_certificate", "constant_field",
    "duality_gap", "energy", "energy_breakdown", "exterior_trace", "far_moment", "find_certificate",
    "frac_perimeter", "indicator_field", "level_set", "level_set_check", "min_set_bruteforce", "minimality_gap",
    "p_sweep", "pair_weight", "pathology_phi", "plap_apply", "recovery_sequence", "regularity_report",
    "run_experiment", "s_sweep", "seminorm", "solve_one", "solve_p", "sp_sweep", "tail_report",
    "tail_sup_check", "truncate_field", "window_mesh",
]
