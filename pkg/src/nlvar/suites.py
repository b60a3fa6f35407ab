"""Built-in acceptance configs, one experiment per criterion.

Each entry is a plain JSON-able dict accepted by :class:`nlvar.harness.ExperimentConfig`;
``nlvar check <name>`` runs it and fails on any broken invariant.
"""

from __future__ import annotations

import copy

SUITES = {
    "kernel": {
        "criterion": 1,
        "config": {"kind": "kernel", "seed": 1, "params": {"n_cases": 100, "rtol": 1e-10, "additivity_tol": 1e-12}},
    },
    "gradient": {
        "criterion": 2,
        "config": {"kind": "gradient", "seed": 2, "mesh": {"n_interior": 32, "window_cells": 8},
                   "params": {"s": 0.3, "p_values": [1.5, 2.0, 3.0], "n_fields": 20, "h": 1e-6, "rtol": 1e-6,
                              "linearity_tol": 1e-9}},
    },
    "p_sweep": {
        "criterion": 3,
        "config": {"kind": "p_sweep", "seed": 3, "mesh": {"n_interior": 64, "window_cells": 16},
                   "exterior": {"type": "random", "low": 0.0, "high": 1.0},
                   "params": {"s": 0.5, "p_schedule": {"k_min": 1, "k_max": 12}, "tail_tol": 1e-4,
                              "minimality_tol": 1e-8, "n_random": 1000}},
    },
    "certificates": {
        "criterion": 4,
        "config": {"kind": "certificates", "seed": 4, "mesh": {"n_interior": 64, "window_cells": 16},
                   "exterior": {"type": "random", "low": 0.0, "high": 1.0},
                   "params": {"s": 0.5, "n_instances": 20, "cert_tol": 1e-6, "gap_tol": 1e-8}},
    },
    "equivalence": {
        "criterion": 5,
        "config": {"kind": "equivalence", "seed": 5, "mesh": {"n_interior": 8, "window_cells": 2},
                   "params": {"s": 0.5, "n_traces": 50, "cert_tol": 1e-6, "energy_tol": 1e-8}},
    },
    "perimeter": {
        "criterion": 6,
        "config": {"kind": "perimeter", "seed": 6, "mesh": {"n_interior": 8, "window_cells": 4},
                   "exterior": {"type": "random", "low": 0.0, "high": 1.0},
                   "params": {"s": 0.5, "n_instances": 20, "tol": 1e-8}},
    },
    "embedding": {
        "criterion": 7,
        "config": {"kind": "embedding", "seed": 7, "mesh": {"n_interior": 16},
                   "params": {"n_fields": 1000, "n_triples": 20, "slack": 1e-12}},
    },
    "apriori": {
        "criterion": 8,
        "config": {"kind": "apriori", "seed": 7, "mesh": {"n_interior": 8, "window_cells": 4},
                   "params": {"n_fields": 1000, "n_triples": 20, "slack": 1e-12}},
    },
    "coarea": {
        "criterion": 9,
        "config": {"kind": "coarea", "seed": 9, "mesh": {"n_interior": 16, "window_cells": 4},
                   "params": {"s": 0.5, "n_fields": 1000, "tol": 1e-12}},
    },
    "s_sweep": {
        "criterion": 10,
        "config": {"kind": "s_sweep", "mesh": {"n_interior": 4, "window_cells": 2},
                   "params": {"jump": 0.5, "window": [0.25, 0.75], "s_schedule": {"k_min": 4, "k_max": 12},
                              "raw_rtol": 0.02, "richardson_rtol": 0.005,
                              "checkpoint": {"s": 0.5, "expected": 4.0, "tol": 1e-12}}},
    },
    "pathology_bolas": {
        "criterion": 11,
        "config": {"kind": "pathology", "exterior": {"type": "pathology", "kind": "bolas"},
                   "params": {"R": 4.0, "s": 0.5, "p_values": [1.0, 2.0], "doublings": 16}},
    },
    "pathology_fgr": {
        "criterion": 11,
        "config": {"kind": "pathology", "exterior": {"type": "pathology", "kind": "fgr"},
                   "params": {"k_max": 65536, "p_values": [1.0, 1.1]}},
    },
    "regularity": {
        "criterion": 12,
        "config": {"kind": "regularity", "seed": 12, "mesh": {"n_interior": 32, "window_cells": 8},
                   "params": {"s": 0.5, "n_instances": 10, "refinements": [32, 64, 128],
                              "omega_prime": [0.25, 0.75], "window_fraction": 0.25, "rtol": 0.2}},
    },
    # not tied to a single criterion, kept runnable for completeness
    "sp_sweep": {
        "criterion": None,
        "config": {"kind": "sp_sweep", "seed": 3, "mesh": {"n_interior": 64, "window_cells": 16},
                   "exterior": {"type": "random", "low": 0.0, "high": 1.0},
                   "params": {"s": 0.5, "p_schedule": {"k_min": 2, "k_max": 12}, "cert_tol": 1e-5}},
    },
    "recovery": {
        "criterion": None,
        "config": {"kind": "recovery", "seed": 14, "mesh": {"n_interior": 16, "window_cells": 4},
                   "params": {"s": 0.5, "p_schedule": {"k_min": 1, "k_max": 20}, "tail_tol": 1e-4}},
    },
}


def suite_config(name):
    return copy.deepcopy(SUITES[name]["config"])


def suite_names(criterion=None):
    if criterion is None:
        return list(SUITES)
    return [k for k, v in SUITES.items() if v["criterion"] == criterion]
