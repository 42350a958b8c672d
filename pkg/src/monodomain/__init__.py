"""Explicit operator-splitting solvers for the monodomain equation."""

import numba

# Prefer OpenMP; the TBB layer on some systems is too old and only warns.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

__version__ = "0.1.0"
