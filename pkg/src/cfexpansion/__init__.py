"""Closed-form transition-density expansions for elliptic and hypo-elliptic SDEs."""

import os

import numba

# the TBB layer found by some numba builds is too old and only warns; the
# workqueue layer gives the same results
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

__version__ = "0.1.0"
