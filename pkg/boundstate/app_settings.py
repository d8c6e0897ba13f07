"""Library defaults.

Every value can be overridden with an environment variable named after the
constant (``BOUNDSTATE_DEFAULT_DT=5e-4``), read once at import time.
"""

import logging
import os

logger = logging.getLogger(__name__)


def _setting(name: str, default, cast=float):
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        logger.warning("Ignoring invalid value %r for %s, using %r", raw, name, default)
        return default


# Time grid, in units of 1/xi0
BOUNDSTATE_DEFAULT_DT = _setting("BOUNDSTATE_DEFAULT_DT", 1e-3)
BOUNDSTATE_DEFAULT_HORIZON = _setting("BOUNDSTATE_DEFAULT_HORIZON", 20.0)

# Solver tolerances
BOUNDSTATE_SOLVER_EPS = _setting("BOUNDSTATE_SOLVER_EPS", 1e-6)
BOUNDSTATE_DIVERGENCE_THRESHOLD = _setting("BOUNDSTATE_DIVERGENCE_THRESHOLD", 1e-3)
BOUNDSTATE_IMAGINARY_RESIDUE = _setting("BOUNDSTATE_IMAGINARY_RESIDUE", 1e-8)

# Master equation
BOUNDSTATE_SINGULAR_U = _setting("BOUNDSTATE_SINGULAR_U", 0.05)
BOUNDSTATE_DEFAULT_NMAX = _setting("BOUNDSTATE_DEFAULT_NMAX", 25, int)
BOUNDSTATE_TRACE_DRIFT = _setting("BOUNDSTATE_TRACE_DRIFT", 1e-6)
BOUNDSTATE_TRUNCATION_POPULATION = _setting("BOUNDSTATE_TRUNCATION_POPULATION", 1e-8)

# Quadrature
BOUNDSTATE_QUAD_EPSABS = _setting("BOUNDSTATE_QUAD_EPSABS", 1e-13)
BOUNDSTATE_QUAD_EPSREL = _setting("BOUNDSTATE_QUAD_EPSREL", 1e-12)
BOUNDSTATE_QUAD_LIMIT = _setting("BOUNDSTATE_QUAD_LIMIT", 500, int)
# Largest error estimate accepted when QUADPACK stops short of the requested tolerance
BOUNDSTATE_QUAD_ACCEPT = _setting("BOUNDSTATE_QUAD_ACCEPT", 1e-9)
BOUNDSTATE_GAUSS_ORDER = _setting("BOUNDSTATE_GAUSS_ORDER", 32, int)
BOUNDSTATE_MAX_PANELS = _setting("BOUNDSTATE_MAX_PANELS", 4096, int)
BOUNDSTATE_PANEL_TOLERANCE = _setting("BOUNDSTATE_PANEL_TOLERANCE", 1e-11)
# Kernel tables kept in memory; the oldest is dropped first
BOUNDSTATE_KERNEL_CACHE_SIZE = _setting("BOUNDSTATE_KERNEL_CACHE_SIZE", 32, int)

# Bound states
BOUNDSTATE_BISECTION_XTOL = _setting("BOUNDSTATE_BISECTION_XTOL", 1e-12)
BOUNDSTATE_MARGINAL_DISTANCE = _setting("BOUNDSTATE_MARGINAL_DISTANCE", 1e-9)
BOUNDSTATE_SUM_RULE_TOLERANCE = _setting("BOUNDSTATE_SUM_RULE_TOLERANCE", 1e-6)

# Output
BOUNDSTATE_FRAME_POINTS = _setting("BOUNDSTATE_FRAME_POINTS", 201, int)
BOUNDSTATE_SIGNIFICANT_DIGITS = _setting("BOUNDSTATE_SIGNIFICANT_DIGITS", 12, int)
BOUNDSTATE_SWEEP_WORKERS = _setting("BOUNDSTATE_SWEEP_WORKERS", 4, int)
