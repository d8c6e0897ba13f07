"""Quadrature helpers shared by the spectral and Laplace-domain modules."""

import logging
from typing import Callable

import numpy as np
from scipy.integrate import quad

from boundstate import app_settings
from boundstate.errors import QuadratureError

logger = logging.getLogger(__name__)


def integrate(func: Callable[[float], float], a: float, b: float, what: str = "integral", **kwargs) -> float:
    """
    Adaptive QUADPACK integration that raises instead of warning.

    Args:
        func: Real integrand
        a, b: Integration limits (``b`` may be ``np.inf``)
        what: Label used in diagnostics
        **kwargs: Passed to ``scipy.integrate.quad`` (``weight``, ``wvar``, ``points``)

    Returns:
        Value of the integral

    Raises:
        QuadratureError: if QUADPACK reports non-convergence
    """
    kwargs.setdefault("epsabs", app_settings.BOUNDSTATE_QUAD_EPSABS)
    kwargs.setdefault("epsrel", app_settings.BOUNDSTATE_QUAD_EPSREL)
    kwargs.setdefault("limit", app_settings.BOUNDSTATE_QUAD_LIMIT)
    if kwargs.get("points") is not None:
        # QUADPACK needs one subinterval per breakpoint to start with
        kwargs["limit"] = max(kwargs["limit"], 2 * (len(kwargs["points"]) + 2))

    result = quad(func, a, b, full_output=1, **kwargs)
    if len(result) == 3:
        return result[0]

    value, abserr, info = result[:3]
    message = result[3]
    if abserr <= app_settings.BOUNDSTATE_QUAD_ACCEPT * max(1.0, abs(value)):
        logger.warning("Quadrature of %s stopped early with error %.3g: %s", what, abserr, str(message).strip())
        return value

    worst = None
    if "elist" in info and "last" in info:
        last = int(info["last"])
        idx = int(np.argmax(info["elist"][:last]))
        worst = 0.5 * (info["alist"][idx] + info["blist"][idx])

    logger.debug("Quadrature of %s on [%s, %s] failed: %s", what, a, b, message)
    raise QuadratureError(
        f"Quadrature of {what} did not converge on [{a}, {b}]",
        value=value,
        abserr=abserr,
        worst_point=worst,
        quadpack_message=str(message).strip(),
    )


def gauss_legendre_panels(a: float, b: float, panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on ``panels`` equal panels of [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def converge_panels(
    sample: Callable[[int], np.ndarray],
    panels: int,
    scale: float,
    what: str = "kernel",
    tol: float | None = None,
    max_panels: int | None = None,
) -> int:
    """
    Double the panel count until ``sample`` stops changing.

    Args:
        sample: Maps a panel count to a vector of sample values
        panels: Starting panel count
        scale: Magnitude the tolerance is relative to
        what: Label used in diagnostics

    Returns:
        The first panel count whose sample agrees with half as many panels

    Raises:
        QuadratureError: if ``max_panels`` is reached first
    """
    tol = app_settings.BOUNDSTATE_PANEL_TOLERANCE if tol is None else tol
    max_panels = app_settings.BOUNDSTATE_MAX_PANELS if max_panels is None else max_panels
    threshold = tol * max(abs(scale), np.finfo(float).tiny)

    panels = max(1, int(panels))
    coarse = sample(panels)
    worst, diff = 0, np.full(1, np.inf)
    while panels < max_panels:
        fine = sample(2 * panels)
        diff = np.abs(fine - coarse)
        worst = int(np.argmax(diff)) if diff.size else 0
        if not diff.size or diff[worst] <= threshold:
            logger.debug("%s converged with %d panels", what, 2 * panels)
            return 2 * panels
        panels *= 2
        coarse = fine

    raise QuadratureError(
        f"Panel refinement of {what} did not converge below {max_panels} panels",
        worst_change=worst,
        difference=float(diff[worst]),
        threshold=threshold,
    )
