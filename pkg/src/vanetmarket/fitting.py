"""Shared nonlinear least-squares wrapper used by the loss and utility calibrations."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import leastsq


class FitDivergence(RuntimeError):
    """Raised when the least-squares routine fails to produce a solution."""


class FitResult(NamedTuple):
    params: np.ndarray
    residual_rms: float
    converged: bool


def fit_least_squares(
    residuals: Callable[[np.ndarray], np.ndarray], p0: np.ndarray | list[float]
) -> FitResult:
    """Levenberg-Marquardt fit with a forward-difference Jacobian.

    Convergence tolerances are 1e-10 (absolute and relative) with at most
    200 iterations' worth of function evaluations per parameter.
    """
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    n = len(p0)
    # errstate: the unused covariance byproduct can overflow on degenerate fits
    with np.errstate(over="ignore", invalid="ignore"):
        out = leastsq(
            residuals,
            p0,
            full_output=True,
            ftol=1e-10,
            xtol=1e-10,
            gtol=0.0,
            maxfev=200 * (n + 1),
        )
    popt, _cov, info, mesg, ier = out
    if ier not in (1, 2, 3, 4, 5):
        raise FitDivergence(f"least-squares fit failed: {mesg}")
    res = np.asarray(info["fvec"], dtype=float)
    if not np.all(np.isfinite(res)):
        raise FitDivergence("least-squares fit produced non-finite residuals")
    rms = float(np.sqrt(np.mean(res**2)))
    # ier 5 means the evaluation budget ran out before the tolerances were met.
    return FitResult(np.atleast_1d(popt), rms, ier != 5)
