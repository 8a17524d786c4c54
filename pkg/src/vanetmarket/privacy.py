"""Path-reconstruction privacy: discrete Fréchet distance, similarity scoring,
per-server loss calibration, and the total privacy-loss function."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .fitting import fit_least_squares
from .trajectories import PlanarPath, Trajectory, project_planar, subsample

# Sub-sampling ladder used for the per-server loss measurement: one sample
# every 2, 3, ..., 10 minutes.
DEFAULT_CALIBRATION_FREQS = tuple(1.0 / m for m in range(2, 11))


def _dfd_core(p, q):
    n = p.shape[0]
    m = q.shape[0]
    prev = np.empty(m)
    curr = np.empty(m)
    dx = p[0, 0] - q[0, 0]
    dy = p[0, 1] - q[0, 1]
    prev[0] = math.sqrt(dx * dx + dy * dy)
    for j in range(1, m):
        dx = p[0, 0] - q[j, 0]
        dy = p[0, 1] - q[j, 1]
        d = math.sqrt(dx * dx + dy * dy)
        prev[j] = max(prev[j - 1], d)
    for i in range(1, n):
        dx = p[i, 0] - q[0, 0]
        dy = p[i, 1] - q[0, 1]
        curr[0] = max(prev[0], math.sqrt(dx * dx + dy * dy))
        for j in range(1, m):
            dx = p[i, 0] - q[j, 0]
            dy = p[i, 1] - q[j, 1]
            d = math.sqrt(dx * dx + dy * dy)
            c = prev[j]
            if prev[j - 1] < c:
                c = prev[j - 1]
            if curr[j - 1] < c:
                c = curr[j - 1]
            curr[j] = c if c > d else d
        tmp = prev
        prev = curr
        curr = tmp
    return prev[m - 1]


try:  # pragma: no cover - exercised implicitly on import
    from numba import njit

    _dfd_kernel = njit(cache=True)(_dfd_core)
except ImportError:  # pragma: no cover
    _dfd_kernel = _dfd_core


def discrete_frechet(p: PlanarPath | np.ndarray, q: PlanarPath | np.ndarray) -> float:
    """Discrete Fréchet distance between two planar polylines, in meters.

    Dynamic program over all monotone couplings of the two vertex sequences
    (Eiter & Mannila); O(|p|·|q|) time.
    """
    pa = p.points if isinstance(p, PlanarPath) else PlanarPath(p).points
    qa = q.points if isinstance(q, PlanarPath) else PlanarPath(q).points
    return float(_dfd_kernel(pa, qa))


def path_similarity(full: PlanarPath, reconstructed: PlanarPath) -> float:
    """Similarity in [0, 1] between a full path and a reconstruction of it.

    1 - min(1, frechet / diameter(full)): 1.0 for an exact reconstruction,
    0.0 once the reconstruction strays by the full path's own extent.
    """
    if len(full) < 2 or len(reconstructed) < 2:
        raise ValueError("path similarity requires at least 2 points per path")
    diam = full.diameter()
    if diam <= 0.0:
        raise ValueError("full path has zero diameter; similarity undefined")
    d = discrete_frechet(full, reconstructed)
    return 1.0 - min(1.0, d / diam)


@dataclass(frozen=True)
class LossModel:
    """Calibrated privacy-loss parameters.

    k scales the per-server sampling rate f_d/s, p the raw frequency term,
    q the server-count term; the evaluated loss is clamped to
    [eps_clamp, 1] because the closed form can go (slightly) negative.
    """

    k: float = 12.447
    p: float = 0.1
    q: float = 10.0
    eps_clamp: float = 1e-9

    def __post_init__(self) -> None:
        if self.k <= 0 or self.p <= 0 or self.q <= 0:
            raise ValueError("loss coefficients k, p, q must be positive")
        if not (0.0 < self.eps_clamp < 1.0):
            raise ValueError("eps_clamp must lie in (0, 1)")


def total_loss_raw(model: LossModel, f_d: float, s: float) -> float:
    """Unclamped privacy loss 1 - exp(-k*f_d/s) - exp(-p*f_d) - exp(-q/s)."""
    if f_d <= 0:
        raise ValueError(f"f_d must be positive, got {f_d}")
    if s < 1:
        raise ValueError(f"server count must be >= 1, got {s}")
    return (
        1.0
        - math.exp(-model.k * f_d / s)
        - math.exp(-model.p * f_d)
        - math.exp(-model.q / s)
    )


def total_loss(model: LossModel, f_d: float, s: float) -> float:
    """Privacy loss clamped into [eps_clamp, 1]."""
    return min(1.0, max(model.eps_clamp, total_loss_raw(model, f_d, s)))


@dataclass(frozen=True)
class CalibrationReport:
    """Result of fitting the per-server decay 1 - exp(-k*f) to measured similarities."""

    fitted_k: float
    residual_rms: float
    points: tuple[tuple[float, float], ...]  # (f_d, mean similarity)
    converged: bool = True

    def __post_init__(self) -> None:
        if self.residual_rms < 0:
            raise ValueError("residual_rms must be nonnegative")
        if not self.points:
            raise ValueError("calibration report needs at least one point")
        for f, sim in self.points:
            if not (0.0 <= sim <= 1.0):
                raise ValueError(f"similarity {sim} at f_d={f} outside [0, 1]")

    def prediction(self, f_d: float) -> float:
        return 1.0 - math.exp(-self.fitted_k * f_d)

    def to_json_dict(self) -> dict:
        return {
            "fitted_k": self.fitted_k,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "points": [[f, sim] for f, sim in self.points],
        }


def fit_per_server_decay(points: Sequence[tuple[float, float]]) -> CalibrationReport:
    """Least-squares fit of loss(f) = 1 - exp(-k*f) to (frequency, similarity) points."""
    freqs = [f for f, _ in points]
    if len(set(freqs)) < 2:
        raise ValueError("underdetermined fit: need at least 2 distinct frequencies")
    fs = np.array(freqs)
    ys = np.array([y for _, y in points])

    # Seed k from the point nearest the middle of the response range.
    k0 = 1.0
    usable = [(f, y) for f, y in points if 0.0 < y < 1.0]
    if usable:
        f_mid, y_mid = usable[len(usable) // 2]
        k0 = max(-math.log(1.0 - y_mid) / f_mid, 1e-6)

    fit = fit_least_squares(lambda p: (1.0 - np.exp(-p[0] * fs)) - ys, [k0])
    return CalibrationReport(
        fitted_k=float(fit.params[0]),
        residual_rms=fit.residual_rms,
        points=tuple((float(f), float(y)) for f, y in points),
        converged=fit.converged,
    )


def mean_similarity_by_frequency(
    trajs: Iterable[Trajectory], freqs: Sequence[float]
) -> list[tuple[float, float]]:
    """Mean over vehicles of similarity(full path, path subsampled at f), per frequency.

    Means use exact summation, so the result is independent of vehicle order.
    """
    trajs = list(trajs)
    if not trajs:
        raise ValueError("need at least one trajectory")
    if not freqs:
        raise ValueError("need at least one frequency")
    sims: dict[float, list[float]] = {f: [] for f in freqs}
    for traj in trajs:
        origin = traj.centroid()
        full = project_planar(traj, origin=origin)
        for f in freqs:
            sub = project_planar(subsample(traj, f), origin=origin)
            sims[f].append(path_similarity(full, sub))
    return [(f, math.fsum(sims[f]) / len(sims[f])) for f in freqs]


def calibrate_per_server_loss(
    trajs: Iterable[Trajectory], freqs: Sequence[float] = DEFAULT_CALIBRATION_FREQS
) -> CalibrationReport:
    """Measure mean path similarity per sampling frequency and fit the decay coefficient."""
    return fit_per_server_decay(mean_similarity_by_frequency(trajs, freqs))
