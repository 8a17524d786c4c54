"""Profit maximization over (c1, f_d, s): box-constrained Nelder-Mead with
multi-start, a brute-force grid certifier, and parameter sensitivity sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .econ import EconParams, profit

SWEEPABLE = ("c2", "c3", "beta", "V", "sigma")


class NonFiniteObjective(RuntimeError):
    """Raised when the objective returns NaN or infinity during a search."""


@dataclass(frozen=True)
class Bounds:
    """Search box; c1 is explored in log-space, f_d and s linearly."""

    c1: tuple[float, float] = (1e-9, 1e-3)
    f_d: tuple[float, float] = (0.1, 60.0)
    s: tuple[float, float] = (1.0, 100.0)

    def __post_init__(self) -> None:
        for name in ("c1", "f_d", "s"):
            lo, hi = getattr(self, name)
            if not (0.0 < lo < hi):
                raise ValueError(f"bounds for {name} must satisfy 0 < lo < hi, got ({lo}, {hi})")

    def clip(self, c1: float, f_d: float, s: float) -> tuple[float, float, float]:
        return (
            min(max(c1, self.c1[0]), self.c1[1]),
            min(max(f_d, self.f_d[0]), self.f_d[1]),
            min(max(s, self.s[0]), self.s[1]),
        )

    def contains(self, c1: float, f_d: float, s: float) -> bool:
        return (
            self.c1[0] <= c1 <= self.c1[1]
            and self.f_d[0] <= f_d <= self.f_d[1]
            and self.s[0] <= s <= self.s[1]
        )

    def to_json_dict(self) -> dict:
        return {"c1": list(self.c1), "f_d": list(self.f_d), "s": list(self.s)}


DEFAULT_BOUNDS = Bounds()


class NMResult(NamedTuple):
    x: np.ndarray
    fun: float
    converged: bool
    nfev: int


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray | Sequence[float],
    lower: np.ndarray | Sequence[float],
    upper: np.ndarray | Sequence[float],
    diameter_tol: float = 1e-10,
    max_iter: int = 5000,
) -> NMResult:
    """Maximize a function over a box with the Nelder-Mead simplex.

    Reflection/expansion/contraction/shrink coefficients are (1, 2, 0.5, 0.5);
    candidate points are clipped coordinate-wise into the box. Terminates when
    the simplex's relative diameter drops below `diameter_tol` or after
    `max_iter` iterations.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
    dim = len(x0)
    nfev = 0

    def evaluate(x: np.ndarray) -> float:
        nonlocal nfev
        nfev += 1
        val = objective(x)
        if not math.isfinite(val):
            raise NonFiniteObjective(f"objective returned {val} at {x.tolist()}")
        return val

    def clip(x: np.ndarray) -> np.ndarray:
        return np.clip(x, lower, upper)

    # Initial simplex: perturb each coordinate by 5% of its box range,
    # stepping inward when the positive step would leave the box.
    simplex = [x0]
    for k in range(dim):
        step = 0.05 * (upper[k] - lower[k])
        vertex = x0.copy()
        vertex[k] = x0[k] + step if x0[k] + step <= upper[k] else x0[k] - step
        simplex.append(vertex)
    values = [evaluate(v) for v in simplex]

    def rel_diameter() -> float:
        best = simplex[int(np.argmax(values))]
        scale = np.maximum(1.0, np.abs(best))
        return max(float(np.max(np.abs(v - best) / scale)) for v in simplex)

    converged = False
    for _ in range(max_iter):
        order = np.argsort(values)[::-1]  # descending: best first
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if rel_diameter() < diameter_tol:
            converged = True
            break

        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        reflected = clip(centroid + 1.0 * (centroid - worst))
        f_reflected = evaluate(reflected)

        if f_reflected > values[0]:
            expanded = clip(centroid + 2.0 * (reflected - centroid))
            f_expanded = evaluate(expanded)
            if f_expanded > f_reflected:
                simplex[-1], values[-1] = expanded, f_expanded
            else:
                simplex[-1], values[-1] = reflected, f_reflected
            continue
        if f_reflected > values[-2]:
            simplex[-1], values[-1] = reflected, f_reflected
            continue

        if f_reflected > values[-1]:  # outside contraction
            contracted = clip(centroid + 0.5 * (reflected - centroid))
            f_contracted = evaluate(contracted)
            accept = f_contracted >= f_reflected
        else:  # inside contraction
            contracted = clip(centroid + 0.5 * (worst - centroid))
            f_contracted = evaluate(contracted)
            accept = f_contracted > values[-1]
        if accept:
            simplex[-1], values[-1] = contracted, f_contracted
            continue

        best = simplex[0]
        simplex = [best] + [clip(best + 0.5 * (v - best)) for v in simplex[1:]]
        values = [values[0]] + [evaluate(v) for v in simplex[1:]]

    order = np.argsort(values)[::-1]
    best_idx = int(order[0])
    return NMResult(simplex[best_idx].copy(), values[best_idx], converged, nfev)


@dataclass(frozen=True)
class Solution:
    """An optimization result over (c1, f_d, s) plus search diagnostics."""

    c1_star: float
    f_d_star: float
    s_star: float
    profit_star: float
    participation_model: str
    server_cost_model: str
    n_evaluations: int
    converged: bool
    stationarity_gap: float
    profit_at_floor_s: float
    profit_at_ceil_s: float

    def to_json_dict(self) -> dict:
        return {
            "c1": self.c1_star,
            "f_d": self.f_d_star,
            "s": self.s_star,
            "profit": self.profit_star,
            "participation_model": self.participation_model,
            "server_cost_model": self.server_cost_model,
            "n_evaluations": self.n_evaluations,
            "converged": self.converged,
            "stationarity_gap": self.stationarity_gap,
            "profit_at_floor_s": self.profit_at_floor_s,
            "profit_at_ceil_s": self.profit_at_ceil_s,
        }


def _stationarity_gap(
    params: EconParams, bounds: Bounds, point: tuple[float, float, float], base: float
) -> float:
    """Largest profit improvement from a +/-0.1% single-coordinate step inside the box."""
    gap = 0.0
    for k in range(3):
        for direction in (1.0 - 1e-3, 1.0 + 1e-3):
            probe = list(point)
            probe[k] *= direction
            if not bounds.contains(*probe):
                continue
            gap = max(gap, profit(params, *probe) - base)
    return gap


def _finalize(
    params: EconParams,
    bounds: Bounds,
    point: tuple[float, float, float],
    n_evaluations: int,
    converged: bool,
) -> Solution:
    c1, f_d, s = (float(v) for v in bounds.clip(*point))
    value = profit(params, c1, f_d, s)
    s_lo, s_hi = bounds.clip(c1, f_d, math.floor(s))[2], bounds.clip(c1, f_d, math.ceil(s))[2]
    return Solution(
        c1_star=c1,
        f_d_star=f_d,
        s_star=s,
        profit_star=value,
        participation_model=params.participation_model,
        server_cost_model=params.server_cost_model,
        n_evaluations=n_evaluations,
        converged=converged,
        stationarity_gap=_stationarity_gap(params, bounds, (c1, f_d, s), value),
        profit_at_floor_s=profit(params, c1, f_d, s_lo),
        profit_at_ceil_s=profit(params, c1, f_d, s_hi),
    )


def _latin_hypercube(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """n stratified points in [0, 1)^dim, one per row."""
    u = np.empty((n, dim))
    for k in range(dim):
        u[:, k] = (rng.permutation(n) + rng.random(n)) / n
    return u


def optimize_profit(
    params: EconParams,
    bounds: Bounds = DEFAULT_BOUNDS,
    n_starts: int = 32,
    seed: int = 0,
) -> Solution:
    """Multi-start Nelder-Mead profit maximization.

    Starts are a seeded Latin-hypercube over the box (c1 sampled
    log-uniformly) plus the box corners and center, since this objective's
    optima routinely sit on the bounds. Every run is restarted once from its
    endpoint with a fresh simplex, which undoes premature simplex collapse
    against a clipped face. The best run wins, with exact profit ties broken
    toward the lexicographically smallest (c1, f_d, s).
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    log_c1 = (math.log(bounds.c1[0]), math.log(bounds.c1[1]))
    lower = np.array([log_c1[0], bounds.f_d[0], bounds.s[0]])
    upper = np.array([log_c1[1], bounds.f_d[1], bounds.s[1]])

    def objective(z: np.ndarray) -> float:
        c1, f_d, s = bounds.clip(math.exp(z[0]), z[1], z[2])
        return profit(params, c1, f_d, s)

    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    starts = [
        lower + u * (upper - lower)
        for u in np.vstack(
            [
                _latin_hypercube(rng, n_starts, 3),
                np.array(np.meshgrid([0.0, 1.0], [0.0, 1.0], [0.0, 1.0])).T.reshape(-1, 3),
                [[0.5, 0.5, 0.5]],
            ]
        )
    ]

    candidates = []
    total_nfev = 0
    any_converged = False
    for z0 in starts:
        result = nelder_mead(objective, z0, lower, upper)
        restarted = nelder_mead(objective, result.x, lower, upper)
        total_nfev += result.nfev + restarted.nfev
        if restarted.fun > result.fun:
            result = restarted
        any_converged = any_converged or result.converged
        point = bounds.clip(math.exp(result.x[0]), result.x[1], result.x[2])
        candidates.append((result.fun, point))

    best_fun = max(fun for fun, _ in candidates)
    best_point = min(point for fun, point in candidates if fun == best_fun)
    return _finalize(params, bounds, best_point, total_nfev, any_converged)


def grid_oracle(params: EconParams, bounds: Bounds = DEFAULT_BOUNDS, resolution: int = 41) -> Solution:
    """Exhaustive profit evaluation on a (log c1) x f_d x s lattice; the argmax certifies
    the nonlinear optimizer on coarse instances."""
    if resolution < 2:
        raise ValueError("grid resolution must be >= 2 per axis")
    c1s = np.geomspace(bounds.c1[0], bounds.c1[1], resolution)
    f_ds = np.linspace(bounds.f_d[0], bounds.f_d[1], resolution)
    ss = np.linspace(bounds.s[0], bounds.s[1], resolution)

    best = -math.inf
    best_point = (c1s[0], f_ds[0], ss[0])
    for c1 in c1s:
        for f_d in f_ds:
            for s in ss:
                value = profit(params, c1, f_d, s)
                if value > best:  # lexicographic iteration order breaks exact ties
                    best = value
                    best_point = (float(c1), float(f_d), float(s))
    return _finalize(params, bounds, best_point, resolution**3, True)


@dataclass(frozen=True)
class SweepResult:
    """Re-optimized solutions across one swept market parameter."""

    parameter: str
    values: tuple[float, ...]
    solutions: tuple[Solution, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.solutions):
            raise ValueError("values and solutions must have the same length")

    def write_csv(self, fileobj) -> None:
        fileobj.write("param_value,c1,f_d,s,profit\n")
        for value, sol in zip(self.values, self.solutions):
            fileobj.write(
                f"{value},{sol.c1_star},{sol.f_d_star},{sol.s_star},{sol.profit_star}\n"
            )

    def to_json_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "values": list(self.values),
            "solutions": [s.to_json_dict() for s in self.solutions],
        }


def _with_parameter(params: EconParams, name: str, value: float) -> EconParams:
    if name == "beta":
        return replace(params, utility=replace(params.utility, beta=value))
    return replace(params, **{name: value})


def sweep(
    params: EconParams,
    bounds: Bounds,
    parameter: str,
    values: Sequence[float],
    n_starts: int = 32,
    seed: int = 0,
) -> SweepResult:
    """Re-optimize for each value of one parameter, re-using the same seed so
    results do not depend on evaluation order."""
    if parameter not in SWEEPABLE:
        raise ValueError(f"sweep parameter must be one of {SWEEPABLE}, got {parameter!r}")
    if not values:
        raise ValueError("sweep needs at least one value")
    solutions = tuple(
        optimize_profit(_with_parameter(params, parameter, v), bounds, n_starts, seed)
        for v in values
    )
    return SweepResult(parameter, tuple(float(v) for v in values), solutions)
