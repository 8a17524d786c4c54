"""Run configuration: one JSON-round-trippable bundle of every knob the CLI exposes."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from typing import Any

from .econ import EconParams
from .optimize import Bounds
from .privacy import DEFAULT_CALIBRATION_FREQS
from .trajectories import DEFAULT_BBOX, GridSpec

# Published operating point the optimizer output is compared against.
REFERENCE_OPTIMUM = (3.57e-6, 7.31, 15.12)


@dataclass
class RunConfig:
    """Paths, grid, model parameters, bounds, and seeds for one workbench run."""

    traces: str | None = None
    out_dir: str = "out"
    seed: int = 0
    synthetic: bool = False
    synthetic_vehicles: int = 200
    synthetic_duration: int = 120
    bbox: tuple[float, float, float, float] = DEFAULT_BBOX
    cell_size: float = 1000.0
    time_bin: float = 10.0
    count_mode: str = "vehicles"
    average_over: str = "ever_occupied"
    calibration_freqs: tuple[float, ...] = DEFAULT_CALIBRATION_FREQS
    surface_vehicle_counts: tuple[int, ...] = ()  # empty: derived from fleet size
    surface_freqs: tuple[float, ...] = (1.0, 0.5, 0.25, 1.0 / 6.0, 0.125, 0.1)
    econ: EconParams = field(default_factory=EconParams)
    bounds: Bounds = field(default_factory=Bounds)
    n_starts: int = 32
    grid_resolution: int = 41
    reference_point: tuple[float, float, float] = REFERENCE_OPTIMUM
    sweep_param: str = "c2"
    sweep_values: tuple[float, ...] = ()
    sim_s_values: tuple[int, ...] = (1, 2, 4, 8)
    sim_trials: int = 3
    n_compromised: int = 1
    keep_shares: bool = False

    def grid_spec(self) -> GridSpec:
        return GridSpec(bbox=self.bbox, cell_size=self.cell_size, time_bin=self.time_bin)

    def to_json_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "econ":
                out["econ"] = value.to_json_dict()
            elif f.name == "bounds":
                out["bounds"] = value.to_json_dict()
            elif isinstance(value, tuple):
                out[f.name] = list(value)
            else:
                out[f.name] = value
        return out

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key == "econ":
                kwargs["econ"] = EconParams.from_json_dict(value)
            elif key == "bounds":
                kwargs["bounds"] = Bounds(
                    c1=tuple(value["c1"]), f_d=tuple(value["f_d"]), s=tuple(value["s"])
                )
            elif key in (
                "bbox",
                "calibration_freqs",
                "surface_vehicle_counts",
                "surface_freqs",
                "reference_point",
                "sweep_values",
                "sim_s_values",
            ):
                kwargs[key] = tuple(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def with_overrides(self, **kwargs: Any) -> "RunConfig":
        """New config with the given non-None fields replaced."""
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **updates) if updates else self

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return RunConfig.from_json_dict(json.load(fh))
