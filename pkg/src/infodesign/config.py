"""Run configuration: a flat ``key = value`` text format and its parsing.

The format is deliberately spartan (one pair per line, ``#`` comments,
comma-separated lists, semicolon-separated grid axes) so configs diff
cleanly and parse without dependencies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grids import GridAxis, GridSpec
from .models import FlyModel, ParameterVector, SystemModel
from .observations import ObservationModel, PoissonTrapModel
from .solver import InputGrid

__all__ = ["RunConfig", "parse_config", "MODEL_PRESETS"]

# Preset name -> (system model, observation model) factory.
MODEL_PRESETS = {
    "fly": lambda: (FlyModel(), PoissonTrapModel()),
}

_REQUIRED = ("model", "theta0")

_DEFAULTS = {
    "horizon": "10",
    "input_lo": "0",
    "input_hi": "0.99",
    "input_points": "100",
    "extra_inputs": "0.9795",
    "grid": "auto",
    "grid_points": "100",
    "pilot_count": "64",
    "seed": "0",
    "weights": "",
    "output_dir": ".",
    "workers": "0",
    "oracle_budget": str(10**7),
    "mc_samples": str(10**6),
}

_KNOWN_KEYS = set(_REQUIRED) | set(_DEFAULTS)


@dataclass
class RunConfig:
    """Validated settings for one solver / evaluation / verification run."""

    model_name: str
    theta0: np.ndarray
    horizon: int
    input_lo: float
    input_hi: float
    input_points: int
    extra_inputs: tuple[float, ...]
    grid: GridSpec | None  # None means auto bounds
    grid_points: int
    pilot_count: int
    seed: int
    weights: np.ndarray | None
    output_dir: Path
    workers: int
    oracle_budget: int
    mc_samples: int

    def build_models(self) -> tuple[SystemModel, ObservationModel]:
        return MODEL_PRESETS[self.model_name]()

    def build_params(self, model: SystemModel) -> ParameterVector:
        if self.theta0.size != model.p:
            raise ConfigError(
                f"theta0 has {self.theta0.size} entries, model "
                f"{self.model_name!r} expects {model.p}"
            )
        return ParameterVector(self.theta0, model.param_names)

    def build_input_grid(self) -> InputGrid:
        return InputGrid.uniform(
            self.input_lo, self.input_hi, self.input_points, self.extra_inputs
        )


def _parse_float_list(raw: str, key: str):
    raw = raw.strip()
    if not raw:
        return ()
    try:
        return tuple(float(tok) for tok in raw.split(","))
    except ValueError as err:
        raise ConfigError(f"key {key!r}: expected comma-separated numbers, got {raw!r}") from err


def _parse_int(raw: str, key: str, minimum: int | None = None) -> int:
    try:
        value = int(raw)
    except ValueError as err:
        raise ConfigError(f"key {key!r}: expected an integer, got {raw!r}") from err
    if minimum is not None and value < minimum:
        raise ConfigError(f"key {key!r}: must be at least {minimum}, got {value}")
    return value


def _parse_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError as err:
        raise ConfigError(f"key {key!r}: expected a number, got {raw!r}") from err


def _parse_grid(raw: str) -> GridSpec | None:
    raw = raw.strip()
    if raw == "auto":
        return None
    axes = []
    for part in raw.split(";"):
        fields = [tok.strip() for tok in part.split(",")]
        if len(fields) != 3:
            raise ConfigError(
                f"key 'grid': each axis needs 'lo,hi,points', got {part.strip()!r}"
            )
        axes.append(
            GridAxis(
                _parse_float(fields[0], "grid"),
                _parse_float(fields[1], "grid"),
                _parse_int(fields[2], "grid", minimum=2),
            )
        )
    return GridSpec(tuple(axes))


def parse_config(path) -> RunConfig:
    """Parse and validate a flat key = value configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = body.partition("=")
        key = key.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()

    for key in _REQUIRED:
        if key not in pairs:
            raise ConfigError(f"missing required key {key!r}")
    merged = {**_DEFAULTS, **pairs}

    model_name = merged["model"]
    if model_name not in MODEL_PRESETS:
        known = ", ".join(sorted(MODEL_PRESETS))
        raise ConfigError(f"key 'model': unknown preset {model_name!r} (known: {known})")

    theta0 = np.asarray(_parse_float_list(merged["theta0"], "theta0"), dtype=np.float64)
    if theta0.size == 0:
        raise ConfigError("key 'theta0': must not be empty")
    weights_list = _parse_float_list(merged["weights"], "weights")
    weights = np.asarray(weights_list, dtype=np.float64) if weights_list else None

    return RunConfig(
        model_name=model_name,
        theta0=theta0,
        horizon=_parse_int(merged["horizon"], "horizon", minimum=0),
        input_lo=_parse_float(merged["input_lo"], "input_lo"),
        input_hi=_parse_float(merged["input_hi"], "input_hi"),
        input_points=_parse_int(merged["input_points"], "input_points", minimum=1),
        extra_inputs=_parse_float_list(merged["extra_inputs"], "extra_inputs"),
        grid=_parse_grid(merged["grid"]),
        grid_points=_parse_int(merged["grid_points"], "grid_points", minimum=2),
        pilot_count=_parse_int(merged["pilot_count"], "pilot_count", minimum=1),
        seed=_parse_int(merged["seed"], "seed"),
        weights=weights,
        output_dir=Path(merged["output_dir"]),
        workers=_parse_int(merged["workers"], "workers", minimum=0),
        oracle_budget=_parse_int(merged["oracle_budget"], "oracle_budget", minimum=1),
        mc_samples=_parse_int(merged["mc_samples"], "mc_samples", minimum=1),
    )
