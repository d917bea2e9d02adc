"""Run configuration: strict JSON schema with environment overrides.

Unknown keys are rejected at every level (fail closed).  Scalar values can
be overridden through environment variables named
``MHDSPLIT_<SECTION>_<KEY>`` (for example ``MHDSPLIT_SCHEME_EPSILON`` or
``MHDSPLIT_OUTPUT_DIR``); override values are parsed as JSON literals
where possible and as strings otherwise.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .presets import PRESETS
from .scheme import SchemeParams
from .spectral import Grid

__all__ = ["RunConfig", "load_config", "AUDIT_NAMES"]

AUDIT_NAMES = (
    "global_energy",
    "local_energy",
    "energy_identity",
    "apriori",
    "caloric_bounds",
    "nonlinear_norms",
    "oscillation",
)

_ENV_PREFIX = "MHDSPLIT"

_SCHEMAS = {
    "grid": {"n", "box_length"},
    "scheme": {
        "epsilon",
        "dt",
        "horizon",
        "picard_tol",
        "max_iters",
        "window_policy",
        "window_length",
        "mollifier_kind",
        "dealias",
    },
    "initial": {"preset", "seed", "amplitude", "decay"},
    "output": {"dir"},
}

_AUDIT_OPTS = {
    "global_energy": set(),
    "energy_identity": set(),
    "apriori": set(),
    "caloric_bounds": set(),
    "local_energy": {"t_center", "t_halfwidth", "space_center", "space_halfwidth"},
    "nonlinear_norms": {"pairs"},
    "oscillation": {"R"},
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration."""

    grid_n: int
    box_length: float
    scheme: SchemeParams
    preset: str
    seed: int
    amplitude: float
    decay: float
    audits: tuple  # (name, opts dict) pairs
    out_dir: str
    raw: dict = field(repr=False, default_factory=dict)

    def make_grid(self) -> Grid:
        return Grid(self.grid_n, self.box_length)


def _reject_unknown(section: str, data: dict, allowed: set) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")


def _apply_env(data: dict) -> dict:
    for section, keys in _SCHEMAS.items():
        for key in keys:
            env = os.environ.get(f"{_ENV_PREFIX}_{section.upper()}_{key.upper()}")
            if env is None:
                continue
            try:
                val = json.loads(env)
            except json.JSONDecodeError:
                val = env
            data.setdefault(section, {})[key] = val
    return data


def load_config(path: str | Path | None = None, data: dict | None = None) -> RunConfig:
    """Parse, environment-override, and validate a configuration."""
    if data is None:
        if path is None:
            raise ConfigError("either a path or a data dict is required")
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    data = _apply_env(dict(data))
    _reject_unknown("<root>", data, {"grid", "scheme", "initial", "audits", "output"})
    for section in ("grid", "scheme", "initial", "output"):
        if section not in data:
            raise ConfigError(f"missing config section {section!r}")
        if not isinstance(data[section], dict):
            raise ConfigError(f"section {section!r} must be an object")
        _reject_unknown(section, data[section], _SCHEMAS[section])

    grid = data["grid"]
    try:
        n = int(grid["n"])
        box = float(grid.get("box_length", 2.0 * math.pi))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid section: {exc}") from exc

    s = data["scheme"]
    try:
        params = SchemeParams(
            epsilon=float(s["epsilon"]),
            horizon=float(s["horizon"]),
            dt=float(s["dt"]),
            picard_tol=float(s.get("picard_tol", 1e-10)),
            max_picard_iters=int(s.get("max_iters", 80)),
            window_policy=str(s.get("window_policy", "automatic")),
            window_length=(None if s.get("window_length") is None else float(s["window_length"])),
            mollifier_kind=str(s.get("mollifier_kind", "gaussian")),
            dealias=bool(s.get("dealias", True)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scheme section: {exc}") from exc
    except Exception as exc:  # InvalidParams from SchemeParams
        raise ConfigError(f"bad scheme section: {exc}") from exc

    init = data["initial"]
    preset = str(init.get("preset", "taylor_green"))
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {PRESETS}")
    try:
        seed = int(init.get("seed", 0))
        amplitude = float(init.get("amplitude", 0.1))
        decay = float(init.get("decay", 2.0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad initial section: {exc}") from exc

    audits_raw = data.get("audits", [{"name": name} for name in AUDIT_NAMES])
    if not isinstance(audits_raw, list):
        raise ConfigError("audits must be a list of objects with a 'name'")
    audits = []
    for entry in audits_raw:
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError(f"bad audit entry {entry!r}")
        name = entry["name"]
        if name not in AUDIT_NAMES:
            raise ConfigError(f"unknown audit {name!r}; choose from {AUDIT_NAMES}")
        opts = {k: v for k, v in entry.items() if k != "name"}
        _reject_unknown(f"audit {name}", opts, _AUDIT_OPTS[name])
        audits.append((name, opts))

    out_dir = str(data["output"].get("dir", "mhdsplit-out"))

    try:
        Grid(n, box)
    except Exception as exc:
        raise ConfigError(f"bad grid: {exc}") from exc

    return RunConfig(
        grid_n=n,
        box_length=box,
        scheme=params,
        preset=preset,
        seed=seed,
        amplitude=amplitude,
        decay=decay,
        audits=tuple((name, dict(opts)) for name, opts in audits),
        out_dir=out_dir,
        raw=data,
    )
