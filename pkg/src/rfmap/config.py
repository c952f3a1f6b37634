"""Scenario configuration, loaded from JSON.

Keys in ``REQUIRED`` must be present (in the file or as overrides); every
other key has a default. Unknown keys are rejected so that typos do not
silently fall back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ContractError
from .interpolation import MeshGrid
from .pointprocess import Region
from .propagation import PathLossModel, ShadowingModel, thermal_floor_dbm


class ConfigError(ContractError):
    """Raised for unreadable, malformed or inconsistent configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    region: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    lambda_t: float = 3.0
    lambda_s: float = 313.0
    tx_power_dbm: float = 30.0
    alpha: float = 3.0
    f_hz: float = 1.0e9
    k: float | None = None
    r0_m: float | None = None
    shadow_mu_db: float = 0.0
    shadow_sigma_db: float = 0.0
    shadow_enabled: bool = False
    grid_nx: int = 100
    grid_ny: int = 100
    f_lo_hz: float | None = None
    f_hi_hz: float | None = None
    noise_floor_dbm: float | None = None
    merge_radius_m: float = 1.0
    psd_bins: int = 8
    seed: int = 0
    origin_lat: float = 0.0
    origin_lon: float = 0.0
    output_dir: str = "out"

    def __post_init__(self):
        try:
            Region(*self.region)
        except TypeError:
            raise ConfigError("region: expected [x_min, x_max, y_min, y_max]")
        except ContractError as exc:
            raise ConfigError(f"region: {exc}")
        for name in ("lambda_t", "lambda_s"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name}: must be >= 0")
        if self.grid_nx < 2 or self.grid_ny < 2:
            raise ConfigError("grid_nx/grid_ny: must be >= 2")
        if not self.f_hz > 0:
            raise ConfigError("f_hz: must be positive")
        lo, hi = self.band
        if not hi > lo:
            raise ConfigError("f_lo_hz/f_hi_hz: need f_hi_hz > f_lo_hz")
        if self.psd_bins < 1:
            raise ConfigError("psd_bins: must be >= 1")
        if not self.merge_radius_m >= 0:
            raise ConfigError("merge_radius_m: must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed: must be a non-negative integer")
        try:
            self.path_model()
            self.shadowing()
        except ContractError as exc:
            raise ConfigError(str(exc))

    @property
    def band(self) -> tuple[float, float]:
        """Analysis band; defaults to a 2 MHz capture centred on f_hz."""
        lo = self.f_lo_hz if self.f_lo_hz is not None else self.f_hz - 1.0e6
        hi = self.f_hi_hz if self.f_hi_hz is not None else self.f_hz + 1.0e6
        return lo, hi

    def region_obj(self) -> Region:
        return Region(*self.region)

    def grid(self) -> MeshGrid:
        return MeshGrid(self.region_obj(), self.grid_nx, self.grid_ny)

    def path_model(self) -> PathLossModel:
        if self.k is not None:
            return PathLossModel(self.alpha, self.k, self.f_hz, self.r0_m)
        return PathLossModel.free_space(self.f_hz, self.alpha, self.r0_m)

    def shadowing(self) -> ShadowingModel:
        return ShadowingModel(self.shadow_mu_db, self.shadow_sigma_db, self.shadow_enabled)

    def floor_dbm(self) -> float:
        if self.noise_floor_dbm is not None:
            return self.noise_floor_dbm
        lo, hi = self.band
        return thermal_floor_dbm(hi - lo)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["region"] = list(self.region)
        return d


REQUIRED = ("lambda_t", "lambda_s", "seed")
_FIELDS = {f.name: f for f in fields(ScenarioConfig)}
_INT_FIELDS = {"grid_nx", "grid_ny", "psd_bins", "seed"}
_BOOL_FIELDS = {"shadow_enabled"}
_STR_FIELDS = {"output_dir"}


def _line_of(text: str, key: str) -> int | None:
    for n, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return n
    return None


def parse_config(text: str, source: str = "<config>", overrides: dict | None = None) -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:1: top level must be a JSON object")
    kw = {}
    for key, val in raw.items():
        where = f"{source}:{_line_of(text, key) or 1}"
        if key not in _FIELDS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        try:
            if key == "region":
                if not (isinstance(val, list) and len(val) == 4):
                    raise TypeError
                val = tuple(float(v) for v in val)
            elif val is None:
                pass
            elif key in _BOOL_FIELDS:
                if not isinstance(val, bool):
                    raise TypeError
            elif key in _INT_FIELDS:
                if isinstance(val, bool) or not isinstance(val, int):
                    raise TypeError
            elif key in _STR_FIELDS:
                if not isinstance(val, str):
                    raise TypeError
            else:
                if isinstance(val, bool) or not isinstance(val, (int, float)):
                    raise TypeError
                val = float(val)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: bad value for {key!r}: {val!r}")
        kw[key] = val
    kw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in REQUIRED:
        if key not in kw:
            raise ConfigError(f"{source}: missing required field {key!r}")
    try:
        return ScenarioConfig(**kw)
    except ConfigError as exc:
        field_name = str(exc).split(":", 1)[0]
        raise ConfigError(f"{source}:{_line_of(text, field_name) or 1}: {exc}")


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {p}: {exc.strerror}") from exc
    return parse_config(text, str(p), overrides)
