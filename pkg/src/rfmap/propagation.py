"""Power-law path loss with optional log-normal shadowing.

Distances handed to the path-loss functions are in meters; source and
evaluation coordinates elsewhere in the package are planar km, and
:func:`received_power_dbm` does the conversion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .pointprocess import PointSet, make_rng

SPEED_OF_LIGHT = 2.99792458e8  # m/s
THERMAL_NOISE_DBM_PER_HZ = -174.0
M_PER_KM = 1000.0
# Near-field clamp used when a model has no reference distance.
DEFAULT_CLAMP_M = 1.0


def dbm_to_mw(dbm):
    return np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(np.asarray(mw, dtype=float))


def thermal_floor_dbm(bandwidth_hz: float) -> float:
    """Thermal noise power integrated over ``bandwidth_hz``."""
    if bandwidth_hz <= 0:
        raise ContractError("bandwidth must be positive")
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz)


def far_field_distance(f_hz: float) -> float:
    """Half-wavelength dipole far-field distance c/(2f), in meters."""
    if not f_hz > 0:
        raise ContractError(f"frequency must be positive, got {f_hz}")
    return SPEED_OF_LIGHT / (2.0 * f_hz)


def free_space_k(f_hz: float, r0_m: float | None = None, alpha: float = 3.0) -> float:
    """Path-loss constant matching free space out to ``r0_m``.

    K = (c / (4 pi f r0))^2 * r0^alpha, with r in meters. ``r0_m`` defaults
    to the half-wave dipole far-field distance c/(2f), in which case the
    free-space factor collapses to 1/(2 pi)^2.
    """
    if not f_hz > 0:
        raise ContractError(f"frequency must be positive, got {f_hz}")
    if r0_m is None:
        r0_m = far_field_distance(f_hz)
    if not r0_m > 0:
        raise ContractError(f"reference distance must be positive, got {r0_m}")
    if not alpha > 0:
        raise ContractError(f"alpha must be positive, got {alpha}")
    return (SPEED_OF_LIGHT / (4.0 * math.pi * f_hz * r0_m)) ** 2 * r0_m ** alpha


@dataclass(frozen=True)
class PathLossModel:
    """l(r) = K r^-alpha, r in meters.

    ``f_hz`` and ``r0_m`` are kept as provenance when K was derived from
    them; ``r0_m`` also sets the near-field clamp distance.
    """

    alpha: float
    k: float
    f_hz: float | None = None
    r0_m: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ContractError(f"alpha must be positive, got {self.alpha}")
        if not (np.isfinite(self.k) and self.k > 0):
            raise ContractError(f"K must be positive, got {self.k}")
        if not 2.0 <= self.alpha <= 4.0:
            warnings.warn(f"path-loss exponent {self.alpha} outside the usual [2, 4]",
                          stacklevel=3)

    @classmethod
    def free_space(cls, f_hz: float, alpha: float = 3.0,
                   r0_m: float | None = None) -> "PathLossModel":
        if r0_m is None:
            r0_m = far_field_distance(f_hz)
        return cls(alpha, free_space_k(f_hz, r0_m, alpha), f_hz, r0_m)

    @property
    def clamp_m(self) -> float:
        return self.r0_m if self.r0_m is not None else DEFAULT_CLAMP_M

    def gain(self, r_m):
        """Linear l(r); no clamping."""
        return self.k * np.power(r_m, -self.alpha)


@dataclass(frozen=True)
class ShadowingModel:
    """Z_dB ~ N(mu_db, sigma_db^2); received power is divided by Z."""

    mu_db: float = 0.0
    sigma_db: float = 0.0
    enabled: bool = False

    def __post_init__(self):
        if not np.isfinite(self.mu_db) or not np.isfinite(self.sigma_db):
            raise ContractError("shadowing parameters must be finite")
        if self.sigma_db < 0:
            raise ContractError(f"sigma_db must be >= 0, got {self.sigma_db}")

    def draw_db(self, rng: np.random.Generator, size) -> np.ndarray:
        if not self.enabled:
            return np.zeros(size)
        return rng.normal(self.mu_db, self.sigma_db, size=size)


NO_SHADOWING = ShadowingModel()


@dataclass(frozen=True)
class SourceField:
    sources: PointSet
    tx_power_dbm: float = 30.0

    def __post_init__(self):
        if not np.isfinite(self.tx_power_dbm):
            raise ContractError("tx_power_dbm must be finite")


def path_loss_db(model: PathLossModel, r_m) -> np.ndarray | float:
    """10 log10(K) - 10 alpha log10(r). Raises on r <= 0 (no clamping here)."""
    r = np.asarray(r_m, dtype=float)
    if np.any(~(r > 0)):
        raise ContractError("path loss is singular at r <= 0; clamp the distance first")
    out = 10.0 * math.log10(model.k) - 10.0 * model.alpha * np.log10(r)
    return float(out) if out.ndim == 0 else out


def received_power_mw(field: SourceField, model: PathLossModel, at,
                      shadow: ShadowingModel = NO_SHADOWING,
                      rng: np.random.Generator | None = None,
                      noise_floor_dbm: float | None = None) -> np.ndarray:
    """Linear-domain received power (mW) at each row of ``at`` (km).

    Contributions from every source are summed in mW after the near-field
    clamp. Shadowing, when enabled, draws one independent Z per
    (source, evaluation point) pair.
    """
    at = np.atleast_2d(np.asarray(at, dtype=float))
    src = field.sources.points
    total = np.zeros(len(at))
    if len(src):
        d_km = np.hypot(at[:, None, 0] - src[None, :, 0], at[:, None, 1] - src[None, :, 1])
        r_m = np.maximum(d_km * M_PER_KM, model.clamp_m)
        contrib_db = field.tx_power_dbm + path_loss_db(model, r_m)
        if shadow.enabled:
            if rng is None:
                raise ContractError("shadowing enabled but no generator supplied")
            contrib_db = contrib_db - shadow.draw_db(rng, contrib_db.shape)
        total = dbm_to_mw(contrib_db).sum(axis=1)
    if noise_floor_dbm is not None:
        total = total + dbm_to_mw(noise_floor_dbm)
    return total


def received_power_dbm(field: SourceField, model: PathLossModel, at,
                       shadow: ShadowingModel = NO_SHADOWING, seed: int | None = None,
                       noise_floor_dbm: float | None = None):
    """Received power in dBm at a point (x, y) in km, or at each row of an array.

    With no sources and no floor the result is -inf dBm.
    """
    scalar = np.ndim(at) == 1
    rng = None
    if shadow.enabled:
        rng = make_rng(seed) if seed is not None else np.random.default_rng()
    with np.errstate(divide="ignore"):
        out = mw_to_dbm(received_power_mw(field, model, at, shadow, rng, noise_floor_dbm))
    return float(out[0]) if scalar else out
