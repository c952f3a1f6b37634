"""Sensor deployment density from Boolean-model coverage.

Sensors form a PPP of intensity lambda_S and each carries a grain: a disk
within which a source is "seen". For i.i.d. grains S the probability that
an arbitrary location is uncovered is exp(-lambda_S * E|S|), so requiring
coverage probability beta gives lambda_S = -ln(1 - beta) / E|S|.

Two grain models are supported:

* fixed radius r (spatial constraint), E|S| = pi r^2;
* relative power constraint: a sensor must receive no less than A dB below
  the source power under l(r) = K r^-alpha and log-normal shadowing
  Z_dB ~ N(mu, sigma^2). The grain radius is then
  R = (K 10^(A/10))^(1/alpha) Z^(-1/alpha), and
  E|S| = pi K^(2/alpha) 10^(A/(5 alpha)) exp(-2 zeta mu/alpha + 2 zeta^2 sigma^2/alpha^2)
  with zeta = ln(10)/10.

Path-loss distances are in meters; densities are per km^2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import ndtri

from .errors import ContractError
from .pointprocess import Region, make_rng
from .propagation import PathLossModel, ShadowingModel

ZETA = math.log(10.0) / 10.0
M2_PER_KM2 = 1.0e6
# Sensors for Monte Carlo coverage are drawn on the region dilated by this
# upper quantile of the grain radius.
RADIUS_PAD_QUANTILE = 0.9999


@dataclass(frozen=True)
class DensityParams:
    """Inputs to the density formulas.

    ``a_db`` is a positive magnitude: the sensor must see at least the source
    power minus ``a_db``. ``r_km`` is only used by the fixed-radius variant.
    """

    beta: float
    a_db: float = 90.0
    path: PathLossModel | None = None
    shadow: ShadowingModel = ShadowingModel(0.0, 4.0, True)
    r_km: float | None = None

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ContractError(f"beta must lie in (0, 1), got {self.beta}")
        if self.r_km is None:
            if self.path is None:
                raise ContractError("power-constraint params need a path-loss model")
            if not self.a_db > 0:
                raise ContractError(f"a_db must be positive, got {self.a_db}")
        elif not self.r_km > 0:
            raise ContractError(f"r_km must be positive, got {self.r_km}")

    @classmethod
    def free_space(cls, beta: float, f_hz: float = 1e9, alpha: float = 3.0,
                   a_db: float = 90.0, mu_db: float = 0.0, sigma_db: float = 4.0) -> "DensityParams":
        """Free-space K with the half-wave dipole reference distance."""
        return cls(beta, a_db, PathLossModel.free_space(f_hz, alpha),
                   ShadowingModel(mu_db, sigma_db, True))

    def with_beta(self, beta: float) -> "DensityParams":
        return replace(self, beta=beta)

    @property
    def mu_db(self) -> float:
        return self.shadow.mu_db if self.shadow.enabled else 0.0

    @property
    def sigma_db(self) -> float:
        return self.shadow.sigma_db if self.shadow.enabled else 0.0


def coverage_probability_fixed_r(lambda_s: float, r_km: float) -> float:
    if lambda_s < 0 or not r_km > 0:
        raise ContractError("need lambda_s >= 0 and r_km > 0")
    return -math.expm1(-lambda_s * math.pi * r_km ** 2)


def min_density_fixed_r(beta: float, r_km: float) -> float:
    """Smallest lambda_S (per km^2) putting a sensor within r of a source w.p. beta."""
    if not 0.0 < beta < 1.0:
        raise ContractError(f"beta must lie in (0, 1), got {beta}")
    if not r_km > 0:
        raise ContractError(f"r_km must be positive, got {r_km}")
    return -math.log1p(-beta) / (math.pi * r_km ** 2)


def deterministic_radius_m(params: DensityParams) -> float:
    """Grain radius with Z = 1: (K 10^(A/10))^(1/alpha)."""
    p = params.path
    return (p.k * 10.0 ** (params.a_db / 10.0)) ** (1.0 / p.alpha)


def expected_coverage_area(params: DensityParams) -> float:
    """E|S| in km^2 for the relative-power grain."""
    p = params.path
    if p is None or not p.alpha > 0:
        raise ContractError("expected_coverage_area needs a path model with alpha > 0")
    alpha = p.alpha
    mu, sigma = params.mu_db, params.sigma_db
    area_m2 = (math.pi * p.k ** (2.0 / alpha) * 10.0 ** (params.a_db / (5.0 * alpha))
               * math.exp(-2.0 * ZETA * mu / alpha + 2.0 * ZETA ** 2 * sigma ** 2 / alpha ** 2))
    return area_m2 / M2_PER_KM2


def coverage_probability_power(lambda_s: float, params: DensityParams) -> float:
    if lambda_s < 0:
        raise ContractError("lambda_s must be >= 0")
    return -math.expm1(-lambda_s * expected_coverage_area(params))


def min_density_power_constraint(params: DensityParams) -> float:
    """Sensors per km^2 needed for coverage probability ``params.beta``."""
    return -math.log1p(-params.beta) / expected_coverage_area(params)


def sweep_beta(params: DensityParams, betas) -> np.ndarray:
    """(beta, lambda_S) rows over ``betas``."""
    betas = np.asarray(betas, dtype=float)
    if np.any((betas <= 0) | (betas >= 1)):
        raise ContractError("every beta must lie in (0, 1)")
    lam = [min_density_power_constraint(params.with_beta(float(b))) for b in betas]
    return np.column_stack([betas, lam])


def sweep_frequency(params: DensityParams, freqs_hz) -> np.ndarray:
    """(f_hz, lambda_S) rows; K is rebuilt per frequency with r0 = c/(2f)."""
    freqs = np.asarray(freqs_hz, dtype=float)
    if np.any(freqs <= 0):
        raise ContractError("frequencies must be positive")
    alpha = params.path.alpha
    lam = [min_density_power_constraint(replace(params, path=PathLossModel.free_space(float(f), alpha)))
           for f in freqs]
    return np.column_stack([freqs, lam])


def write_curve_csv(path, curve: np.ndarray, header: tuple[str, str]) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for x, y in curve:
            w.writerow([repr(float(x)), repr(float(y))])


def draw_radii_km(params: DensityParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """i.i.d. grain radii in km for ``n`` sensors."""
    if params.r_km is not None:
        return np.full(n, float(params.r_km))
    z_db = rng.normal(params.mu_db, params.sigma_db, size=n) if params.sigma_db > 0 \
        else np.full(n, params.mu_db)
    return deterministic_radius_m(params) * 10.0 ** (-z_db / (10.0 * params.path.alpha)) / 1000.0


def radius_quantile_km(params: DensityParams, q: float = RADIUS_PAD_QUANTILE) -> float:
    if params.r_km is not None:
        return float(params.r_km)
    # R decreases in Z_dB, so the upper R quantile sits at the lower Z_dB quantile
    z_db = params.mu_db + params.sigma_db * float(ndtri(1.0 - q))
    return deterministic_radius_m(params) * 10.0 ** (-z_db / (10.0 * params.path.alpha)) / 1000.0


@dataclass(frozen=True)
class CoverageEstimate:
    probability: float
    stderr: float
    n_points: int
    n_trials: int


def _trial_seeds(seed: int, n_trials: int) -> np.ndarray:
    return np.random.SeedSequence(int(seed)).generate_state(n_trials, dtype=np.uint64)


def monte_carlo_coverage(lambda_s: float, params: DensityParams, region: Region,
                         n_trials: int, seed: int,
                         points_per_trial: int = 1000) -> CoverageEstimate:
    """Fraction of uniform test locations inside the union of sensor grains.

    Each trial draws a fresh sensor PPP on ``region`` dilated by the 99.99th
    percentile grain radius (so boundary test points see a stationary
    process), gives each sensor an independent radius, and drops
    ``points_per_trial`` uniform test sources on ``region``. The standard
    error is taken across trials.
    """
    if n_trials < 1 or points_per_trial < 1:
        raise ContractError("need at least one trial and one test point per trial")
    if lambda_s < 0:
        raise ContractError("lambda_s must be >= 0")
    pad = radius_quantile_km(params)
    big = region.dilate(pad)
    fractions = np.empty(n_trials)
    for i, s in enumerate(_trial_seeds(seed, n_trials)):
        rng = make_rng(s)
        n = int(rng.poisson(lambda_s * big.area()))
        sensors = np.column_stack([rng.uniform(big.x_min, big.x_max, n),
                                   rng.uniform(big.y_min, big.y_max, n)])
        radii = draw_radii_km(params, rng, n)
        tests = np.column_stack([rng.uniform(region.x_min, region.x_max, points_per_trial),
                                 rng.uniform(region.y_min, region.y_max, points_per_trial)])
        covered = np.zeros(points_per_trial, dtype=bool)
        if n:
            hits = cKDTree(tests).query_ball_point(sensors, radii)
            for h in hits:
                covered[h] = True
        fractions[i] = covered.mean()
    se = float(fractions.std(ddof=1) / math.sqrt(n_trials)) if n_trials > 1 else float("nan")
    return CoverageEstimate(float(fractions.mean()), se, n_trials * points_per_trial, n_trials)


def monte_carlo_detection(lambda_s: float, r_km: float, region: Region, n_trials: int,
                          seed: int, points_per_trial: int = 1000) -> CoverageEstimate:
    """Fraction of test sources with at least one sensor inside a disk of
    radius ``r_km`` drawn around the *source*."""
    if n_trials < 1 or points_per_trial < 1:
        raise ContractError("need at least one trial and one test point per trial")
    big = region.dilate(r_km)
    fractions = np.empty(n_trials)
    for i, s in enumerate(_trial_seeds(seed, n_trials)):
        rng = make_rng(s)
        n = int(rng.poisson(lambda_s * big.area()))
        sensors = np.column_stack([rng.uniform(big.x_min, big.x_max, n),
                                   rng.uniform(big.y_min, big.y_max, n)])
        sources = np.column_stack([rng.uniform(region.x_min, region.x_max, points_per_trial),
                                   rng.uniform(region.y_min, region.y_max, points_per_trial)])
        if n:
            counts = cKDTree(sensors).query_ball_point(sources, r_km, return_length=True)
            fractions[i] = np.mean(counts > 0)
        else:
            fractions[i] = 0.0
    se = float(fractions.std(ddof=1) / math.sqrt(n_trials)) if n_trials > 1 else float("nan")
    return CoverageEstimate(float(fractions.mean()), se, n_trials * points_per_trial, n_trials)
