"""Homogeneous Poisson point processes on rectangles.

All randomness comes from ``numpy.random.Generator`` over PCG64. A scenario
uses one master seed; independent sub-streams are derived from it with
:func:`stream_seed`, keyed by a stream label, so that drawing more sensors
never perturbs the source draw (and vice versa).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

# Labels for sub-streams of a master seed. The index is the SeedSequence
# spawn key, so reordering this tuple changes every derived stream.
STREAMS = ("sources", "sensors", "shadowing", "mc-trials")


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle in planar km."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not all(np.isfinite(v) for v in vals):
            raise ContractError(f"region bounds must be finite, got {vals}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ContractError(f"empty region {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def area(self) -> float:
        return self.width * self.height

    def centroid(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def dilate(self, margin: float) -> "Region":
        return Region(self.x_min - margin, self.x_max + margin,
                      self.y_min - margin, self.y_max + margin)

    def contains(self, xy) -> np.ndarray:
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        return ((xy[:, 0] >= self.x_min) & (xy[:, 0] <= self.x_max)
                & (xy[:, 1] >= self.y_min) & (xy[:, 1] <= self.y_max))

    def as_list(self) -> list[float]:
        return [self.x_min, self.x_max, self.y_min, self.y_max]

    @classmethod
    def square(cls, side_km: float = 1.0) -> "Region":
        return cls(0.0, side_km, 0.0, side_km)


@dataclass(frozen=True)
class PointSet:
    """One realization of a point process, with the seed that produced it."""

    points: np.ndarray = field(repr=False)
    intensity: float
    region: Region
    seed: int

    def __len__(self) -> int:
        return len(self.points)

    def to_json(self) -> str:
        return json.dumps({
            "seed": int(self.seed),
            "intensity": float(self.intensity),
            "region": self.region.as_list(),
            "points": self.points.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "PointSet":
        d = json.loads(text)
        pts = np.asarray(d["points"], dtype=float).reshape(-1, 2)
        return cls(pts, float(d["intensity"]), Region(*d["region"]), int(d["seed"]))


def stream_seed(master_seed: int, label: str) -> int:
    """Derive the 64-bit seed of a labeled sub-stream of ``master_seed``."""
    try:
        key = STREAMS.index(label)
    except ValueError:
        raise ContractError(f"unknown stream label {label!r}; expected one of {STREAMS}")
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(key,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def sample_ppp(region: Region, intensity: float, seed: int) -> PointSet:
    """Sample a homogeneous PPP of ``intensity`` points/km^2 over ``region``.

    The count is drawn from Poisson(intensity * area) and the points are
    then placed i.i.d. uniformly. NumPy's Poisson sampler is exact for all
    means (inversion below 10, PTRS transformed rejection above).
    """
    if not isinstance(region, Region):
        raise ContractError("region must be a Region")
    if not np.isfinite(intensity) or intensity < 0:
        raise ContractError(f"intensity must be finite and >= 0, got {intensity}")
    rng = make_rng(seed)
    n = int(rng.poisson(intensity * region.area()))
    x = rng.uniform(region.x_min, region.x_max, size=n)
    y = rng.uniform(region.y_min, region.y_max, size=n)
    return PointSet(np.column_stack([x, y]), float(intensity), region, int(seed))


def count_distribution_check(region: Region, intensity: float, n_trials: int,
                             seed: int) -> tuple[float, float]:
    """Sample mean and (unbiased) variance of PPP counts over ``n_trials``.

    Counts are drawn exactly as :func:`sample_ppp` draws them, one generator
    per trial seeded from ``seed``.
    """
    if n_trials < 1:
        raise ContractError("n_trials must be >= 1")
    seeds = np.random.SeedSequence(int(seed)).generate_state(n_trials, dtype=np.uint64)
    mean_count = intensity * region.area()
    counts = np.array([make_rng(s).poisson(mean_count) for s in seeds], dtype=float)
    var = float(counts.var(ddof=1)) if n_trials > 1 else 0.0
    return float(counts.mean()), var
