"""RF power maps: periodogram fusion, reconstruction, truth grids and MSE."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .config import ScenarioConfig
from .errors import ContractError, EmptyInputError, GridMismatchError, ScenarioDegenerateError
from .interpolation import MeshGrid, interpolate_grid, triangulate
from .periodogram import Psd, band_power_dbm
from .pointprocess import PointSet, Region, sample_ppp, stream_seed, make_rng
from .propagation import SourceField, dbm_to_mw, mw_to_dbm, received_power_mw

logger = logging.getLogger(__name__)

FUSION_MODES = ("mean", "median", "max")


@dataclass(frozen=True)
class PeriodogramRecord:
    """A PSD reported by one sensor at one time and place (planar km).

    ``psd`` is already calibrated to dBm/Hz; ``gain_db`` records the
    front-end gain that was removed from it.
    """

    sensor_id: str
    timestamp: float
    location: tuple[float, float]
    psd: Psd
    gain_db: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.timestamp):
            raise ContractError(f"record {self.sensor_id}: timestamp must be finite")


@dataclass(frozen=True)
class QuerySpec:
    f_lo_hz: float
    f_hi_hz: float
    t_start: float
    t_end: float
    region: Region
    grid_nx: int = 100
    grid_ny: int = 100

    def __post_init__(self):
        if not self.f_hi_hz > self.f_lo_hz:
            raise ContractError("query needs f_hi_hz > f_lo_hz")
        if not self.t_end >= self.t_start:
            raise ContractError("query needs t_end >= t_start")
        if self.grid_nx < 2 or self.grid_ny < 2:
            raise ContractError("query grid must be at least 2x2")

    @property
    def grid(self) -> MeshGrid:
        return MeshGrid(self.region, self.grid_nx, self.grid_ny)

    def to_dict(self) -> dict:
        return {"f_lo_hz": self.f_lo_hz, "f_hi_hz": self.f_hi_hz,
                "t_start": self.t_start, "t_end": self.t_end,
                "region": self.region.as_list(),
                "grid_nx": self.grid_nx, "grid_ny": self.grid_ny}


@dataclass(frozen=True)
class PowerMap:
    """dBm values on the query mesh, shape (ny, nx); ``inside`` marks
    nodes that carry an estimate (everything, for a truth map)."""

    values: np.ndarray = field(repr=False)
    inside: np.ndarray = field(repr=False)
    query: QuerySpec
    sites: np.ndarray = field(repr=False)
    method: str

    def __post_init__(self):
        shape = self.query.grid.shape
        if self.values.shape != shape or self.inside.shape != shape:
            raise ContractError(f"map arrays must have shape {shape}")


def _usable(rec: PeriodogramRecord, query: QuerySpec) -> bool:
    if not query.t_start <= rec.timestamp <= query.t_end:
        return False
    f = rec.psd.freqs_hz
    if not np.any((f >= query.f_lo_hz) & (f <= query.f_hi_hz)):
        return False
    return bool(query.region.contains(rec.location)[0])


def fuse_records(records, query: QuerySpec, merge_radius_km: float = 0.001,
                 mode: str = "mean") -> tuple[np.ndarray, int]:
    """Collapse records into one (x, y, z_dbm) site per distinct location.

    Each usable record is integrated over the query band. Records whose
    locations chain together within ``merge_radius_km`` form one site,
    placed at the members' mean location, with z the linear-mW ``mode``
    of their band powers. Records outside the time window, band or region
    are dropped.

    Returns ``(triples, n_dropped)``. The result does not depend on the
    order of ``records``.
    """
    if mode not in FUSION_MODES:
        raise ContractError(f"unknown fusion mode {mode!r}")
    records = list(records)
    kept = [r for r in records if _usable(r, query)]
    n_dropped = len(records) - len(kept)
    if n_dropped:
        logger.info("dropped %d of %d records outside the query", n_dropped, len(records))
    if not kept:
        raise EmptyInputError(f"no usable records ({len(records)} supplied, all dropped)")

    z = np.array([band_power_dbm(r.psd, query.f_lo_hz, query.f_hi_hz) for r in kept])
    xy = np.array([r.location for r in kept], dtype=float)
    # canonical order makes every downstream sum order-independent
    keys = [(xy[i, 0], xy[i, 1], kept[i].timestamp, kept[i].sensor_id, z[i])
            for i in range(len(kept))]
    order = sorted(range(len(kept)), key=keys.__getitem__)
    xy, z = xy[order], z[order]

    n = len(z)
    if merge_radius_km > 0 and n > 1:
        pairs = cKDTree(xy).query_pairs(merge_radius_km, output_type="ndarray")
        adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        _, labels = connected_components(adj, directed=False)
    else:
        _, labels = np.unique(xy, axis=0, return_inverse=True)
        labels = labels.reshape(-1)
    # number groups by first appearance in canonical order
    _, first = np.unique(labels, return_index=True)
    out = []
    for g in labels[np.sort(first)]:
        members = np.flatnonzero(labels == g)
        mw = dbm_to_mw(z[members])
        if mode == "mean":
            level = mw.mean()
        elif mode == "median":
            level = np.median(mw)
        else:
            level = mw.max()
        loc = xy[members].mean(axis=0) if len(members) > 1 else xy[members[0]]
        out.append((loc[0], loc[1], float(mw_to_dbm(level))))
    return np.array(out, dtype=float), n_dropped


def build_map(triples, query: QuerySpec, fill: str = "mask") -> PowerMap:
    """Triangulate the sites and evaluate the planar interpolant on the grid."""
    tri = triangulate(triples)
    values, inside = interpolate_grid(tri, query.grid, fill=fill)
    return PowerMap(values, inside, query, tri.sites, "delaunay-planar")


def truth_map(field: SourceField, model, query: QuerySpec, noise_floor_dbm: float | None) -> PowerMap:
    nodes = query.grid.nodes()
    with np.errstate(divide="ignore"):
        vals = mw_to_dbm(received_power_mw(field, model, nodes, noise_floor_dbm=noise_floor_dbm))
    shape = query.grid.shape
    return PowerMap(vals.reshape(shape), np.ones(shape, dtype=bool), query,
                    np.empty((0, 3)), "truth")


def _common_nodes(a: PowerMap, b: PowerMap) -> np.ndarray:
    if a.values.shape != b.values.shape or a.query.grid != b.query.grid:
        raise GridMismatchError("maps are defined on different grids")
    return a.inside & b.inside


def mse(a: PowerMap, b: PowerMap) -> float:
    """Mean squared dB difference over nodes estimated in both maps (dB^2).

    NaN when the maps share no estimated node.
    """
    both = _common_nodes(a, b)
    if not both.any():
        return float("nan")
    d = a.values[both] - b.values[both]
    return float(np.mean(d * d))


def mse_nodes(a: PowerMap, b: PowerMap) -> int:
    return int(_common_nodes(a, b).sum())


def readings_to_records(points: np.ndarray, readings_dbm: np.ndarray, band: tuple[float, float],
                        n_bins: int = 8, timestamp: float = 0.0) -> list[PeriodogramRecord]:
    """Wrap point power readings as flat PSD records spanning ``band``."""
    lo, hi = band
    bin_hz = (hi - lo) / n_bins
    density_offset = 10.0 * np.log10(hi - lo)
    return [PeriodogramRecord(f"sim-{i:05d}", timestamp, (float(p[0]), float(p[1])),
                              Psd.flat(lo + 0.5 * bin_hz, bin_hz, n_bins, float(z) - density_offset))
            for i, (p, z) in enumerate(zip(points, readings_dbm))]


@dataclass(frozen=True)
class ScenarioResult:
    config: ScenarioConfig
    sources: PointSet
    sensors: PointSet
    records: list = field(repr=False)
    triples: np.ndarray = field(repr=False)
    truth: PowerMap = field(repr=False)
    recon: PowerMap = field(repr=False)
    mse: float
    n_nodes: int

    @property
    def query(self) -> QuerySpec:
        return self.truth.query


def scenario_query(cfg: ScenarioConfig) -> QuerySpec:
    lo, hi = cfg.band
    return QuerySpec(lo, hi, 0.0, 0.0, cfg.region_obj(), cfg.grid_nx, cfg.grid_ny)


def simulate_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Sources and sensors as independent PPPs, truth grid, sensor readings,
    and the reconstruction built from those readings.

    Readings go through the same record/fusion path as ingested data, so a
    scenario exported as records rebuilds to an identical map.
    """
    region = cfg.region_obj()
    sources = sample_ppp(region, cfg.lambda_t, stream_seed(cfg.seed, "sources"))
    sensors = sample_ppp(region, cfg.lambda_s, stream_seed(cfg.seed, "sensors"))
    if len(sensors) < 3:
        raise ScenarioDegenerateError(
            f"seed {cfg.seed}: drew {len(sensors)} sensors, need at least 3", len(sensors), cfg.seed)
    model = cfg.path_model()
    shadow = cfg.shadowing()
    fld = SourceField(sources, cfg.tx_power_dbm)
    query = scenario_query(cfg)
    floor = cfg.floor_dbm()

    truth = truth_map(fld, model, query, floor)
    rng = make_rng(stream_seed(cfg.seed, "shadowing")) if shadow.enabled else None
    with np.errstate(divide="ignore"):
        readings = mw_to_dbm(received_power_mw(fld, model, sensors.points, shadow, rng, floor))
    records = readings_to_records(sensors.points, readings, cfg.band, cfg.psd_bins)
    triples, _ = fuse_records(records, query, cfg.merge_radius_m / 1000.0)
    recon = build_map(triples, query)
    return ScenarioResult(cfg, sources, sensors, records, triples, truth, recon,
                          mse(recon, truth), mse_nodes(recon, truth))


@dataclass(frozen=True)
class EnsembleRow:
    seed: int
    lambda_s: float
    mse: float
    n_nodes: int
    n_sensors: int
    degenerate: bool = False


def _ensemble_one(cfg: ScenarioConfig) -> EnsembleRow:
    try:
        res = simulate_scenario(cfg)
    except ScenarioDegenerateError as exc:
        return EnsembleRow(cfg.seed, cfg.lambda_s, float("nan"), 0, exc.n_sensors, True)
    return EnsembleRow(cfg.seed, cfg.lambda_s, res.mse, res.n_nodes, len(res.sensors))


def run_ensemble(cfg: ScenarioConfig, seeds, workers: int = 1) -> list[EnsembleRow]:
    """One scenario per seed; rows come back in ``seeds`` order."""
    cfgs = [cfg.with_overrides(seed=int(s)) for s in seeds]
    if workers <= 1:
        return [_ensemble_one(c) for c in cfgs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_ensemble_one, cfgs))
