"""File formats: JSON-lines periodogram records, map CSV/JSON/PGM, manifests.

Record lines look like::

    {"sensor_id": "a1", "timestamp": 1.5e9, "lat": 41.70, "lon": -86.24,
     "f_start_hz": 9.99e8, "bin_hz": 7812.5, "psd_dbm_per_hz": [...], "gain_db": 20.0}

``psd_dbm_per_hz`` is calibrated (gain already removed). Records written from
a simulation additionally carry ``x_km``/``y_km``; when present these take
precedence over lat/lon so planar coordinates survive the round trip exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import ContractError
from .periodogram import Psd
from .powermap import PeriodogramRecord, PowerMap

EARTH_RADIUS_KM = 6371.0088
_RECORD_KEYS = ("sensor_id", "timestamp", "f_start_hz", "bin_hz", "psd_dbm_per_hz")


class Projection:
    """Equirectangular lat/lon <-> planar km about an anchor point.

    The anchor (``lat0``, ``lon0``) maps to planar ``(x0, y0)``, normally the
    centroid of the mapped region. Good to well under 0.1% at city scale.
    """

    def __init__(self, lat0: float, lon0: float, x0: float = 0.0, y0: float = 0.0):
        self.lat0, self.lon0, self.x0, self.y0 = lat0, lon0, x0, y0
        self._kx = math.radians(1.0) * EARTH_RADIUS_KM * math.cos(math.radians(lat0))
        self._ky = math.radians(1.0) * EARTH_RADIUS_KM

    def to_km(self, lat: float, lon: float) -> tuple[float, float]:
        return (self.x0 + (lon - self.lon0) * self._kx, self.y0 + (lat - self.lat0) * self._ky)

    def to_latlon(self, x: float, y: float) -> tuple[float, float]:
        return (self.lat0 + (y - self.y0) / self._ky, self.lon0 + (x - self.x0) / self._kx)


def record_to_json(rec: PeriodogramRecord, proj: Projection | None = None) -> str:
    d = {"sensor_id": rec.sensor_id, "timestamp": float(rec.timestamp)}
    x, y = rec.location
    if proj is not None:
        d["lat"], d["lon"] = proj.to_latlon(x, y)
    d["x_km"], d["y_km"] = float(x), float(y)
    d["f_start_hz"] = float(rec.psd.freqs_hz[0])
    d["bin_hz"] = float(rec.psd.resolution_hz)
    d["psd_dbm_per_hz"] = rec.psd.values_dbm_per_hz.tolist()
    d["gain_db"] = float(rec.gain_db)
    return json.dumps(d)


def record_from_json(line: str, proj: Projection | None = None,
                     where: str = "<record>") -> PeriodogramRecord:
    try:
        d = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ContractError(f"{where}: invalid JSON ({exc.msg})")
    missing = [k for k in _RECORD_KEYS if k not in d]
    if missing:
        raise ContractError(f"{where}: missing field(s) {', '.join(missing)}")
    if "x_km" in d and "y_km" in d:
        loc = (float(d["x_km"]), float(d["y_km"]))
    elif "lat" in d and "lon" in d:
        if proj is None:
            raise ContractError(f"{where}: lat/lon record needs a projection")
        loc = proj.to_km(float(d["lat"]), float(d["lon"]))
    else:
        raise ContractError(f"{where}: record has neither lat/lon nor x_km/y_km")
    try:
        return PeriodogramRecord(str(d["sensor_id"]), float(d["timestamp"]), loc,
                                 Psd.from_dict(d), float(d.get("gain_db", 0.0)))
    except (ContractError, TypeError, ValueError) as exc:
        raise ContractError(f"{where}: {exc}")


def write_records(path, records, proj: Projection | None = None) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(record_to_json(r, proj))
            fh.write("\n")


def read_records(path, proj: Projection | None = None) -> list[PeriodogramRecord]:
    out = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            if line.strip():
                out.append(record_from_json(line, proj, f"{path}:{n}"))
    return out


def write_map_csv(pmap: PowerMap, path) -> None:
    """Row j holds y = ys[j]; masked nodes are written as ``nan``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in pmap.values:
            w.writerow([repr(float(v)) for v in row])


def read_map_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])


def map_sidecar(pmap: PowerMap, **extra) -> dict:
    d = {
        "method": pmap.method,
        "query": pmap.query.to_dict(),
        "xs_km": pmap.query.grid.xs.tolist(),
        "ys_km": pmap.query.grid.ys.tolist(),
        "masked_nodes": [[int(j), int(i)] for j, i in np.argwhere(~pmap.inside)],
        "n_sites": int(len(pmap.sites)),
    }
    d.update(extra)
    return d


def write_pgm(pmap: PowerMap, path) -> None:
    """8-bit grayscale preview scaled over unmasked values; masked nodes are 0
    and north (largest y) is the top row."""
    vals = pmap.values
    ok = pmap.inside & np.isfinite(vals)
    img = np.zeros(vals.shape, dtype=np.uint8)
    if ok.any():
        lo, hi = float(vals[ok].min()), float(vals[ok].max())
        scale = 254.0 / (hi - lo) if hi > lo else 0.0
        img[ok] = (1 + np.round((vals[ok] - lo) * scale)).astype(np.uint8)
    img = img[::-1]
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + img.tobytes())


def write_map(pmap: PowerMap, stem, pgm: bool = True, **extra) -> list[Path]:
    stem = Path(stem)
    paths = [stem.with_suffix(".csv"), stem.with_suffix(".json")]
    write_map_csv(pmap, paths[0])
    paths[1].write_text(json.dumps(map_sidecar(pmap, **extra), indent=1))
    if pgm:
        paths.append(stem.with_suffix(".pgm"))
        write_pgm(pmap, paths[-1])
    return paths


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(cfg_dict: dict) -> str:
    return hashlib.sha256(json.dumps(cfg_dict, sort_keys=True).encode()).hexdigest()
