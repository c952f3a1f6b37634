"""Command line entry point: ``rfmap {simulate,density,map,welch}``.

Exit codes: 0 success, 2 usage or configuration error, 3 degenerate
scenario or site set (fewer than three sensors, or collinear sites),
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config
from .density import (DensityParams, min_density_fixed_r, min_density_power_constraint,
                      monte_carlo_coverage, sweep_beta, sweep_frequency, write_curve_csv)
from .errors import ContractError, DegenerateInputError, EmptyInputError, ScenarioDegenerateError
from .io import Projection, config_hash, record_from_json, sha256_of, write_map, write_records
from .periodogram import IQBlock, band_power_dbm, read_iq, write_psd_json, welch_psd
from .pointprocess import Region, stream_seed
from .powermap import FUSION_MODES, QuerySpec, build_map, fuse_records, run_ensemble, simulate_scenario
from .propagation import PathLossModel, ShadowingModel

log = logging.getLogger("rfmap")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_IO = 4


def _range_arg(text: str) -> tuple[float, float, int]:
    """``lo:hi`` or ``lo:hi:n``."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(f"expected lo:hi[:n], got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        n = int(parts[2]) if len(parts) == 3 else 99
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi[:n], got {text!r}")
    if not hi > lo or n < 2:
        raise argparse.ArgumentTypeError(f"need lo < hi and n >= 2, got {text!r}")
    return lo, hi, n


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1))


# ---------------------------------------------------------------- simulate

def _load_scenario(args) -> ScenarioConfig:
    overrides = {"lambda_s": args.lambda_s, "lambda_t": args.lambda_t, "seed": args.seed,
                 "output_dir": args.out}
    if args.config:
        return load_config(args.config, overrides)
    return ScenarioConfig().with_overrides(**overrides)


def cmd_simulate(args) -> int:
    cfg = _load_scenario(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_dict = cfg.to_dict()
    manifest = {"command": "simulate", "version": __version__, "config": cfg_dict,
                "config_sha256": config_hash(cfg_dict), "seed": cfg.seed,
                "streams": {s: stream_seed(cfg.seed, s) for s in ("sources", "sensors", "shadowing")}}

    if args.seeds:
        seeds = list(range(cfg.seed, cfg.seed + args.seeds))
        rows = run_ensemble(cfg, seeds, workers=args.workers)
        path = out / "mse_per_seed.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "lambda_s", "mse_db2", "n_nodes", "n_sensors", "degenerate"])
            for r in rows:
                w.writerow([r.seed, repr(r.lambda_s), repr(r.mse), r.n_nodes, r.n_sensors,
                            int(r.degenerate)])
        good = [r.mse for r in rows if not r.degenerate]
        mean = float(np.mean(good)) if good else float("nan")
        manifest.update(seeds=seeds, ensemble_mean_mse_db2=mean,
                        n_degenerate=sum(r.degenerate for r in rows),
                        artifacts={path.name: sha256_of(path)})
        manifest["created_utc"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        _write_json(out / "manifest.json", manifest)
        print(f"ensemble mean MSE over {len(good)} seeds: {mean:.4f} dB^2")
        return EXIT_OK

    res = simulate_scenario(cfg)
    proj = Projection(cfg.origin_lat, cfg.origin_lon, *cfg.region_obj().centroid())
    pgm = not args.no_pgm
    paths = write_map(res.truth, out / "truth", pgm=pgm, seed=cfg.seed)
    paths += write_map(res.recon, out / "recon", pgm=pgm, seed=cfg.seed,
                       mse_db2=res.mse, mse_nodes=res.n_nodes)
    sites = out / "sites.json"
    _write_json(sites, {"sources": json.loads(res.sources.to_json()),
                        "sensors": json.loads(res.sensors.to_json()),
                        "triples": res.triples.tolist()})
    records = out / "records.jsonl"
    write_records(records, res.records, proj)
    paths += [sites, records]
    manifest.update(mse_db2=res.mse, mse_nodes=res.n_nodes, n_sources=len(res.sources),
                    n_sensors=len(res.sensors),
                    artifacts={p.name: sha256_of(p) for p in paths})
    manifest["created_utc"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    _write_json(out / "manifest.json", manifest)
    print(f"MSE {res.mse:.4f} dB^2 over {res.n_nodes} nodes "
          f"({len(res.sources)} sources, {len(res.sensors)} sensors)")
    return EXIT_OK


# ---------------------------------------------------------------- density

def _density_params(args, beta: float = 0.5) -> DensityParams:
    shadow = ShadowingModel(args.mu_db, args.sigma_db, args.sigma_db > 0 or args.mu_db != 0)
    if args.k is not None:
        path = PathLossModel(args.alpha, args.k, args.f_hz)
    else:
        path = PathLossModel.free_space(args.f_hz, args.alpha)
    return DensityParams(beta, args.a_db, path, shadow, args.r_km)


def cmd_density(args) -> int:
    if args.beta is not None:
        params = _density_params(args, args.beta)
        if args.r_km is not None:
            lam = min_density_fixed_r(args.beta, args.r_km)
        else:
            lam = min_density_power_constraint(params)
        print(f"lambda_s = {lam:.6g} sensors/km^2")
        if args.area_km2 is not None:
            print(f"total = {lam * args.area_km2:.6g} sensors over {args.area_km2:g} km^2")
        if args.mc_trials:
            est = monte_carlo_coverage(lam, params, Region.square(args.mc_side_km),
                                       args.mc_trials, stream_seed(args.seed, "mc-trials"))
            print(f"monte carlo coverage = {est.probability:.4f} +/- {est.stderr:.4f}")
        return EXIT_OK

    if args.sweep_beta is not None:
        lo, hi, n = args.sweep_beta
        curve = sweep_beta(_density_params(args), np.linspace(lo, hi, n))
        header = ("beta", "lambda_s_per_km2")
    else:
        lo, hi, n = args.sweep_freq
        params = _density_params(args, args.sweep_beta_fixed)
        curve = sweep_frequency(params, np.linspace(lo, hi, n))
        header = ("f_hz", "lambda_s_per_km2")
    if args.out:
        write_curve_csv(args.out, curve, header)
        print(f"wrote {len(curve)} rows to {args.out}")
    else:
        w = csv.writer(sys.stdout)
        w.writerow(header)
        w.writerows([[repr(float(a)), repr(float(b))] for a, b in curve])
    return EXIT_OK


# ---------------------------------------------------------------- map

def cmd_map(args) -> int:
    lines = [(n, line) for n, line in enumerate(Path(args.records).read_text().splitlines(), 1)
             if line.strip()]
    dicts = []
    for n, line in lines:
        try:
            dicts.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ContractError(f"{args.records}:{n}: invalid JSON ({exc.msg})")
    if not dicts:
        raise EmptyInputError(f"{args.records}: no records")

    planar = all("x_km" in d and "y_km" in d for d in dicts)
    proj = None
    if not planar:
        if args.origin:
            lat0, lon0 = args.origin
        else:
            lat0 = float(np.mean([d["lat"] for d in dicts if "lat" in d]))
            lon0 = float(np.mean([d["lon"] for d in dicts if "lon" in d]))
        x0, y0 = Region(*args.region).centroid() if args.region else (0.0, 0.0)
        proj = Projection(lat0, lon0, x0, y0)
    records = [record_from_json(line, proj, f"{args.records}:{n}") for n, line in lines]

    if args.region:
        region = Region(*args.region)
    else:
        xy = np.array([r.location for r in records])
        region = Region(xy[:, 0].min(), xy[:, 0].max(), xy[:, 1].min(), xy[:, 1].max())
    if args.time:
        t0, t1 = args.time
    else:
        ts = [r.timestamp for r in records]
        t0, t1 = min(ts), max(ts)
    query = QuerySpec(args.band[0], args.band[1], t0, t1, region, args.grid[0], args.grid[1])
    triples, dropped = fuse_records(records, query, args.merge_radius_m / 1000.0, args.fusion)
    if dropped:
        log.warning("dropped %d of %d records outside the band/time/region query",
                    dropped, len(records))
    pmap = build_map(triples, query, fill=args.fill)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_map(pmap, out / "map", pgm=not args.no_pgm, n_records=len(records),
              n_dropped=dropped, fusion=args.fusion)
    print(f"map from {len(triples)} sites ({dropped} records dropped), "
          f"{int(pmap.inside.sum())}/{pmap.inside.size} nodes inside hull")
    return EXIT_OK


# ---------------------------------------------------------------- welch

def cmd_welch(args) -> int:
    samples = read_iq(args.iq, args.format)
    block = IQBlock(samples, args.rate, args.center, args.gain_db)
    psd = welch_psd(block, args.segment, args.overlap, args.window, args.calibration)
    extra = {"sample_rate_hz": args.rate, "center_freq_hz": args.center,
             "gain_db": args.gain_db, "window": args.window, "segment_len": args.segment,
             "overlap_frac": args.overlap}
    if args.band:
        p = band_power_dbm(psd, args.band[0], args.band[1])
        extra["band_hz"] = list(args.band)
        extra["band_power_dbm"] = p
        print(f"band power {p:.4f} dBm")
    write_psd_json(psd, args.out, **extra)
    print(f"wrote {len(psd.freqs_hz)}-bin PSD to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rfmap", description="RF power maps from scattered sensor readings and sensor density planning.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a scenario and score the reconstruction")
    s.add_argument("--config", help="scenario JSON file (defaults to built-in scenario)")
    s.add_argument("--lambda-s", type=float, help="sensor intensity, per km^2")
    s.add_argument("--lambda-t", type=float, help="source intensity, per km^2")
    s.add_argument("--seed", type=int, help="master seed")
    s.add_argument("--seeds", type=int, default=0, help="run an ensemble of this many seeds")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", help="output directory")
    s.add_argument("--no-pgm", action="store_true")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("density", help="sensor deployment density")
    mode = d.add_mutually_exclusive_group(required=True)
    mode.add_argument("--beta", type=float, help="target coverage probability")
    mode.add_argument("--sweep-beta", type=_range_arg, metavar="LO:HI[:N]")
    mode.add_argument("--sweep-freq", type=_range_arg, metavar="LO:HI[:N]", help="Hz")
    d.add_argument("--sweep-beta-fixed", type=float, default=0.95, metavar="BETA",
                   help="beta used by --sweep-freq")
    d.add_argument("--f-hz", type=float, default=1.0e9)
    d.add_argument("--alpha", type=float, default=3.0)
    d.add_argument("--k", type=float, help="explicit path-loss constant (r in meters)")
    d.add_argument("--a-db", type=float, default=90.0, help="relative power threshold, dB")
    d.add_argument("--mu-db", type=float, default=0.0)
    d.add_argument("--sigma-db", type=float, default=4.0)
    d.add_argument("--r-km", type=float, help="fixed coverage radius instead of power constraint")
    d.add_argument("--area-km2", type=float, help="also report the total sensor count")
    d.add_argument("--mc-trials", type=int, default=0, help="Monte Carlo check of the coverage")
    d.add_argument("--mc-side-km", type=float, default=2.0)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", help="CSV path for sweeps (stdout if omitted)")
    d.set_defaults(func=cmd_density)

    m = sub.add_parser("map", help="build a power map from a JSON-lines record file")
    m.add_argument("records")
    m.add_argument("--band", type=float, nargs=2, required=True, metavar=("F_LO", "F_HI"))
    m.add_argument("--time", type=float, nargs=2, metavar=("T0", "T1"))
    m.add_argument("--region", type=float, nargs=4, metavar=("X0", "X1", "Y0", "Y1"),
                   help="crop rectangle in km (default: bounding box of the records)")
    m.add_argument("--origin", type=float, nargs=2, metavar=("LAT", "LON"),
                   help="geographic position of the region centroid")
    m.add_argument("--grid", type=int, nargs=2, default=(100, 100), metavar=("NX", "NY"))
    m.add_argument("--merge-radius-m", type=float, default=1.0)
    m.add_argument("--fusion", choices=FUSION_MODES, default="mean")
    m.add_argument("--fill", choices=("mask", "nearest"), default="mask")
    m.add_argument("--out", default="out")
    m.add_argument("--no-pgm", action="store_true")
    m.set_defaults(func=cmd_map)

    w = sub.add_parser("welch", help="Welch PSD of a raw IQ file")
    w.add_argument("iq")
    w.add_argument("--format", choices=("u8", "f32"), required=True)
    w.add_argument("--rate", type=float, required=True, help="sample rate, Hz")
    w.add_argument("--center", type=float, default=0.0, help="centre frequency, Hz")
    w.add_argument("--gain-db", type=float, default=0.0)
    w.add_argument("--segment", type=int, default=256)
    w.add_argument("--overlap", type=float, default=0.5)
    w.add_argument("--window", default="hann")
    w.add_argument("--calibration", type=float, default=1.0)
    w.add_argument("--band", type=float, nargs=2, metavar=("F_LO", "F_HI"))
    w.add_argument("--out", default="psd.json")
    w.set_defaults(func=cmd_welch)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioDegenerateError as exc:
        print(f"rfmap: degenerate scenario: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DegenerateInputError as exc:
        print(f"rfmap: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConfigError, ContractError, EmptyInputError) as exc:
        print(f"rfmap: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"rfmap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
