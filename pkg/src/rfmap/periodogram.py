"""Welch PSD estimation from complex baseband IQ blocks, and band power.

PSDs are two-sided and centred: bin ``k`` sits at
``center_freq_hz + (k - nfft/2) * fs / nfft``. Linear PSD units are mW/Hz
under the convention ``P_mW = calibration * |x|^2 / 10^(gain_db/10)``, so
that the sum of linear bins times the resolution equals the calibrated
mean-square power of the block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import ContractError

PSD_FLOOR_DBM_PER_HZ = -300.0


@dataclass(frozen=True)
class IQBlock:
    samples: np.ndarray = field(repr=False)
    sample_rate_hz: float
    center_freq_hz: float = 0.0
    gain_db: float = 0.0

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ContractError(f"sample rate must be positive, got {self.sample_rate_hz}")


@dataclass(frozen=True)
class Psd:
    freqs_hz: np.ndarray = field(repr=False)
    values_dbm_per_hz: np.ndarray = field(repr=False)
    resolution_hz: float
    calibration: float = 1.0

    def __post_init__(self):
        f = np.asarray(self.freqs_hz, dtype=float)
        v = np.asarray(self.values_dbm_per_hz, dtype=float)
        if f.shape != v.shape or f.ndim != 1 or len(f) == 0:
            raise ContractError("freqs and values must be equal-length, non-empty 1-D arrays")
        if not self.resolution_hz > 0:
            raise ContractError("resolution must be positive")
        if not np.all(np.isfinite(v)):
            raise ContractError("PSD values must be finite")
        if len(f) > 1:
            steps = np.diff(f)
            if np.any(steps <= 0) or not np.allclose(steps, self.resolution_hz, rtol=1e-9, atol=0):
                raise ContractError("PSD bins must be increasing and uniformly spaced")
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "values_dbm_per_hz", v)

    @classmethod
    def flat(cls, f_start_hz: float, bin_hz: float, n_bins: int, level_dbm_per_hz: float) -> "Psd":
        freqs = f_start_hz + bin_hz * np.arange(n_bins)
        return cls(freqs, np.full(n_bins, float(level_dbm_per_hz)), float(bin_hz))

    def linear_mw_per_hz(self) -> np.ndarray:
        return np.power(10.0, self.values_dbm_per_hz / 10.0)

    def to_dict(self) -> dict:
        return {
            "f_start_hz": float(self.freqs_hz[0]),
            "bin_hz": float(self.resolution_hz),
            "calibration": float(self.calibration),
            "psd_dbm_per_hz": self.values_dbm_per_hz.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Psd":
        vals = np.asarray(d["psd_dbm_per_hz"], dtype=float)
        freqs = float(d["f_start_hz"]) + float(d["bin_hz"]) * np.arange(len(vals))
        return cls(freqs, vals, float(d["bin_hz"]), float(d.get("calibration", 1.0)))


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def welch_psd(block: IQBlock, segment_len: int = 256, overlap_frac: float = 0.5,
              window: str = "hann", calibration: float = 1.0) -> Psd:
    """Averaged, windowed, overlapped periodogram of ``block``.

    Segments are not detrended. The density scaling divides by
    ``fs * sum(w**2)``, which makes the integrated PSD equal the mean-square
    power of the block regardless of window.
    """
    x = np.asarray(block.samples)
    if x.ndim != 1:
        raise ContractError("samples must be a 1-D sequence")
    if not _is_power_of_two(segment_len):
        raise ContractError(f"segment_len must be a power of two, got {segment_len}")
    if len(x) < segment_len:
        raise ContractError(f"need at least {segment_len} samples, got {len(x)}")
    if not 0.0 <= overlap_frac < 1.0:
        raise ContractError(f"overlap_frac must be in [0, 1), got {overlap_frac}")
    if not calibration > 0:
        raise ContractError("calibration must be positive")
    x = x.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(x)):
        raise ContractError("samples contain NaN or inf")

    fs = float(block.sample_rate_hz)
    noverlap = int(round(overlap_frac * segment_len))
    _, pxx = signal.welch(x, fs=fs, window=window, nperseg=segment_len,
                          noverlap=noverlap, detrend=False,
                          return_onesided=False, scaling="density")
    pxx = np.fft.fftshift(pxx) * calibration / 10.0 ** (block.gain_db / 10.0)
    with np.errstate(divide="ignore"):
        dbm = 10.0 * np.log10(pxx)
    dbm = np.maximum(dbm, PSD_FLOOR_DBM_PER_HZ)
    resolution = fs / segment_len
    # fftshift order: bin k is offset (k - nfft/2) * resolution from centre
    axis = block.center_freq_hz + resolution * (np.arange(segment_len) - segment_len // 2)
    return Psd(axis, dbm, resolution, calibration)


def band_power_dbm(psd: Psd, f_lo_hz: float, f_hi_hz: float) -> float:
    """Integrated power over bins whose centres lie in [f_lo, f_hi], in dBm."""
    if not f_hi_hz >= f_lo_hz:
        raise ContractError(f"empty band [{f_lo_hz}, {f_hi_hz}]")
    sel = (psd.freqs_hz >= f_lo_hz) & (psd.freqs_hz <= f_hi_hz)
    if not sel.any():
        raise ContractError(
            f"band [{f_lo_hz:.6g}, {f_hi_hz:.6g}] Hz contains no PSD bin centre "
            f"(PSD spans {psd.freqs_hz[0]:.6g}..{psd.freqs_hz[-1]:.6g} Hz)")
    total = float(np.sum(psd.linear_mw_per_hz()[sel])) * psd.resolution_hz
    return 10.0 * np.log10(total) if total > 0 else float("-inf")


def read_iq(path, fmt: str) -> np.ndarray:
    """Load interleaved little-endian IQ pairs.

    ``fmt`` is ``"u8"`` (offset-binary bytes as written by RTL-SDR dongles,
    mapped to (v - 127.5) / 127.5) or ``"f32"`` (float32 pairs).
    """
    raw = Path(path).read_bytes()
    if fmt == "u8":
        v = np.frombuffer(raw, dtype=np.uint8).astype(np.float64)
        v = (v - 127.5) / 127.5
    elif fmt == "f32":
        if len(raw) % 4:
            raise ContractError(f"{path}: size {len(raw)} is not a multiple of 4 bytes")
        v = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    else:
        raise ContractError(f"unknown IQ format {fmt!r}; expected 'u8' or 'f32'")
    if len(v) % 2:
        raise ContractError(f"{path}: odd number of IQ components ({len(v)})")
    return v[0::2] + 1j * v[1::2]


def write_psd_json(psd: Psd, path, **extra) -> None:
    d = psd.to_dict()
    d.update(extra)
    Path(path).write_text(json.dumps(d))
