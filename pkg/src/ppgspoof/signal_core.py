"""Core waveform types and DSP primitives: resampling, band-pass filtering,
Savitzky-Golay smoothing, and min-max normalization.

All functions are pure; `WaveSignal` is immutable once constructed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt, savgol_filter

from .errors import DataValidityError, DegenerateInputError, ParameterError


class SignalLabel(str, enum.Enum):
    PPG = "PPG"
    RPPG = "RPPG"
    RESTORED = "RESTORED"


# Default heart-rate pass band: 0.7-4.0 Hz (42-240 bpm).
DEFAULT_BAND_HZ = (0.7, 4.0)
BUTTER_ORDER = 4


@dataclass(frozen=True)
class WaveSignal:
    """A uniformly sampled 1-D waveform."""

    samples: np.ndarray
    sample_rate_hz: float
    label: SignalLabel = SignalLabel.PPG

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "label", SignalLabel(self.label))
        if samples.ndim != 1 or samples.size < 2:
            raise DataValidityError("signal needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise DataValidityError("signal contains non-finite samples")
        if not (self.sample_rate_hz > 0):
            raise ParameterError("sample_rate_hz must be positive")

    @property
    def duration_s(self) -> float:
        return (len(self.samples) - 1) / self.sample_rate_hz

    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.sample_rate_hz


@dataclass(frozen=True)
class SavGolSpec:
    """Savitzky-Golay smoothing parameters."""

    window_len: int = 9
    poly_order: int = 3

    def __post_init__(self):
        if self.window_len < 1 or self.window_len % 2 == 0:
            raise ParameterError("window_len must be odd and >= 1")
        if not (0 <= self.poly_order < self.window_len):
            raise ParameterError("poly_order must satisfy 0 <= order < window_len")


def resample(sig: WaveSignal, target_rate_hz: float) -> WaveSignal:
    """Linearly resample a signal onto a uniform grid at `target_rate_hz`.

    Duration is preserved to within one sample period of either grid.
    """
    if not (target_rate_hz > 0):
        raise ParameterError("target_rate_hz must be positive")
    t_old = sig.times()
    n_new = int(np.floor(sig.duration_s * target_rate_hz + 1e-9)) + 1
    n_new = max(n_new, 2)
    t_new = np.arange(n_new) / target_rate_hz
    out = np.interp(t_new, t_old, sig.samples)
    return WaveSignal(out, target_rate_hz, sig.label)


def bandpass(
    sig: WaveSignal,
    low_hz: float = DEFAULT_BAND_HZ[0],
    high_hz: float = DEFAULT_BAND_HZ[1],
) -> WaveSignal:
    """Zero-phase Butterworth band-pass (order 4, applied forward-backward)."""
    nyquist = sig.sample_rate_hz / 2.0
    if not (0 < low_hz < high_hz < nyquist):
        raise ParameterError(
            f"band [{low_hz}, {high_hz}] Hz must lie strictly inside (0, {nyquist}) Hz"
        )
    b, a = butter(BUTTER_ORDER, [low_hz / nyquist, high_hz / nyquist], btype="band")
    out = filtfilt(b, a, sig.samples)
    return WaveSignal(out, sig.sample_rate_hz, sig.label)


def savgol_smooth(sig_or_samples, spec: SavGolSpec):
    """Savitzky-Golay smoothing with mirror-padded edges.

    Accepts either a WaveSignal (returns WaveSignal) or a plain 1-D array
    (returns an array); cycle-level callers work on bare arrays.
    """
    if isinstance(sig_or_samples, WaveSignal):
        out = savgol_smooth(np.asarray(sig_or_samples.samples), spec)
        return WaveSignal(out, sig_or_samples.sample_rate_hz, sig_or_samples.label)
    x = np.asarray(sig_or_samples, dtype=np.float64)
    if spec.window_len > x.size:
        raise ParameterError("window_len exceeds signal length")
    if spec.window_len == 1:
        return x.copy()
    return savgol_filter(x, spec.window_len, spec.poly_order, mode="mirror")


def normalize_cycle(samples) -> np.ndarray:
    """Min-max scale a sample sequence onto [0, 1]."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ParameterError("empty input")
    if not np.all(np.isfinite(x)):
        raise DataValidityError("non-finite samples")
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        raise DegenerateInputError("constant input cannot be min-max normalized")
    return (x - lo) / (hi - lo)


# --- waveform CSV contract: header `t_seconds,value`, strictly increasing t ---

MAX_JITTER_FRACTION = 0.05


def read_waveform_csv(path, label: SignalLabel = SignalLabel.PPG) -> WaveSignal:
    """Load a waveform CSV, inferring the sample rate from the median step.

    Rejects non-increasing timestamps and timing jitter above 5% of the
    median step.
    """
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None or set(data.dtype.names) < {"t_seconds", "value"}:
        raise DataValidityError(f"{path}: expected header 't_seconds,value'")
    t = np.atleast_1d(data["t_seconds"]).astype(np.float64)
    v = np.atleast_1d(data["value"]).astype(np.float64)
    if t.size < 2:
        raise DataValidityError(f"{path}: need at least 2 rows")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise DataValidityError(f"{path}: t_seconds must be strictly increasing")
    med = float(np.median(dt))
    if np.max(np.abs(dt - med)) > MAX_JITTER_FRACTION * med:
        raise DataValidityError(f"{path}: timing jitter exceeds 5% of median step")
    return WaveSignal(v, 1.0 / med, label)


def write_waveform_csv(path, sig: WaveSignal) -> None:
    t = sig.times()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t_seconds,value\n")
        for ti, vi in zip(t, sig.samples):
            fh.write(f"{ti:.9g},{vi:.12g}\n")
