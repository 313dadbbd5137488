"""Beat segmentation and per-cycle fiducial feature extraction.

A continuous waveform is cut at diastolic minima (signal valleys); each
cycle is resampled to a fixed length and min-max normalized. Features are
the classic single-cycle fiducials: systolic peak (SP), dicrotic notch
(DN), diastolic peak (DP), the two areas either side of the notch, and
first-derivative extrema.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import find_peaks

from .errors import DataValidityError, FeatureExtractionError, ParameterError
from .signal_core import SignalLabel, WaveSignal, normalize_cycle

CYCLE_LEN = 64  # fixed per-cycle sample count
MIN_CYCLE_S = 0.25
MAX_CYCLE_S = 1.5
MIN_SIGNAL_S = 3.0


@dataclass(frozen=True)
class BeatCycle:
    """One cardiac cycle, length-normalized and amplitude-normalized."""

    samples: np.ndarray
    source_label: SignalLabel
    subject_id: str
    cycle_index: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.shape != (CYCLE_LEN,):
            raise DataValidityError(f"cycle must have exactly {CYCLE_LEN} samples")
        if not np.all(np.isfinite(x)):
            raise DataValidityError("cycle contains non-finite samples")
        if abs(x.min()) > 1e-9 or abs(x.max() - 1.0) > 1e-9:
            raise DataValidityError("cycle must be min-max normalized to [0, 1]")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "source_label", SignalLabel(self.source_label))


@dataclass(frozen=True)
class FiducialFeatures:
    sp_idx: int
    dn_idx: int
    dp_idx: int
    a1_area: float
    a2_area: float
    a2_a1_ratio: float
    a1: float
    b1: float
    ta1: int
    delta_t: int

    FIELDS = ("sp_idx", "dn_idx", "dp_idx", "a1_area", "a2_area",
              "a2_a1_ratio", "a1", "b1", "ta1", "delta_t")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.FIELDS], dtype=np.float64)


def segment_beats(
    sig: WaveSignal,
    subject_id: str = "",
    cycle_len: int = CYCLE_LEN,
) -> list[BeatCycle]:
    """Cut a band-passed waveform into valley-to-valley cycles.

    Cycles with raw duration outside [0.25 s, 1.5 s] are discarded; a
    waveform with no detectable valleys yields an empty list.
    """
    if cycle_len != CYCLE_LEN:
        raise ParameterError("cycle_len is fixed by the BeatCycle contract")
    x = np.asarray(sig.samples)
    if not np.all(np.isfinite(x)):
        raise DataValidityError("non-finite samples")
    if sig.duration_s < MIN_SIGNAL_S:
        raise ParameterError("signal shorter than 3 s")
    spread = float(x.max() - x.min())
    if spread <= 0:
        return []
    # Valley spacing guard: at least 60% of the dominant period, so
    # dicrotic troughs inside a beat are not taken for cycle boundaries.
    period_s = _dominant_period_s(x, sig.sample_rate_hz)
    min_dist = max(1, int(round(max(MIN_CYCLE_S, 0.6 * period_s) * sig.sample_rate_hz)))
    valleys, _ = find_peaks(-x, distance=min_dist, prominence=0.1 * spread)
    cycles: list[BeatCycle] = []
    for k, (a, b) in enumerate(zip(valleys[:-1], valleys[1:])):
        dur = (b - a) / sig.sample_rate_hz
        if not (MIN_CYCLE_S <= dur <= MAX_CYCLE_S):
            continue
        raw = x[a : b + 1]
        if raw.max() - raw.min() <= 0:
            continue
        grid = np.linspace(0, raw.size - 1, CYCLE_LEN)
        resampled = np.interp(grid, np.arange(raw.size), raw)
        cycles.append(
            BeatCycle(
                normalize_cycle(resampled),
                sig.label,
                subject_id,
                len(cycles),
            )
        )
    return cycles


def _dominant_period_s(x: np.ndarray, rate_hz: float,
                       band=(0.7, 4.0)) -> float:
    """Period of the strongest spectral component in the heart-rate band."""
    spectrum = np.abs(np.fft.rfft(x - x.mean()))
    freqs = np.fft.rfftfreq(x.size, 1.0 / rate_hz)
    in_band = (freqs >= band[0]) & (freqs <= band[1])
    if not np.any(in_band) or spectrum[in_band].max() <= 0:
        return MIN_CYCLE_S
    # lowest component within 60% of the band maximum, so a strong second
    # harmonic cannot masquerade as the fundamental
    mags = spectrum[in_band]
    strong = np.flatnonzero(mags >= 0.6 * mags.max())
    f0 = float(freqs[in_band][strong[0]])
    return 1.0 / f0


def first_derivative(cycle_or_samples) -> np.ndarray:
    """First derivative per sample index: central interior, one-sided ends."""
    x = cycle_or_samples.samples if isinstance(cycle_or_samples, BeatCycle) else cycle_or_samples
    return np.gradient(np.asarray(x, dtype=np.float64))


def _strict_local_maxima(x: np.ndarray) -> np.ndarray:
    peaks, _ = find_peaks(x)
    return peaks


def extract_features(cycle: BeatCycle) -> FiducialFeatures:
    """Locate SP/DN/DP and compute the per-cycle fiducial feature vector.

    Raises FeatureExtractionError when the cycle has no interior maximum
    or no usable post-systolic structure.
    """
    x = cycle.samples
    n = x.size
    sp = int(np.argmax(x))
    if sp == 0 or sp == n - 1:
        raise FeatureExtractionError("monotone cycle: no interior systolic peak")

    d = first_derivative(x)
    # Candidate notch: local signal minimum after SP.
    post = x[sp + 1 : n - 1]
    minima = [sp + 1 + int(i) for i in _strict_local_maxima(-post)]
    if minima:
        dn = minima[0]
    else:
        # Damped cycle: fall back to the least-negative local maximum of the
        # derivative after SP (where the decay briefly flattens).
        d_post = d[sp + 1 : n - 1]
        d_peaks = _strict_local_maxima(d_post)
        if d_peaks.size:
            dn = sp + 1 + int(d_peaks[np.argmax(d_post[d_peaks])])
        elif post.size:
            # featureless decay (e.g. triangle): notch defaults to the
            # interior minimum after the peak
            dn = sp + 1 + int(np.argmin(post))
        else:
            raise FeatureExtractionError("no samples after systolic peak")

    maxima_after = [i for i in _strict_local_maxima(x) if i > dn]
    dp = max(maxima_after) if maxima_after else dn
    # Refine the notch to the signal minimum strictly between SP and DP.
    if dp > dn and dp > sp + 1:
        dn = sp + 1 + int(np.argmin(x[sp + 1 : dp]))
    if not (0 < sp < dn <= dp < n):
        raise FeatureExtractionError("fiducial ordering violated")

    a1_area = float(np.trapezoid(x[: dn + 1]))
    a2_area = float(np.trapezoid(x[dn:]))
    ratio = a2_area / a1_area if a1_area > 0 else float("nan")
    ta1 = int(np.argmax(d))
    return FiducialFeatures(
        sp_idx=sp,
        dn_idx=int(dn),
        dp_idx=int(dp),
        a1_area=a1_area,
        a2_area=a2_area,
        a2_a1_ratio=ratio,
        a1=float(d.max()),
        b1=float(d.min()),
        ta1=ta1,
        delta_t=int(dp - sp),
    )


def feature_matrix(cycles: Sequence[BeatCycle]) -> tuple[np.ndarray, list[int]]:
    """Feature vectors for all cycles; returns (matrix, skipped indices)."""
    rows, skipped = [], []
    for i, c in enumerate(cycles):
        try:
            rows.append(extract_features(c).as_array())
        except FeatureExtractionError:
            skipped.append(i)
    mat = np.vstack(rows) if rows else np.empty((0, len(FiducialFeatures.FIELDS)))
    return mat, skipped


# --- cycle archive CSV: subject_id,cycle_index,source_label,s0..s63 ---


def write_cycle_archive(path, cycles: Sequence[BeatCycle]) -> None:
    cols = ",".join(f"s{i}" for i in range(CYCLE_LEN))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"subject_id,cycle_index,source_label,{cols}\n")
        for c in cycles:
            vals = ",".join(f"{v:.12g}" for v in c.samples)
            fh.write(f"{c.subject_id},{c.cycle_index},{c.source_label.value},{vals}\n")


def read_cycle_archive(path) -> list[BeatCycle]:
    cycles = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["subject_id", "cycle_index", "source_label"] + [
            f"s{i}" for i in range(CYCLE_LEN)
        ]
        if header != expected:
            raise DataValidityError(f"{path}: unexpected cycle archive header")
        for row in reader:
            if not row:
                continue
            samples = np.array([float(v) for v in row[3:]])
            cycles.append(BeatCycle(samples, SignalLabel(row[2]), row[0], int(row[1])))
    return cycles


def write_feature_table(path, cycles: Sequence[BeatCycle]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("subject_id,cycle_index,source_label,"
                 + ",".join(FiducialFeatures.FIELDS) + "\n")
        for c in cycles:
            try:
                feats = extract_features(c)
            except FeatureExtractionError:
                continue
            vals = ",".join(f"{v:.12g}" for v in feats.as_array())
            fh.write(f"{c.subject_id},{c.cycle_index},{c.source_label.value},{vals}\n")
