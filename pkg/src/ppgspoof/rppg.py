"""Chrominance-based (CHROM) rPPG extraction from mean-RGB skin traces."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import windows

from .errors import DataValidityError, ParameterError
from .signal_core import SignalLabel, WaveSignal


@dataclass(frozen=True)
class RgbTrace:
    """Per-frame mean skin RGB values of one video."""

    frames: np.ndarray  # shape (n, 3), columns R, G, B
    frame_rate_hz: float
    skin_pixel_counts: Optional[np.ndarray] = None

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != 3 or frames.shape[0] < 2:
            raise DataValidityError("trace must be an (n>=2, 3) array")
        if not np.all(np.isfinite(frames)) or np.any(frames < 0):
            raise DataValidityError("channel means must be finite and >= 0")
        if not (self.frame_rate_hz > 0):
            raise ParameterError("frame_rate_hz must be positive")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        if self.skin_pixel_counts is not None:
            counts = np.asarray(self.skin_pixel_counts, dtype=np.int64)
            if counts.shape != (frames.shape[0],) or np.any(counts < 0):
                raise DataValidityError("skin_pixel_counts shape/sign mismatch")
            counts.setflags(write=False)
            object.__setattr__(self, "skin_pixel_counts", counts)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.frame_rate_hz

    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) / self.frame_rate_hz


@dataclass(frozen=True)
class ChromSpec:
    """Windowing used by the CHROM overlap-add extraction."""

    window_seconds: float = 1.6
    overlap_fraction: float = 0.5

    def __post_init__(self):
        if not (self.window_seconds > 0):
            raise ParameterError("window_seconds must be positive")
        if not (0 <= self.overlap_fraction < 1):
            raise ParameterError("overlap_fraction must lie in [0, 1)")


_ALPHA_EPS = 1e-12


def _chrom_window(block: np.ndarray) -> np.ndarray:
    """CHROM projection of one window of RGB means; returns zero-mean S."""
    means = block.mean(axis=0)
    if np.any(means <= 0):
        raise DataValidityError("a channel is all zero (or negative) in a window")
    norm = block / means
    x = 3.0 * norm[:, 0] - 2.0 * norm[:, 1]
    y = 1.5 * norm[:, 0] + norm[:, 1] - 1.5 * norm[:, 2]
    sx, sy = x.std(), y.std()
    alpha = 1.0 if sy < _ALPHA_EPS else sx / sy
    s = x - alpha * y
    return s - s.mean()


def chrom_extract(trace: RgbTrace, spec: ChromSpec = ChromSpec()) -> WaveSignal:
    """Extract the rPPG waveform from an RGB trace with CHROM.

    Windows are Hann-weighted and overlap-added; the accumulated window
    weight is divided out so constant-amplitude content is reconstructed
    without boundary ripple. Output sample rate equals the frame rate.
    """
    n = trace.n_frames
    win_len = int(round(spec.window_seconds * trace.frame_rate_hz))
    if win_len < 8:
        raise ParameterError("window must span at least 8 frames")
    if win_len > n:
        raise ParameterError("window longer than trace")
    hop = max(1, int(round(win_len * (1.0 - spec.overlap_fraction))))
    hann = windows.hann(win_len, sym=False)

    out = np.zeros(n)
    weight = np.zeros(n)
    starts = list(range(0, n - win_len + 1, hop))
    if starts[-1] != n - win_len:
        starts.append(n - win_len)  # anchor the tail so every frame is covered
    for start in starts:
        block = trace.frames[start : start + win_len]
        s = _chrom_window(block)
        out[start : start + win_len] += hann * s
        weight[start : start + win_len] += hann

    covered = weight > 1e-6
    out[covered] /= weight[covered]
    out[~covered] = 0.0
    out -= out.mean()
    return WaveSignal(out, trace.frame_rate_hz, SignalLabel.RPPG)


def decimate_trace(trace: RgbTrace, target_fps: float) -> RgbTrace:
    """Drop frames to simulate a lower-frame-rate recording.

    Each output frame takes the nearest source frame, as when a video is
    re-encoded at a lower frame rate. Per-frame sensor noise is preserved
    unfiltered, so a larger share of its power lands inside the pulse band
    at the reduced rate.
    """
    if not (0 < target_fps < trace.frame_rate_hz):
        raise ParameterError("target_fps must be below the source frame rate")
    n_out = int(round(trace.n_frames * target_fps / trace.frame_rate_hz))
    if n_out < 2:
        raise ParameterError("decimated trace would be shorter than 2 frames")
    ratio = trace.frame_rate_hz / target_fps
    idx = np.minimum(np.round(np.arange(n_out) * ratio).astype(int),
                     trace.n_frames - 1)
    counts = (None if trace.skin_pixel_counts is None
              else trace.skin_pixel_counts[idx])
    return RgbTrace(trace.frames[idx], target_fps, counts)


# --- trace CSV contract (shared with the video-ingest component) ---
# header: frame_index,t_seconds,r_mean,g_mean,b_mean,skin_pixel_count
# gap rows (no usable skin pixels) carry empty channel means.


def read_trace_csv(path, max_gap_frames: int = 0) -> RgbTrace:
    """Load a trace CSV; reject traces with more gap rows than allowed.

    Gap rows are frames the producer flagged as having no usable skin
    pixels (empty channel means). Up to `max_gap_frames` of them are
    filled by linear interpolation; more than that is treated as a signal
    interruption and rejected.
    """
    header, rows = _read_csv_rows(path)
    required = ["frame_index", "t_seconds", "r_mean", "g_mean", "b_mean", "skin_pixel_count"]
    for col in required:
        if col not in header:
            raise DataValidityError(f"{path}: missing column '{col}'")
    ix = {col: header.index(col) for col in required}

    n = len(rows)
    if n < 2:
        raise DataValidityError(f"{path}: need at least 2 frames")
    t = np.empty(n)
    rgb = np.full((n, 3), np.nan)
    counts = np.zeros(n, dtype=np.int64)
    gaps = []
    for i, row in enumerate(rows):
        try:
            t[i] = float(row[ix["t_seconds"]])
            counts[i] = int(row[ix["skin_pixel_count"]])
            cells = [row[ix["r_mean"]], row[ix["g_mean"]], row[ix["b_mean"]]]
            if any(c.strip() == "" for c in cells):
                gaps.append(i)
            else:
                rgb[i] = [float(c) for c in cells]
        except (ValueError, IndexError) as exc:
            raise DataValidityError(f"{path}: line {i + 2}: {exc}") from exc

    if len(gaps) > max_gap_frames:
        raise DataValidityError(
            f"{path}: {len(gaps)} gap frames exceed the interruption policy "
            f"(max {max_gap_frames})"
        )
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise DataValidityError(f"{path}: t_seconds must be strictly increasing")
    fps = 1.0 / float(np.median(dt))
    if gaps:
        good = np.setdiff1d(np.arange(n), np.asarray(gaps))
        if good.size < 2:
            raise DataValidityError(f"{path}: too few usable frames")
        for ch in range(3):
            rgb[gaps, ch] = np.interp(t[gaps], t[good], rgb[good, ch])
    return RgbTrace(rgb, fps, counts)


def write_trace_csv(path, trace: RgbTrace) -> None:
    t = trace.times()
    counts = trace.skin_pixel_counts
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("frame_index,t_seconds,r_mean,g_mean,b_mean,skin_pixel_count\n")
        for i in range(trace.n_frames):
            c = 0 if counts is None else int(counts[i])
            r, g, b = trace.frames[i]
            fh.write(f"{i},{t[i]:.9g},{r:.12g},{g:.12g},{b:.12g},{c}\n")


def _read_csv_rows(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise DataValidityError(f"{path}: empty file")
    header = [c.strip() for c in lines[0].split(",")]
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows
