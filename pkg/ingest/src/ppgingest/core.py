"""Video -> skin-RGB trace conversion.

Per frame: locate a face region with a pluggable detector, mask it with
the classic RGB skin rule, and record the mean R/G/B over skin pixels.
Frames without a usable region are emitted as gap rows (empty channel
cells, zero pixel count) — never fabricated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import cv2
import numpy as np


class IngestError(Exception):
    """Base class for ingestion failures."""


class VideoError(IngestError):
    """Unreadable or unsupported video input."""


class CoverageError(IngestError):
    """Too many frames without a detectable face/skin region."""

    def __init__(self, message: str, report: "IngestSummary"):
        super().__init__(message)
        self.report = report


# --- skin rule: R > 95, G > 40, B > 20, max-min > 15, |R-G| > 15, R > G, R > B ---

SKIN_THRESHOLDS = {"r_min": 95.0, "g_min": 40.0, "b_min": 20.0,
                   "spread_min": 15.0, "rg_diff_min": 15.0}


def skin_mask(rgb: np.ndarray, relax: float = 1.0) -> np.ndarray:
    """Boolean mask of skin-colored pixels in an (h, w, 3) RGB array.

    ``relax`` in (0, 1] scales every threshold; 1.0 is the published rule,
    smaller values admit more pixels (adaptive relaxation).
    """
    r = rgb[..., 0].astype(np.float64)
    g = rgb[..., 1].astype(np.float64)
    b = rgb[..., 2].astype(np.float64)
    t = {k: v * relax for k, v in SKIN_THRESHOLDS.items()}
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    return ((r > t["r_min"]) & (g > t["g_min"]) & (b > t["b_min"])
            & (mx - mn > t["spread_min"]) & (np.abs(r - g) > t["rg_diff_min"])
            & (r > g) & (r > b))


# --- pluggable detectors: frame (RGB) -> (x, y, w, h) box or None ---


def _detect_fullframe(rgb: np.ndarray) -> Optional[tuple]:
    h, w = rgb.shape[:2]
    return (0, 0, w, h)


def _detect_center(rgb: np.ndarray) -> Optional[tuple]:
    """Fixed centered box covering 60% of each dimension."""
    h, w = rgb.shape[:2]
    bw, bh = int(round(0.6 * w)), int(round(0.6 * h))
    return ((w - bw) // 2, (h - bh) // 2, bw, bh)


def _detect_skinblob(rgb: np.ndarray) -> Optional[tuple]:
    """Bounding box of the largest connected skin-colored component."""
    mask = skin_mask(rgb).astype(np.uint8)
    n_labels, labels, stats, _ = cv2.connectedComponentsWithStats(mask)
    if n_labels < 2:
        return None
    areas = stats[1:, cv2.CC_STAT_AREA]
    best = 1 + int(np.argmax(areas))
    if stats[best, cv2.CC_STAT_AREA] < 4:
        return None
    x, y = int(stats[best, cv2.CC_STAT_LEFT]), int(stats[best, cv2.CC_STAT_TOP])
    w, h = int(stats[best, cv2.CC_STAT_WIDTH]), int(stats[best, cv2.CC_STAT_HEIGHT])
    return (x, y, w, h)


DETECTORS: dict[str, Callable[[np.ndarray], Optional[tuple]]] = {
    "skinblob": _detect_skinblob,
    "center": _detect_center,
    "fullframe": _detect_fullframe,
}


@dataclass(frozen=True)
class IngestSpec:
    detector: str = "skinblob"
    min_skin_pixels: int = 50
    max_gap_fraction: float = 0.2
    # adaptive relaxation: thresholds scaled by these factors, mildest
    # sufficient level chosen once per video
    relax_levels: tuple = (1.0, 0.8, 0.6)
    coverage_target: float = 0.8

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise IngestError(
                f"unknown detector '{self.detector}' "
                f"(available: {', '.join(sorted(DETECTORS))})")
        if self.min_skin_pixels < 1:
            raise IngestError("min_skin_pixels must be >= 1")
        if not (0 <= self.max_gap_fraction < 1):
            raise IngestError("max_gap_fraction must be in [0, 1)")


@dataclass
class IngestSummary:
    """Per-run coverage report."""

    n_frames: int
    n_gap_frames: int
    gap_frame_indices: list = field(default_factory=list)
    relax_level: float = 1.0
    frame_rate_hz: float = 0.0

    @property
    def coverage(self) -> float:
        if self.n_frames == 0:
            return 0.0
        return 1.0 - self.n_gap_frames / self.n_frames

    def text(self) -> str:
        lines = [
            f"frames={self.n_frames}",
            f"gap_frames={self.n_gap_frames}",
            f"coverage={self.coverage:.4f}",
            f"relax_level={self.relax_level}",
            f"frame_rate_hz={self.frame_rate_hz:.9g}",
        ]
        if self.gap_frame_indices:
            head = ",".join(str(i) for i in self.gap_frame_indices[:50])
            lines.append(f"gap_frame_indices={head}")
        return "\n".join(lines) + "\n"


def _read_frames(video_path) -> tuple[list, float]:
    cap = cv2.VideoCapture(str(video_path))
    if not cap.isOpened():
        raise VideoError(f"cannot open video: {video_path}")
    fps = float(cap.get(cv2.CAP_PROP_FPS))
    frames = []
    while True:
        ok, bgr = cap.read()
        if not ok:
            break
        frames.append(cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB))
    cap.release()
    if not frames:
        raise VideoError(f"no decodable frames in: {video_path}")
    if not (fps > 0):
        raise VideoError(f"container reports no frame rate: {video_path}")
    return frames, fps


def _frame_stats(rgb, detector, relax, min_skin_pixels):
    """(r, g, b, count) of skin pixels in the detected box, or None (gap)."""
    box = detector(rgb)
    if box is None:
        return None
    x, y, w, h = box
    roi = rgb[y : y + h, x : x + w]
    mask = skin_mask(roi, relax)
    count = int(mask.sum())
    if count < min_skin_pixels:
        return None
    pixels = roi[mask].astype(np.float64)
    means = pixels.mean(axis=0)
    return (float(means[0]), float(means[1]), float(means[2]), count)


def ingest(video_path, out_csv, spec: IngestSpec = IngestSpec()) -> IngestSummary:
    """Convert a video into a trace CSV; returns the coverage summary.

    Raises CoverageError (carrying the summary) when more than
    ``max_gap_fraction`` of frames have no usable skin region; the CSV is
    not written in that case.
    """
    frames, fps = _read_frames(video_path)
    detector = DETECTORS[spec.detector]

    # choose the mildest relaxation level that reaches the coverage target
    chosen_level = spec.relax_levels[-1]
    chosen_stats = None
    for level in spec.relax_levels:
        stats = [_frame_stats(f, detector, level, spec.min_skin_pixels)
                 for f in frames]
        covered = sum(s is not None for s in stats) / len(frames)
        if covered >= spec.coverage_target:
            chosen_level, chosen_stats = level, stats
            break
    if chosen_stats is None:
        stats = [_frame_stats(f, detector, chosen_level, spec.min_skin_pixels)
                 for f in frames]
        chosen_stats = stats

    gaps = [i for i, s in enumerate(chosen_stats) if s is None]
    summary = IngestSummary(
        n_frames=len(frames),
        n_gap_frames=len(gaps),
        gap_frame_indices=gaps,
        relax_level=chosen_level,
        frame_rate_hz=fps,
    )
    if len(gaps) > spec.max_gap_fraction * len(frames):
        raise CoverageError(
            f"{video_path}: no usable skin region in {len(gaps)}/{len(frames)} "
            f"frames (> {spec.max_gap_fraction:.0%} allowed)", summary)

    with open(out_csv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("frame_index,t_seconds,r_mean,g_mean,b_mean,skin_pixel_count\n")
        for i, s in enumerate(chosen_stats):
            t = i / fps
            if s is None:
                fh.write(f"{i},{t:.9g},,,,0\n")
            else:
                r, g, b, count = s
                fh.write(f"{i},{t:.9g},{r:.12g},{g:.12g},{b:.12g},{count}\n")
    return summary
