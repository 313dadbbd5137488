"""ppgingest: convert face videos into per-frame skin-RGB trace CSVs.

The only contract with downstream tooling is the trace CSV format
(`frame_index,t_seconds,r_mean,g_mean,b_mean,skin_pixel_count`); this
package never imports the analysis side.
"""

from .core import (
    DETECTORS,
    CoverageError,
    IngestError,
    IngestSpec,
    IngestSummary,
    VideoError,
    ingest,
    skin_mask,
)

__all__ = [
    "DETECTORS",
    "CoverageError",
    "IngestError",
    "IngestSpec",
    "IngestSummary",
    "VideoError",
    "ingest",
    "skin_mask",
]
