"""Distribution and verification metrics: two-sample KS statistic, Pearson
correlation, and FAR/FRR/EER from genuine and impostor score sets."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, ParameterError


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic (no p-value).

    D = sup_x |F_a(x) - F_b(x)| over the empirical CDFs.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ParameterError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ParameterError("inputs must be equal-length 1-D sequences of length >= 2")
    xd = x - x.mean()
    yd = y - y.mean()
    sx = np.sqrt((xd**2).sum())
    sy = np.sqrt((yd**2).sum())
    if sx == 0 or sy == 0:
        raise DegenerateInputError("constant input has no defined correlation")
    return float(np.clip((xd * yd).sum() / (sx * sy), -1.0, 1.0))


def far_frr_eer(genuine_scores, impostor_scores):
    """Equal error rate with its threshold and the full ROC table.

    FAR(t) = fraction of impostor scores >= t; FRR(t) = fraction of
    genuine scores < t. The EER is taken at the FAR/FRR crossing with
    linear interpolation between adjacent candidate thresholds.

    Returns:
        (eer, threshold, roc) where roc is an (n, 3) array of
        (threshold, far, frr) rows over the candidate grid.
    """
    genuine = np.asarray(genuine_scores, dtype=np.float64)
    impostor = np.asarray(impostor_scores, dtype=np.float64)
    if genuine.size == 0 or impostor.size == 0:
        raise ParameterError("both score sets must be nonempty")

    candidates = np.unique(np.concatenate([genuine, impostor]))
    gen_sorted = np.sort(genuine)
    imp_sorted = np.sort(impostor)
    far = (impostor.size
           - np.searchsorted(imp_sorted, candidates, side="left")) / impostor.size
    frr = np.searchsorted(gen_sorted, candidates, side="left") / genuine.size
    roc = np.column_stack([candidates, far, frr])

    diff = far - frr
    if diff[0] <= 0:  # already crossed at the lowest candidate
        return float((far[0] + frr[0]) / 2.0), float(candidates[0]), roc
    k = int(np.argmax(diff <= 0))
    if diff[k] > 0:  # never crosses within the grid: cross toward t -> inf
        return float((far[-1] + frr[-1]) / 2.0), float(candidates[-1]), roc
    if diff[k] == 0:
        thr = candidates[k] if k == 0 else (candidates[k - 1] + candidates[k]) / 2.0
        return float(far[k]), float(thr), roc
    lam = diff[k - 1] / (diff[k - 1] - diff[k])
    eer = far[k - 1] + lam * (far[k] - far[k - 1])
    thr = candidates[k - 1] + lam * (candidates[k] - candidates[k - 1])
    return float(eer), float(thr), roc
