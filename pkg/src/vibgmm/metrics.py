"""Clustering accuracy and a 2-d latent projection for quick inspection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

MAX_LABELS = 64


def confusion_matrix(pred, true) -> np.ndarray:
    """Counts[p, t] of samples predicted p with true label t. Labels are
    compacted to 0..k-1 in sorted order of the values seen."""
    pred = np.asarray(pred)
    true = np.asarray(true)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValueError(f"label vectors must match: {pred.shape} vs {true.shape}")
    p_vals, p_idx = np.unique(pred, return_inverse=True)
    t_vals, t_idx = np.unique(true, return_inverse=True)
    counts = np.zeros((len(p_vals), len(t_vals)), dtype=np.int64)
    np.add.at(counts, (p_idx, t_idx), 1)
    return counts


def clustering_accuracy(pred, true) -> float:
    """Best achievable matched fraction over one-to-one assignments between
    predicted clusters and true classes (solved as a linear assignment on the
    negated confusion counts)."""
    counts = confusion_matrix(pred, true)
    k = max(counts.shape)
    if k > MAX_LABELS:
        raise ValueError(f"{k} distinct labels exceed the supported {MAX_LABELS}")
    padded = np.zeros((k, k), dtype=np.int64)
    padded[: counts.shape[0], : counts.shape[1]] = counts
    rows, cols = linear_sum_assignment(-padded)
    matched = padded[rows, cols].sum()
    return float(matched) / float(len(np.asarray(pred)))


@dataclass
class PcaProjection:
    coords: np.ndarray  # [n, 2]
    components: np.ndarray  # [2, d], rows are principal directions
    mean: np.ndarray  # [d]
    captured_variance: float  # fraction of total variance in the 2 components
    degenerate: bool  # all-zero variance input


def pca_project_2d(latents) -> PcaProjection:
    """Project rows onto the top-2 principal directions of the centered data.

    Directions are ordered by descending eigenvalue; each one's sign is fixed
    so its largest-magnitude loading is positive.
    """
    x = np.asarray(latents, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need at least 2 rows of equal width, got shape {x.shape}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    total = float(np.trace(cov))
    if total <= 0.0:
        return PcaProjection(
            coords=np.zeros((x.shape[0], 2)),
            components=np.zeros((2, x.shape[1])),
            mean=mean,
            captured_variance=0.0,
            degenerate=True,
        )
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:2]
    comps = eigvecs[:, order].T
    if comps.shape[0] < 2:  # 1-d input: pad a zero second direction
        comps = np.vstack([comps, np.zeros((2 - comps.shape[0], x.shape[1]))])
    for i in range(2):
        j = np.abs(comps[i]).argmax()
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    captured = float(np.clip(eigvals[order].sum() / total, 0.0, 1.0))
    return PcaProjection(
        coords=centered @ comps.T,
        components=comps,
        mean=mean,
        captured_variance=captured,
        degenerate=False,
    )
