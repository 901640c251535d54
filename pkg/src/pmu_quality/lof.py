"""
Local Outlier Factor baseline.

Each channel is reduced to one scalar per window (its standard
deviation) and the LOF of every channel is computed against the other
channels at that window position. Channels scoring above the threshold
are candidates; the sliding-window and confirmation machinery is the
same as the similarity detector's.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from pmu_quality.detector import DetectionReport, StreamingDetector, _check_matrix, _warn_if_short
from pmu_quality.signals import SignalMatrix
from pmu_quality.similarity import WindowView, std_dev

# Pairwise distances are floored here so densities stay finite.
MIN_DISTANCE = 1e-15


@dataclass(frozen=True)
class LofConfig:
    k_neighbors: int = 3
    threshold: float = 10.0
    window_len: int = 80
    stride: int = 1
    confirm_windows: int = 15
    sample_rate_hz: float = 60.0

    def __post_init__(self) -> None:
        if self.k_neighbors < 1:
            raise ValueError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if not self.threshold > 1:
            raise ValueError(f"threshold must exceed 1, got {self.threshold}")
        if self.window_len < 2 or self.stride < 1 or self.confirm_windows < 0:
            raise ValueError("invalid window_len / stride / confirm_windows")

    def to_dict(self) -> dict:
        return asdict(self)


def lof_feature(w: WindowView) -> float:
    """Per-window feature: the population standard deviation."""
    return std_dev(w)


def batch_lof_scores(features: np.ndarray, k: int) -> np.ndarray:
    """LOF of each point against the others, for a stack of 1-D point sets.

    Args:
        features: ``(W, N)``; each row is an independent set of N scalars.
        k: Neighbour count, ``1 <= k <= N - 1``.

    Returns:
        ``(W, N)`` LOF scores. Ties at the k-distance enlarge the
        neighbourhood, as in the original definition.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"features must be (W, N), got {x.shape}")
    n = x.shape[1]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k_neighbors={k} needs at least {k + 1} points, got {n}")

    dist = np.maximum(np.abs(x[:, :, None] - x[:, None, :]), MIN_DISTANCE)
    eye = np.eye(n, dtype=bool)[None]
    dist = np.where(eye, np.inf, dist)
    kdist = np.sort(dist, axis=-1)[..., k - 1]  # (W, N)
    nbr = dist <= kdist[..., None]  # [w, a, b]: b in N_k(a)
    reach = np.maximum(kdist[:, None, :], dist)  # reach-dist_k(a, b)
    count = nbr.sum(axis=-1)
    lrd = count / np.where(nbr, reach, 0.0).sum(axis=-1)
    return np.where(nbr, lrd[:, None, :], 0.0).sum(axis=-1) / count / lrd


def lof_scores(features, cfg: LofConfig | None = None) -> np.ndarray:
    """LOF score of each of N scalar features; inliers score about 1."""
    cfg = cfg or LofConfig()
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("features must be one-dimensional")
    if x.size < cfg.k_neighbors + 1:
        raise ValueError(f"need at least {cfg.k_neighbors + 1} features, got {x.size}")
    return batch_lof_scores(x[None, :], cfg.k_neighbors)[0]


def _window_sigmas(segments: np.ndarray) -> np.ndarray:
    constant = np.all(segments == segments[..., :1], axis=-1)
    return np.where(constant, 0.0, np.std(segments, axis=-1))


def lof_detector(cfg: LofConfig, n_channels: int, channel_ids=None, **kwargs) -> StreamingDetector:
    if n_channels < cfg.k_neighbors + 1:
        raise ValueError(f"LOF with k={cfg.k_neighbors} needs at least {cfg.k_neighbors + 1} channels")
    k, thr = cfg.k_neighbors, cfg.threshold
    return StreamingDetector(
        n_channels,
        cfg.window_len,
        cfg.stride,
        cfg.confirm_windows,
        scorer=lambda seg: batch_lof_scores(_window_sigmas(seg), k),
        is_candidate=lambda scores: scores > thr,
        channel_ids=channel_ids,
        **kwargs,
    )


def run_lof(matrix: SignalMatrix, cfg: LofConfig | None = None) -> DetectionReport:
    """LOF baseline over the whole matrix with the confirmation rule."""
    cfg = cfg or LofConfig()
    _check_matrix(matrix, cfg.sample_rate_hz)
    _warn_if_short(matrix.n_samples, cfg.window_len, cfg.stride, cfg.confirm_windows)
    det = lof_detector(cfg, matrix.n_channels, matrix.channel_ids)
    det.push(matrix.values)
    return det.report()
