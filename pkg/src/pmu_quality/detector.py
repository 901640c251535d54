"""
Sliding-window low-quality data detector.

At every window position the similarity degree of each channel against
its peers is computed; a channel whose degree is below ``zeta`` is a
candidate for that position. A candidate is confirmed once it has also
been a candidate at the ``confirm_windows`` immediately preceding
positions, and the samples of a confirmed window are flagged.

``StreamingDetector`` does this incrementally; ``run_stream`` is the
one-shot wrapper. Both go through the same code so feeding a stream in
arbitrary batches gives the same flags as processing it whole.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from pmu_quality.signals import SignalMatrix
from pmu_quality.similarity import SimilarityConfig, batch_similarity_degree

logger = logging.getLogger(__name__)

# Window positions scored per vectorised call; bounds the (W, N, N, bins) temporaries.
CHUNK_POSITIONS = 256


@dataclass(frozen=True)
class DetectorConfig:
    """Parameters of the sliding-window detector.

    ``flag_run`` switches confirmation to flag the whole run of candidate
    windows leading up to the confirmed one instead of only the confirmed
    window itself.
    """

    sim: SimilarityConfig = field(default_factory=SimilarityConfig)
    window_len: int = 80
    stride: int = 1
    zeta: float = 0.3
    confirm_windows: int = 15
    sample_rate_hz: float = 60.0
    flag_run: bool = False

    def __post_init__(self) -> None:
        if self.window_len < 2:
            raise ValueError(f"window_len must be >= 2, got {self.window_len}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if not 0 <= self.zeta < 1:
            raise ValueError(f"zeta must be in [0, 1), got {self.zeta}")
        if self.confirm_windows < 0:
            raise ValueError(f"confirm_windows must be >= 0, got {self.confirm_windows}")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorConfig":
        data = dict(data)
        sim = data.pop("sim", {})
        return cls(sim=SimilarityConfig(**sim), **data)


@dataclass
class DetectionReport:
    """Outcome of a detection run.

    Attributes:
        channel_ids: Channel labels, in matrix order.
        n_samples: Samples per channel that were seen.
        window_starts: Start sample of every scored window position.
        trace: ``(W, N)`` per-position scores (similarity degree, or LOF
            score for the baseline).
        candidates: ``(W, N)`` candidate mask.
        confirmed_windows: Per channel, start samples of confirmed windows.
        flags: ``(N, n_samples)`` low-quality sample mask.
    """

    channel_ids: list[str]
    n_samples: int
    window_starts: np.ndarray
    trace: np.ndarray
    candidates: np.ndarray
    confirmed_windows: list[list[int]]
    flags: np.ndarray

    def flagged_intervals(self) -> dict[str, list[tuple[int, int]]]:
        """Half-open sample intervals ``[start, stop)`` of flagged runs per channel."""
        out = {}
        for cid, row in zip(self.channel_ids, self.flags):
            padded = np.concatenate(([False], row, [False])).astype(np.int8)
            edges = np.flatnonzero(np.diff(padded))
            out[cid] = [(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])]
        return out

    @property
    def n_flagged(self) -> int:
        return int(self.flags.sum())


@dataclass
class ReportDelta:
    """What one ``push`` added."""

    window_starts: np.ndarray
    trace: np.ndarray
    candidates: np.ndarray
    confirmations: list[tuple[int, int]]  # (channel index, window start)
    flagged: list[tuple[int, int, int]]  # (channel index, start, stop)

    @property
    def empty(self) -> bool:
        return self.window_starts.size == 0


Scorer = Callable[[np.ndarray], np.ndarray]
CandidateRule = Callable[[np.ndarray], np.ndarray]


class StreamingDetector:
    """Incremental sliding-window detector with the confirmation rule.

    Single writer: one owner pushes batches in time order. Reports and
    deltas are plain data and can be handed to other threads.

    Args:
        n_channels: Number of channels in every batch.
        window_len, stride, confirm_windows: Sliding-window parameters.
        scorer: Maps a ``(W, N, L)`` stack of windows to ``(W, N)`` scores.
        is_candidate: Maps scores to a boolean candidate mask.
        channel_ids: Optional labels.
        flag_run: Flag the whole candidate run on confirmation.
        keep_trace: Retain per-position scores for the final report.
    """

    def __init__(
        self,
        n_channels: int,
        window_len: int,
        stride: int,
        confirm_windows: int,
        scorer: Scorer,
        is_candidate: CandidateRule,
        channel_ids: Sequence[str] | None = None,
        flag_run: bool = False,
        keep_trace: bool = True,
    ) -> None:
        if n_channels < 2:
            raise ValueError(f"need at least 2 channels, got {n_channels}")
        self.n_channels = n_channels
        self.window_len = window_len
        self.stride = stride
        self.confirm_windows = confirm_windows
        self.scorer = scorer
        self.is_candidate = is_candidate
        self.channel_ids = list(channel_ids) if channel_ids else [f"f{i + 1}" for i in range(n_channels)]
        self.flag_run = flag_run
        self.keep_trace = keep_trace

        self._buf = np.empty((n_channels, 0))
        self._buf_start = 0  # absolute index of self._buf[:, 0]
        self._n_seen = 0
        self._next_start = 0
        self._run = np.zeros(n_channels, dtype=np.int64)
        self._starts: list[np.ndarray] = []
        self._trace: list[np.ndarray] = []
        self._cands: list[np.ndarray] = []
        self._confirmed: list[list[int]] = [[] for _ in range(n_channels)]
        self._intervals: list[tuple[int, int, int]] = []

    @classmethod
    def from_config(
        cls, cfg: DetectorConfig, n_channels: int, channel_ids: Sequence[str] | None = None, **kwargs
    ) -> "StreamingDetector":
        """Detector scoring windows by similarity degree, candidate when below zeta."""
        sim, rate, zeta = cfg.sim, cfg.sample_rate_hz, cfg.zeta
        return cls(
            n_channels,
            cfg.window_len,
            cfg.stride,
            cfg.confirm_windows,
            scorer=lambda seg: batch_similarity_degree(seg, rate, sim),
            is_candidate=lambda scores: scores < zeta,
            channel_ids=channel_ids,
            flag_run=cfg.flag_run,
            **kwargs,
        )

    @property
    def n_seen(self) -> int:
        return self._n_seen

    def push(self, batch) -> ReportDelta:
        """Append ``(N, b)`` samples and score every window they complete."""
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim == 1 and batch.size == self.n_channels:
            batch = batch[:, None]
        if batch.ndim != 2 or batch.shape[0] != self.n_channels:
            raise ValueError(
                f"batch must have shape ({self.n_channels}, b), got {batch.shape}"
            )
        if batch.shape[1] == 0:
            return _empty_delta(self.n_channels)
        if not np.all(np.isfinite(batch)):
            raise ValueError("batch contains non-finite samples")

        self._buf = np.concatenate([self._buf, batch], axis=1)
        self._n_seen += batch.shape[1]

        last_start = self._n_seen - self.window_len
        if last_start < self._next_start:
            return _empty_delta(self.n_channels)
        starts = np.arange(self._next_start, last_start + 1, self.stride)

        traces, cands = [], []
        for lo in range(0, starts.size, CHUNK_POSITIONS):
            chunk = starts[lo:lo + CHUNK_POSITIONS]
            offset = chunk[0] - self._buf_start
            span = self._buf[:, offset:offset + (chunk[-1] - chunk[0]) + self.window_len]
            seg = sliding_window_view(span, self.window_len, axis=1)[:, :: self.stride]
            seg = np.ascontiguousarray(seg.transpose(1, 0, 2))
            scores = self.scorer(seg)
            traces.append(scores)
            cands.append(np.asarray(self.is_candidate(scores), dtype=bool))
        trace = np.concatenate(traces)
        cand = np.concatenate(cands)

        confirmations, flagged = [], []
        need = self.confirm_windows + 1
        for p, row in zip(starts, cand):
            self._run = np.where(row, self._run + 1, 0)
            for c in np.flatnonzero(self._run >= need):
                p = int(p)
                confirmations.append((int(c), p))
                self._confirmed[c].append(p)
                lo = p
                if self.flag_run and self._run[c] == need:
                    lo = p - self.confirm_windows * self.stride
                flagged.append((int(c), lo, p + self.window_len))

        self._next_start = int(starts[-1]) + self.stride
        drop = self._next_start - self._buf_start
        if drop > 0:
            self._buf = self._buf[:, drop:]
            self._buf_start = self._next_start
        self._intervals.extend(flagged)
        if self.keep_trace:
            self._starts.append(starts)
            self._trace.append(trace)
            self._cands.append(cand)
        return ReportDelta(starts, trace, cand, confirmations, flagged)

    def report(self) -> DetectionReport:
        """Cumulative report over everything pushed so far."""
        flags = np.zeros((self.n_channels, self._n_seen), dtype=bool)
        for c, lo, hi in self._intervals:
            flags[c, lo:hi] = True
        if self._starts:
            starts = np.concatenate(self._starts)
            trace = np.concatenate(self._trace)
            cand = np.concatenate(self._cands)
        else:
            starts = np.empty(0, dtype=np.int64)
            trace = np.empty((0, self.n_channels))
            cand = np.empty((0, self.n_channels), dtype=bool)
        return DetectionReport(
            list(self.channel_ids),
            self._n_seen,
            starts,
            trace,
            cand,
            [list(c) for c in self._confirmed],
            flags,
        )


def _empty_delta(n_channels: int) -> ReportDelta:
    return ReportDelta(
        np.empty(0, dtype=np.int64),
        np.empty((0, n_channels)),
        np.empty((0, n_channels), dtype=bool),
        [],
        [],
    )


def _check_matrix(matrix: SignalMatrix, sample_rate_hz: float) -> None:
    if matrix.n_channels < 2:
        raise ValueError(f"need at least 2 channels, got {matrix.n_channels}")
    if not np.isclose(matrix.sample_rate, sample_rate_hz, rtol=1e-12, atol=0):
        raise ValueError(
            f"matrix sample rate {matrix.sample_rate} Hz differs from configured {sample_rate_hz} Hz"
        )


def _warn_if_short(n_samples: int, window_len: int, stride: int, confirm_windows: int) -> None:
    positions = 0 if n_samples < window_len else (n_samples - window_len) // stride + 1
    if positions < confirm_windows + 1:
        msg = (
            f"only {positions} window positions for {n_samples} samples; "
            f"{confirm_windows + 1} are needed before anything can be confirmed"
        )
        logger.warning(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


def detect_window(matrix: SignalMatrix, start: int, cfg: DetectorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Similarity degree and candidate flag of every channel for one window.

    Returns:
        ``(scores, candidates)``, each of length N.
    """
    _check_matrix(matrix, cfg.sample_rate_hz)
    if start < 0 or start + cfg.window_len > matrix.n_samples:
        raise ValueError(
            f"window [{start}, {start + cfg.window_len}) outside {matrix.n_samples} samples"
        )
    seg = matrix.values[None, :, start:start + cfg.window_len]
    scores = batch_similarity_degree(seg, cfg.sample_rate_hz, cfg.sim)[0]
    return scores, scores < cfg.zeta


def run_stream(matrix: SignalMatrix, cfg: DetectorConfig | None = None) -> DetectionReport:
    """Slide the window over the whole matrix and apply the confirmation rule."""
    cfg = cfg or DetectorConfig()
    _check_matrix(matrix, cfg.sample_rate_hz)
    _warn_if_short(matrix.n_samples, cfg.window_len, cfg.stride, cfg.confirm_windows)
    det = StreamingDetector.from_config(cfg, matrix.n_channels, matrix.channel_ids)
    det.push(matrix.values)
    return det.report()
