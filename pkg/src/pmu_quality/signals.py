"""Container for N synchronised PMU channels sampled at a uniform rate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class SignalMatrix:
    """N channels by S samples, uniform sample rate.

    Attributes:
        values: Array of shape ``(N, S)``.
        sample_rate: Samples per second.
        channel_ids: One label per channel; defaults to ``f1 .. fN``.
        t0: Time of the first sample in seconds.
    """

    values: np.ndarray
    sample_rate: float
    channel_ids: Sequence[str] = field(default=())
    t0: float = 0.0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"signal matrix must be 2-D (channels, samples), got shape {values.shape}")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        self.values = values
        ids = list(self.channel_ids) or [f"f{i + 1}" for i in range(values.shape[0])]
        if len(ids) != values.shape[0]:
            raise ValueError(f"{len(ids)} channel ids for {values.shape[0]} channels")
        if len(set(ids)) != len(ids):
            raise ValueError("channel ids must be unique")
        self.channel_ids = [str(c) for c in ids]

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_samples) / self.sample_rate

    def copy(self) -> "SignalMatrix":
        return SignalMatrix(self.values.copy(), self.sample_rate, list(self.channel_ids), self.t0)

    def take(self, order: Sequence[int]) -> "SignalMatrix":
        """Channels reordered (or subset) by index."""
        order = list(order)
        return SignalMatrix(
            self.values[order].copy(), self.sample_rate, [self.channel_ids[i] for i in order], self.t0
        )
