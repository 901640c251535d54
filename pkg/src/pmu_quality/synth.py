"""
Synthetic regional PMU frequency signals with labelled anomalies.

Clean channels are a shared superposition of lightly damped inter-area
modes (0.2-1.0 Hz) with per-channel participation factors, an optional
common frequency event, and independent white measurement noise. Three
anomaly kinds can be injected on top: random spikes, repeated (stuck)
data and false data injection, the last applied over the same sample
range in every target channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from pmu_quality.signals import SignalMatrix

ANOMALY_KINDS = ("spike", "repeated", "fdi")


@dataclass(frozen=True)
class Mode:
    """One electromechanical mode shared by all channels.

    ``damping`` is the exponential decay rate in 1/s. ``participation``
    fixes the per-channel factors; when omitted they are drawn uniformly
    from ``1 +/- ScenarioSpec.participation_spread``.
    """

    freq_hz: float
    amplitude: float
    damping: float = 0.0
    phase: float | None = None
    participation: tuple[float, ...] | None = None


@dataclass(frozen=True)
class EventProfile:
    """Common frequency decline and partial recovery.

    The frequency falls smoothly by ``depth_hz`` over ``decline_s``, then
    recovers over ``recovery_s`` to ``settle_fraction * depth_hz`` below
    nominal, and stays there.
    """

    start_s: float = 20.0
    depth_hz: float = 0.05
    decline_s: float = 5.0
    recovery_s: float = 10.0
    settle_fraction: float = 0.5

    def profile(self, t: np.ndarray) -> np.ndarray:
        out = np.zeros_like(t)
        t1 = self.start_s + self.decline_s
        t2 = t1 + self.recovery_s
        fall = (t >= self.start_s) & (t < t1)
        u = (t[fall] - self.start_s) / self.decline_s
        out[fall] = -self.depth_hz * 0.5 * (1 - np.cos(np.pi * u))
        rise = (t >= t1) & (t < t2)
        u = (t[rise] - t1) / self.recovery_s
        settle = self.settle_fraction * self.depth_hz
        out[rise] = -self.depth_hz + (self.depth_hz - settle) * 0.5 * (1 - np.cos(np.pi * u))
        out[t >= t2] = -settle
        return out


def default_modes() -> tuple[Mode, ...]:
    return (
        Mode(freq_hz=0.25, amplitude=0.010, damping=0.01),
        Mode(freq_hz=0.55, amplitude=0.006, damping=0.02),
        Mode(freq_hz=0.85, amplitude=0.003, damping=0.02),
    )


@dataclass(frozen=True)
class ScenarioSpec:
    n_channels: int = 20
    duration_s: float = 60.0
    sample_rate_hz: float = 60.0
    nominal_hz: float = 60.0
    modes: tuple[Mode, ...] = field(default_factory=default_modes)
    participation_spread: float = 0.1
    noise_std: float | Sequence[float] = 1e-4
    event: EventProfile | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_channels < 1:
            raise ValueError("n_channels must be >= 1")
        if not (self.duration_s > 0 and self.sample_rate_hz > 0):
            raise ValueError("duration_s and sample_rate_hz must be positive")
        nyquist = self.sample_rate_hz / 2.0
        for mode in self.modes:
            if not 0 < mode.freq_hz < nyquist:
                raise ValueError(f"mode frequency {mode.freq_hz} Hz outside (0, {nyquist}) Hz")
            if mode.participation is not None and len(mode.participation) != self.n_channels:
                raise ValueError("mode participation needs one factor per channel")
        if not 0 <= self.participation_spread < 1:
            raise ValueError("participation_spread must be in [0, 1)")
        noise = np.broadcast_to(np.asarray(self.noise_std, dtype=float), (self.n_channels,))
        if np.any(noise < 0):
            raise ValueError("noise_std must be non-negative")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))


@dataclass
class GroundTruth:
    spec: ScenarioSpec
    participation: np.ndarray  # (N, n_modes)
    clean: np.ndarray  # (N, S) before noise


def generate(spec: ScenarioSpec) -> tuple[SignalMatrix, GroundTruth]:
    """Clean multi-channel frequency signals for one scenario.

    Deterministic for a fixed ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    n, s = spec.n_channels, spec.n_samples
    t = np.arange(s) / spec.sample_rate_hz

    part = np.empty((n, len(spec.modes)))
    clean = np.full((n, s), spec.nominal_hz, dtype=np.float64)
    for m, mode in enumerate(spec.modes):
        if mode.participation is not None:
            part[:, m] = mode.participation
        else:
            spread = spec.participation_spread
            part[:, m] = rng.uniform(1 - spread, 1 + spread, size=n)
        phase = rng.uniform(-np.pi, np.pi) if mode.phase is None else mode.phase
        wave = mode.amplitude * np.exp(-mode.damping * t) * np.cos(2 * np.pi * mode.freq_hz * t + phase)
        clean += part[:, m, None] * wave[None, :]
    if spec.event is not None:
        clean += spec.event.profile(t)[None, :]

    noise_std = np.broadcast_to(np.asarray(spec.noise_std, dtype=float), (n,))
    values = clean + noise_std[:, None] * rng.standard_normal((n, s))
    matrix = SignalMatrix(values, spec.sample_rate_hz)
    return matrix, GroundTruth(spec, part, clean)


@dataclass(frozen=True)
class AnomalySpec:
    """One injection.

    Attributes:
        kind: ``spike``, ``repeated`` or ``fdi``.
        channels: Target channel indices.
        start: First affected sample.
        length: Span in samples. For spikes this is the span the spike
            positions are drawn from.
        magnitude: Fixed value or ``(low, high)`` for a uniform draw per
            channel (per spike for ``spike``). Ignored for ``repeated``.
        relative_to_sigma: Scale magnitudes by the population std of the
            ``sigma_window`` samples centred on the injection, per channel.
        n_spikes: Number of spikes per channel.
        shape: ``bias`` (constant offset) or ``ramp`` (0 to magnitude) for fdi.
        random_sign: Flip each drawn magnitude's sign with probability 1/2.
        seed: RNG seed for magnitudes and spike positions.
    """

    kind: str
    channels: tuple[int, ...]
    start: int
    length: int = 10
    magnitude: float | tuple[float, float] = 1.0
    relative_to_sigma: bool = False
    sigma_window: int = 80
    n_spikes: int = 1
    shape: str = "bias"
    random_sign: bool = False
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind {self.kind!r}; expected one of {ANOMALY_KINDS}")
        if not self.channels:
            raise ValueError("anomaly needs at least one target channel")
        if self.length < 1 or self.start < 0:
            raise ValueError("anomaly needs start >= 0 and length >= 1")
        if self.shape not in ("bias", "ramp"):
            raise ValueError(f"unknown fdi shape {self.shape!r}")
        if self.kind == "spike" and not 1 <= self.n_spikes <= self.length:
            raise ValueError("n_spikes must be between 1 and length")


def _draw(rng: np.random.Generator, magnitude, size: int) -> np.ndarray:
    if isinstance(magnitude, (tuple, list)):
        lo, hi = magnitude
        return rng.uniform(lo, hi, size=size)
    return np.full(size, float(magnitude))


def _local_sigma(row: np.ndarray, start: int, length: int, width: int) -> float:
    centre = start + length // 2
    lo = max(0, min(centre - width // 2, row.size - width))
    return float(np.std(row[lo:lo + width]))


def inject(
    matrix: SignalMatrix, anomaly: AnomalySpec, labels: np.ndarray | None = None
) -> tuple[SignalMatrix, np.ndarray]:
    """Apply one anomaly to a copy of ``matrix``.

    Returns:
        The modified matrix and the cumulative ``(N, S)`` boolean label mask
        (``labels`` from earlier injections, if given, plus this one).

    Raises:
        ValueError: if the interval leaves the signal or overlaps an earlier
            injection on the same channel.
    """
    n, s = matrix.values.shape
    if anomaly.start + anomaly.length > s:
        raise ValueError(
            f"injection [{anomaly.start}, {anomaly.start + anomaly.length}) exceeds {s} samples"
        )
    if any(not 0 <= c < n for c in anomaly.channels):
        raise ValueError(f"target channels {anomaly.channels} out of range for {n} channels")
    labels = np.zeros((n, s), dtype=bool) if labels is None else labels.copy()
    span = slice(anomaly.start, anomaly.start + anomaly.length)
    for c in anomaly.channels:
        if labels[c, span].any():
            raise ValueError(f"injection overlaps an earlier one on channel {c}")

    rng = np.random.default_rng(anomaly.seed)
    out = matrix.copy()
    vals = out.values
    for c in anomaly.channels:
        row = vals[c]
        scale = (
            _local_sigma(matrix.values[c], anomaly.start, anomaly.length, anomaly.sigma_window)
            if anomaly.relative_to_sigma
            else 1.0
        )
        if anomaly.kind == "spike":
            pos = anomaly.start + np.sort(rng.choice(anomaly.length, anomaly.n_spikes, replace=False))
            mags = _draw(rng, anomaly.magnitude, anomaly.n_spikes) * scale
            if anomaly.random_sign:
                mags *= rng.choice([-1.0, 1.0], size=mags.size)
            row[pos] += mags
            labels[c, pos] = True
        elif anomaly.kind == "repeated":
            held = row[anomaly.start - 1] if anomaly.start > 0 else row[0]
            row[span] = held
            labels[c, span] = True
        else:
            mag = _draw(rng, anomaly.magnitude, 1)[0] * scale
            if anomaly.random_sign:
                mag *= rng.choice([-1.0, 1.0])
            if anomaly.shape == "bias":
                row[span] += mag
            else:
                row[span] += mag * np.arange(1, anomaly.length + 1) / anomaly.length
            labels[c, span] = True
    return out, labels


def equal_sigma_pair(
    length: int = 80,
    sample_rate: float = 60.0,
    bins_a: Sequence[int] = (1, 2, 3),
    bins_b: Sequence[int] = (4, 5, 6),
    amplitude: float = 0.01,
    shared_noise: float = 0.0005,
    rel_sigma_gap: float = 1e-6,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Two windows with (almost) equal std but disjoint dominant DFT bins.

    Both share a small common noise component; window ``a`` adds tones on
    ``bins_a`` and window ``b`` tones on ``bins_b``. The tone amplitude of
    ``b`` is solved so the two population stds differ by ``rel_sigma_gap``.
    """
    if set(bins_a) & set(bins_b):
        raise ValueError("dominant bins must be disjoint")
    rng = np.random.default_rng(seed)
    k = np.arange(length)
    common = shared_noise * rng.standard_normal(length)

    def tones(bins):
        ph = rng.uniform(-np.pi, np.pi, size=len(bins))
        return sum(np.cos(2 * np.pi * b * k / length + p) for b, p in zip(bins, ph))

    ta, tb = tones(bins_a), tones(bins_b)
    a = 60.0 + common + amplitude * ta
    target = np.std(a) * (1 + rel_sigma_gap)
    # var(common + x * tb) = x^2 var(tb) + 2x cov + var(common); solve for x.
    c0 = common - common.mean()
    t0 = tb - tb.mean()
    qa, qb, qc = np.mean(t0 * t0), 2 * np.mean(c0 * t0), np.mean(c0 * c0) - target**2
    x = (-qb + math.sqrt(qb * qb - 4 * qa * qc)) / (2 * qa)
    b = 60.0 + common + x * tb
    return a, b


def scenario(name: str, seed: int = 0, **overrides) -> tuple[SignalMatrix, np.ndarray, ScenarioSpec]:
    """Ready-made labelled scenarios.

    ``normal``   22 channels, normal condition, channel f10 with spikes and
                 a repeated-data segment.
    ``event``    20 clean channels through a frequency event.
    ``fdi``      20 channels through an event, 10-sample false data injection
                 on f1-f4 over the same interval.

    Returns:
        (matrix, label mask, spec)
    """
    rng = np.random.default_rng([seed, 7])
    if name == "normal":
        spec = replace(ScenarioSpec(n_channels=22, duration_s=60.0, seed=seed), **overrides)
        matrix, _ = generate(spec)
        labels = None
        spikes = AnomalySpec(
            "spike", (9,), start=300, length=900, n_spikes=6, magnitude=(0.2, 0.5),
            random_sign=True, seed=int(rng.integers(2**31)),
        )
        matrix, labels = inject(matrix, spikes, labels)
        repeated = AnomalySpec("repeated", (9,), start=1800, length=600)
        matrix, labels = inject(matrix, repeated, labels)
        return matrix, labels, spec
    if name == "event":
        spec = replace(
            ScenarioSpec(n_channels=20, duration_s=60.0, event=EventProfile(), seed=seed), **overrides
        )
        matrix, _ = generate(spec)
        return matrix, np.zeros(matrix.values.shape, dtype=bool), spec
    if name == "fdi":
        spec = replace(
            ScenarioSpec(n_channels=20, duration_s=40.0, event=EventProfile(start_s=10.0), seed=seed),
            **overrides,
        )
        matrix, _ = generate(spec)
        fdi = AnomalySpec(
            "fdi", (0, 1, 2, 3), start=int(18 * spec.sample_rate_hz), length=10,
            magnitude=(3.0, 4.0), relative_to_sigma=True, seed=int(rng.integers(2**31)),
        )
        matrix, labels = inject(matrix, fdi)
        return matrix, labels, spec
    raise ValueError(f"unknown scenario {name!r}; expected normal, event or fdi")


@dataclass
class MonteCarloSummary:
    trials: int
    mean_proposed: float
    mean_lof: float
    n_targets: int
    per_trial: list[dict]

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "n_targets": self.n_targets,
            "mean_identified": {"proposed": self.mean_proposed, "lof": self.mean_lof},
            "per_trial": self.per_trial,
        }


def identified_channels(flags: np.ndarray, labels: np.ndarray, targets: Sequence[int]) -> list[int]:
    """Targets with at least one flagged sample inside their injected interval."""
    return [int(c) for c in targets if bool((flags[c] & labels[c]).any())]


def monte_carlo_compare(
    spec: ScenarioSpec,
    anomaly: AnomalySpec,
    trials: int,
    det_cfg=None,
    lof_cfg=None,
    seed: int = 0,
    start_range: tuple[int, int] | None = None,
) -> MonteCarloSummary:
    """Repeat inject-and-detect with both approaches and count identified targets.

    Each trial draws its own clean scenario and injection magnitudes from an
    RNG stream derived from ``(seed, trial)``. When ``start_range`` is given
    the injection start is drawn uniformly from it (inclusive bounds).
    """
    from pmu_quality.detector import DetectorConfig, run_stream
    from pmu_quality.lof import LofConfig, run_lof

    if trials < 1:
        raise ValueError("trials must be >= 1")
    det_cfg = det_cfg or DetectorConfig(sample_rate_hz=spec.sample_rate_hz)
    lof_cfg = lof_cfg or LofConfig(sample_rate_hz=spec.sample_rate_hz)

    rows = []
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        trial_spec = replace(spec, seed=int(rng.integers(2**63)))
        start = anomaly.start if start_range is None else int(rng.integers(start_range[0], start_range[1] + 1))
        trial_anomaly = replace(anomaly, start=start, seed=int(rng.integers(2**63)))
        clean, _ = generate(trial_spec)
        matrix, labels = inject(clean, trial_anomaly)
        proposed = identified_channels(run_stream(matrix, det_cfg).flags, labels, anomaly.channels)
        baseline = identified_channels(run_lof(matrix, lof_cfg).flags, labels, anomaly.channels)
        rows.append(
            {"trial": trial, "start": start, "proposed": proposed, "lof": baseline}
        )
    return MonteCarloSummary(
        trials=trials,
        mean_proposed=float(np.mean([len(r["proposed"]) for r in rows])),
        mean_lof=float(np.mean([len(r["lof"]) for r in rows])),
        n_targets=len(anomaly.channels),
        per_trial=rows,
    )


def fdi_comparison_setup(
    magnitude=(1.0, 4.0), n_channels: int = 20, duration_s: float = 20.0, sample_rate_hz: float = 60.0
) -> tuple[ScenarioSpec, AnomalySpec, tuple[int, int]]:
    """Monte-Carlo setup: event data with a 10-sample FDI on 4 channels.

    Magnitudes are relative to the clean 80-sample std around the injection.
    """
    spec = ScenarioSpec(
        n_channels=n_channels, duration_s=duration_s, sample_rate_hz=sample_rate_hz,
        event=EventProfile(start_s=duration_s * 0.25),
    )
    anomaly = AnomalySpec(
        "fdi", (0, 1, 2, 3), start=0, length=10, magnitude=magnitude, relative_to_sigma=True
    )
    n = spec.n_samples
    return spec, anomaly, (int(0.3 * n), int(0.7 * n))
