"""
Time- and frequency-domain similarity indices between PMU signal windows.

Three indices compare two equal-length windows of regional PMU signals:

    I_dcs  dynamic change similarity   exp(1 - max(s_i/s_j, s_j/s_i))
    I_fms  frequency magnitude similarity, band mean of 1 - tanh(|20 log10 |H|| / lambda)
    I_fps  frequency phase similarity,     band mean of 1 - tanh(|angle H| / (2 pi eps))

where H(f) = M_j(f) / M_i(f) is the empirical frequency response from
window i to window j. Their weighted sum is the pair similarity, and the
mean pair similarity of a channel against all of its peers is the
channel's similarity degree.

Everything here is a pure function of its inputs; the vectorised
``batch_similarity_degree`` is what the detector uses on every window
position, the scalar functions are the reference path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "SimilarityConfig",
    "WindowView",
    "Spectrum",
    "BandProfile",
    "PairIndices",
    "std_dev",
    "dynamic_change_similarity",
    "spectrum",
    "band_mask",
    "magnitude_distance_profile",
    "frequency_magnitude_similarity",
    "phase_distance_profile",
    "frequency_phase_similarity",
    "pair_similarity",
    "similarity_degree",
    "batch_similarity_degree",
]

# One-sided empty bin: |20 log10 |H|| is clamped to this many dB.
CLAMP_DB = 300.0
# Bins below this fraction of the pair's largest bin magnitude count as empty.
EMPTY_BIN_RTOL = 1e-12
WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class SimilarityConfig:
    """Parameters of the similarity indices.

    Attributes:
        lam: Magnitude sensitivity (dB scale divisor), > 0.
        epsilon: Phase sensitivity, > 0.
        w_dcs, w_fms, w_fps: Index weights; non-negative and summing to 1.
        band_low_hz, band_high_hz: Analysis band. A bin at f is kept when
            ``band_low_hz < f <= band_high_hz``; with ``include_dc`` the lower
            bound is inclusive, so the DC bin is kept for a zero lower bound.
        include_dc: Keep the lower band edge (and DC) in the analysis band.
    """

    lam: float = 10.0
    epsilon: float = 0.5
    w_dcs: float = 0.3
    w_fms: float = 0.35
    w_fps: float = 0.35
    band_low_hz: float = 0.0
    band_high_hz: float = 5.0
    include_dc: bool = False

    def __post_init__(self) -> None:
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be a positive finite number, got {self.lam}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be a positive finite number, got {self.epsilon}")
        weights = (self.w_dcs, self.w_fms, self.w_fps)
        if any(w < 0 for w in weights):
            raise ValueError(f"weights must be non-negative, got {weights}")
        if abs(sum(weights) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {weights} (sum {sum(weights)!r})")
        if not (0.0 <= self.band_low_hz < self.band_high_hz):
            raise ValueError(
                f"band must satisfy 0 <= low < high, got ({self.band_low_hz}, {self.band_high_hz})"
            )

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.w_dcs, self.w_fms, self.w_fps)


@dataclass(frozen=True)
class WindowView:
    """One channel's samples within one window position."""

    samples: np.ndarray
    sample_rate: float
    channel_id: object = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError(f"window samples must be one-dimensional, got shape {arr.shape}")
        if arr.size < 2:
            raise ValueError(f"window needs at least 2 samples, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"window {self.channel_id!r} contains non-finite samples")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size


class Spectrum(NamedTuple):
    """Single-sided DFT of a window: bins 0 .. L//2."""

    freqs_hz: np.ndarray
    magnitude: np.ndarray
    phase: np.ndarray
    sample_rate: float


class BandProfile(NamedTuple):
    """Per-bin distance map over the analysis band."""

    freqs_hz: np.ndarray
    values: np.ndarray


class PairIndices(NamedTuple):
    i_dcs: float
    i_fms: float
    i_fps: float
    i_sd: float


def _as_window(w, sample_rate: float | None = None) -> WindowView:
    if isinstance(w, WindowView):
        return w
    return WindowView(np.asarray(w, dtype=np.float64), 1.0 if sample_rate is None else sample_rate)


def _check_pair(w_i: WindowView, w_j: WindowView) -> None:
    if len(w_i) != len(w_j):
        raise ValueError(f"windows differ in length: {len(w_i)} vs {len(w_j)}")
    if w_i.sample_rate != w_j.sample_rate:
        raise ValueError(f"windows differ in sample rate: {w_i.sample_rate} vs {w_j.sample_rate}")


def wrap_phase(phi):
    """Wrap angles to (-pi, pi]."""
    phi = np.asarray(phi, dtype=np.float64)
    wrapped = np.pi - np.mod(np.pi - phi, 2.0 * np.pi)
    return np.where((phi > np.pi) | (phi <= -np.pi), wrapped, phi)


def std_dev(w: WindowView) -> float:
    """Population standard deviation of the window samples.

    A window whose samples are all equal returns exactly 0, so repeated
    (stuck) data is recognised even when the mean is not representable.
    """
    x = _as_window(w).samples
    if np.all(x == x[0]):
        return 0.0
    return float(np.std(x))


def _dcs_from_sigmas(sigma_i, sigma_j):
    """Vectorised I_dcs with the zero-sigma rule (both 0 -> 1, one 0 -> 0)."""
    sigma_i = np.asarray(sigma_i, dtype=np.float64)
    sigma_j = np.asarray(sigma_j, dtype=np.float64)
    hi = np.maximum(sigma_i, sigma_j)
    lo = np.minimum(sigma_i, sigma_j)
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = hi / lo
        out = np.exp(1.0 - gamma)
    out = np.where(lo == 0, 0.0, out)
    return np.where(hi == 0, 1.0, out)


def dynamic_change_similarity(w_i: WindowView, w_j: WindowView, cfg: SimilarityConfig | None = None) -> float:
    """I_dcs = exp(1 - gamma), gamma the larger of the two sigma ratios.

    Both windows constant gives 1; exactly one constant gives 0, the
    gamma -> infinity limit.
    """
    w_i, w_j = _as_window(w_i), _as_window(w_j)
    _check_pair(w_i, w_j)
    return float(_dcs_from_sigmas(std_dev(w_i), std_dev(w_j)))


def spectrum(w: WindowView) -> Spectrum:
    """Single-sided DFT of the raw window (no detrend, no taper)."""
    w = _as_window(w)
    coeffs = np.fft.rfft(w.samples)
    freqs = np.fft.rfftfreq(len(w), d=1.0 / w.sample_rate)
    return Spectrum(freqs, np.abs(coeffs), wrap_phase(np.angle(coeffs)), w.sample_rate)


def band_mask(freqs_hz: np.ndarray, cfg: SimilarityConfig, sample_rate: float) -> np.ndarray:
    """Boolean mask of the bins retained by the analysis band.

    Raises:
        ValueError: if the band exceeds Nyquist or keeps no bins.
    """
    if cfg.band_high_hz > sample_rate / 2.0:
        raise ValueError(
            f"band upper edge {cfg.band_high_hz} Hz exceeds Nyquist {sample_rate / 2.0} Hz"
        )
    freqs_hz = np.asarray(freqs_hz)
    if cfg.include_dc:
        mask = (freqs_hz >= cfg.band_low_hz) & (freqs_hz <= cfg.band_high_hz)
    else:
        mask = (freqs_hz > cfg.band_low_hz) & (freqs_hz <= cfg.band_high_hz)
    if not mask.any():
        raise ValueError(
            f"no DFT bins fall in band ({cfg.band_low_hz}, {cfg.band_high_hz}] Hz "
            f"at resolution {freqs_hz[1] - freqs_hz[0] if freqs_hz.size > 1 else float('nan')} Hz"
        )
    return mask


def _empty_threshold(mag_i: np.ndarray, mag_j: np.ndarray) -> np.ndarray:
    # Largest bin over the whole spectrum of either window, DC included.
    peak = np.maximum(mag_i.max(axis=-1), mag_j.max(axis=-1))
    return EMPTY_BIN_RTOL * peak


def _magnitude_map(mag_i, mag_j, lam, delta):
    """S(f) per bin with the empty-bin rule; delta broadcast over bins."""
    delta = np.asarray(delta)[..., None]
    empty_i = mag_i <= delta
    empty_j = mag_j <= delta
    with np.errstate(divide="ignore", invalid="ignore"):
        db = np.abs(20.0 * np.log10(mag_j / mag_i))
    db = np.where(empty_i ^ empty_j, CLAMP_DB, db)
    s = 1.0 - np.tanh(db / lam)
    return np.where(empty_i & empty_j, 1.0, s)


def _phase_map(phase_i, phase_j, mag_i, mag_j, eps, delta):
    delta = np.asarray(delta)[..., None]
    both_empty = (mag_i <= delta) & (mag_j <= delta)
    phi = np.abs(wrap_phase(phase_j - phase_i))
    a = 1.0 - np.tanh(phi / (2.0 * np.pi * eps))
    return np.where(both_empty, 1.0, a)


def _check_spectra(s_i: Spectrum, s_j: Spectrum) -> None:
    if s_i.sample_rate != s_j.sample_rate or not np.array_equal(s_i.freqs_hz, s_j.freqs_hz):
        raise ValueError("spectra come from windows of different length or sample rate")


def magnitude_distance_profile(s_i: Spectrum, s_j: Spectrum, cfg: SimilarityConfig) -> BandProfile:
    """S(f) = 1 - tanh(|20 log10 |H(f)|| / lambda) over the analysis band."""
    _check_spectra(s_i, s_j)
    mask = band_mask(s_i.freqs_hz, cfg, s_i.sample_rate)
    delta = _empty_threshold(s_i.magnitude, s_j.magnitude)
    s = _magnitude_map(s_i.magnitude, s_j.magnitude, cfg.lam, delta)
    return BandProfile(s_i.freqs_hz[mask], s[mask])


def phase_distance_profile(s_i: Spectrum, s_j: Spectrum, cfg: SimilarityConfig) -> BandProfile:
    """A(f) = 1 - tanh(|phi(f)| / (2 pi epsilon)), phi the wrapped phase of H."""
    _check_spectra(s_i, s_j)
    mask = band_mask(s_i.freqs_hz, cfg, s_i.sample_rate)
    delta = _empty_threshold(s_i.magnitude, s_j.magnitude)
    a = _phase_map(s_i.phase, s_j.phase, s_i.magnitude, s_j.magnitude, cfg.epsilon, delta)
    return BandProfile(s_i.freqs_hz[mask], a[mask])


def _profile_mean(profile) -> float:
    values = profile.values if isinstance(profile, BandProfile) else np.asarray(profile, dtype=np.float64)
    if values.size == 0:
        raise ValueError("profile is empty: the analysis band retained no bins")
    return float(np.mean(values))


def frequency_magnitude_similarity(profile: BandProfile | Sequence[float]) -> float:
    """Mean of S(f) over the retained bins."""
    return _profile_mean(profile)


def frequency_phase_similarity(profile: BandProfile | Sequence[float]) -> float:
    """Mean of A(f) over the retained bins."""
    return _profile_mean(profile)


def pair_similarity(w_i: WindowView, w_j: WindowView, cfg: SimilarityConfig | None = None) -> PairIndices:
    """All three indices for one pair and their weighted sum."""
    cfg = cfg or SimilarityConfig()
    w_i, w_j = _as_window(w_i), _as_window(w_j)
    _check_pair(w_i, w_j)
    band_mask(np.fft.rfftfreq(len(w_i), d=1.0 / w_i.sample_rate), cfg, w_i.sample_rate)
    i_dcs = dynamic_change_similarity(w_i, w_j, cfg)
    s_i, s_j = spectrum(w_i), spectrum(w_j)
    i_fms = frequency_magnitude_similarity(magnitude_distance_profile(s_i, s_j, cfg))
    i_fps = frequency_phase_similarity(phase_distance_profile(s_i, s_j, cfg))
    i_sd = cfg.w_dcs * i_dcs + cfg.w_fms * i_fms + cfg.w_fps * i_fps
    return PairIndices(i_dcs, i_fms, i_fps, i_sd)


def similarity_degree(windows: Sequence[WindowView], i: int, cfg: SimilarityConfig | None = None) -> float:
    """Mean pair similarity of channel ``i`` against every other channel."""
    cfg = cfg or SimilarityConfig()
    n = len(windows)
    if n < 2:
        raise ValueError(f"similarity degree needs at least 2 channels, got {n}")
    if not 0 <= i < n:
        raise IndexError(f"channel index {i} out of range for {n} channels")
    total = 0.0
    for j in range(n):
        if j != i:
            total += pair_similarity(windows[i], windows[j], cfg).i_sd
    return total / (n - 1)


def batch_similarity_degree(
    segments: np.ndarray, sample_rate: float, cfg: SimilarityConfig
) -> np.ndarray:
    """Similarity degree of every channel for a stack of window positions.

    Args:
        segments: Array of shape ``(W, N, L)``: W window positions, N channels,
            L samples per window.
        sample_rate: Samples per second.
        cfg: Similarity parameters.

    Returns:
        Array of shape ``(W, N)`` with the similarity degree of each channel at
        each position. Agrees with ``similarity_degree`` to rounding error.
    """
    segments = np.asarray(segments, dtype=np.float64)
    if segments.ndim != 3:
        raise ValueError(f"segments must have shape (W, N, L), got {segments.shape}")
    n_pos, n_ch, length = segments.shape
    if n_ch < 2:
        raise ValueError(f"similarity degree needs at least 2 channels, got {n_ch}")
    if length < 2:
        raise ValueError(f"window needs at least 2 samples, got {length}")
    if not np.all(np.isfinite(segments)):
        raise ValueError("segments contain non-finite samples")

    mask = band_mask(np.fft.rfftfreq(length, d=1.0 / sample_rate), cfg, sample_rate)
    if n_pos == 0:
        return np.empty((0, n_ch))

    constant = np.all(segments == segments[..., :1], axis=-1)
    sigma = np.where(constant, 0.0, np.std(segments, axis=-1))
    coeffs = np.fft.rfft(segments, axis=-1)
    mag = np.abs(coeffs)
    peak = mag.max(axis=-1)  # (W, N)
    mag_b = mag[..., mask]
    phase_b = wrap_phase(np.angle(coeffs[..., mask]))

    # Each index is swap-symmetric, so only pairs i < j are scored.
    ii, jj = np.triu_indices(n_ch, k=1)
    mi, mj = mag_b[:, ii], mag_b[:, jj]  # (W, P, m)
    delta = EMPTY_BIN_RTOL * np.maximum(peak[:, ii], peak[:, jj])[..., None]
    empty_i, empty_j = mi <= delta, mj <= delta
    any_empty = bool(empty_i.any() or empty_j.any())

    with np.errstate(divide="ignore", invalid="ignore"):
        log_mag = np.log10(mag_b)
        db = 20.0 * np.abs(log_mag[:, jj] - log_mag[:, ii])
    if any_empty:
        db = np.where(empty_i ^ empty_j, CLAMP_DB, db)
    s_map = 1.0 - np.tanh(db / cfg.lam)

    d = phase_b[:, jj] - phase_b[:, ii]  # in [-2pi, 2pi]
    d = np.abs(np.where(d > np.pi, d - 2 * np.pi, np.where(d <= -np.pi, d + 2 * np.pi, d)))
    a_map = 1.0 - np.tanh(d / (2.0 * np.pi * cfg.epsilon))
    if any_empty:
        both = empty_i & empty_j
        s_map = np.where(both, 1.0, s_map)
        a_map = np.where(both, 1.0, a_map)

    dcs = _dcs_from_sigmas(sigma[:, ii], sigma[:, jj])
    pair_sd = cfg.w_dcs * dcs + cfg.w_fms * s_map.mean(axis=-1) + cfg.w_fps * a_map.mean(axis=-1)

    incidence = np.zeros((ii.size, n_ch))
    incidence[np.arange(ii.size), ii] = 1.0
    incidence[np.arange(ii.size), jj] = 1.0
    return (pair_sd @ incidence) / (n_ch - 1)
