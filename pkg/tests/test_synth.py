import numpy as np
import pytest

from pmu_quality.detector import run_stream
from pmu_quality.synth import (
    AnomalySpec,
    EventProfile,
    Mode,
    ScenarioSpec,
    equal_sigma_pair,
    fdi_comparison_setup,
    generate,
    inject,
    monte_carlo_compare,
    scenario,
)


def test_zero_noise_equal_participation_identical_channels():
    spec = ScenarioSpec(n_channels=5, duration_s=5.0, noise_std=0.0,
                        modes=(Mode(0.5, 0.01, participation=(1.0,) * 5),))
    m, _ = generate(spec)
    assert np.all(m.values == m.values[0])


def test_generate_deterministic():
    spec = ScenarioSpec(n_channels=6, duration_s=4.0, event=EventProfile(start_s=1.0), seed=42)
    a, _ = generate(spec)
    b, _ = generate(spec)
    assert np.array_equal(a.values, b.values)
    c, _ = generate(ScenarioSpec(n_channels=6, duration_s=4.0, event=EventProfile(start_s=1.0), seed=43))
    assert not np.array_equal(a.values, c.values)


@pytest.mark.parametrize("event", [None, EventProfile()])
def test_clean_channels_correlated(event):
    m, _ = generate(ScenarioSpec(event=event, seed=1))
    corr = np.corrcoef(m.values)
    assert corr[np.triu_indices(m.n_channels, 1)].min() > 0.9


def test_invalid_mode_frequency_rejected():
    with pytest.raises(ValueError, match="mode frequency"):
        ScenarioSpec(modes=(Mode(40.0, 0.01),))


def test_event_profile_shape():
    ev = EventProfile(start_s=1.0, depth_hz=0.05, decline_s=2.0, recovery_s=2.0, settle_fraction=0.4)
    t = np.array([0.0, 1.0, 3.0, 5.0, 9.0])
    out = ev.profile(t)
    assert out[0] == 0.0 and out[1] == 0.0
    assert out[2] == pytest.approx(-0.05)
    assert out[3] == pytest.approx(-0.02) and out[4] == pytest.approx(-0.02)


@pytest.fixture(scope="module")
def base():
    m, _ = generate(ScenarioSpec(n_channels=6, duration_s=10.0, seed=3))
    return m


def test_zero_magnitude_fdi_keeps_data(base):
    m, labels = inject(base, AnomalySpec("fdi", (1, 2), start=100, length=10, magnitude=0.0))
    assert np.array_equal(m.values, base.values)
    assert labels.sum() == 20


def test_repeated_segment_is_constant(base):
    m, labels = inject(base, AnomalySpec("repeated", (3,), start=200, length=90))
    seg = m.values[3, 200:290]
    assert np.all(seg == base.values[3, 199])
    assert labels[3].sum() == 90 and labels.sum() == 90


def test_fdi_same_range_all_targets(base):
    m, labels = inject(base, AnomalySpec("fdi", (0, 2, 4), start=300, length=10,
                                         magnitude=(1.0, 4.0), relative_to_sigma=True, seed=1))
    diff = m.values - base.values
    for c in (0, 2, 4):
        assert np.flatnonzero(labels[c]).tolist() == list(range(300, 310))
        assert np.all(diff[c, 300:310] == diff[c, 300]) and diff[c, 300] > 0
        sigma = np.std(base.values[c, 265:345])
        assert sigma <= diff[c, 300] <= 4 * sigma
    assert not diff[[1, 3, 5]].any()


def test_fdi_ramp(base):
    m, _ = inject(base, AnomalySpec("fdi", (0,), start=50, length=10, magnitude=1.0, shape="ramp"))
    assert np.allclose(m.values[0, 50:60] - base.values[0, 50:60], np.arange(1, 11) / 10)


def test_spikes_single_samples(base):
    m, labels = inject(base, AnomalySpec("spike", (1,), start=0, length=200, n_spikes=5, magnitude=0.3, seed=2))
    changed = np.flatnonzero(m.values[1] != base.values[1])
    assert changed.size == 5 and np.array_equal(changed, np.flatnonzero(labels[1]))


def test_overlap_rejected(base):
    _, labels = inject(base, AnomalySpec("fdi", (1,), start=100, length=10))
    with pytest.raises(ValueError, match="overlaps"):
        inject(base, AnomalySpec("repeated", (1,), start=105, length=10), labels)
    inject(base, AnomalySpec("repeated", (2,), start=105, length=10), labels)


def test_out_of_bounds_rejected(base):
    with pytest.raises(ValueError):
        inject(base, AnomalySpec("fdi", (1,), start=base.n_samples - 5, length=10))
    with pytest.raises(ValueError):
        AnomalySpec("noise", (1,), start=0)


def test_injection_deterministic(base):
    spec = AnomalySpec("spike", (0, 1), start=0, length=300, n_spikes=4, magnitude=(0.1, 0.2), seed=9)
    a, _ = inject(base, spec)
    b, _ = inject(base, spec)
    assert np.array_equal(a.values, b.values)


def test_equal_sigma_pair():
    a, b = equal_sigma_pair()
    assert abs(np.std(a) / np.std(b) - 1) < 1e-4
    fa, fb = np.abs(np.fft.rfft(a))[1:], np.abs(np.fft.rfft(b))[1:]
    assert set(np.argsort(fa)[-3:] + 1) == {1, 2, 3}
    assert set(np.argsort(fb)[-3:] + 1) == {4, 5, 6}


@pytest.mark.parametrize("seed", range(5))
def test_clean_event_scenario_no_flags(seed):
    m, labels, _ = scenario("event", seed=seed)
    assert not labels.any()
    assert run_stream(m).n_flagged == 0


def test_monte_carlo_single_trial_reproducible():
    spec, anomaly, rng_range = fdi_comparison_setup(duration_s=8.0)
    a = monte_carlo_compare(spec, anomaly, 1, seed=5, start_range=rng_range)
    b = monte_carlo_compare(spec, anomaly, 1, seed=5, start_range=rng_range)
    assert a.to_dict() == b.to_dict()
    assert a.trials == 1 and a.n_targets == 4


def test_monte_carlo_rejects_zero_trials():
    spec, anomaly, _ = fdi_comparison_setup()
    with pytest.raises(ValueError):
        monte_carlo_compare(spec, anomaly, 0)


def test_monte_carlo_single_channel_saturating_fdi_found():
    # one target among clean peers: a huge 10-sample bias is always identified
    spec, anomaly, rng_range = fdi_comparison_setup(magnitude=1e3, duration_s=8.0)
    from dataclasses import replace
    res = monte_carlo_compare(spec, replace(anomaly, channels=(0,)), 3, seed=1, start_range=rng_range)
    assert res.mean_proposed == 1.0


@pytest.mark.xfail(strict=True, reason=(
    "four identical-shape injections make each target resemble three of its 19 peers; "
    "against clean peers the phase index saturates near 0.57, so the similarity degree "
    "bottoms out near 0.32 > zeta=0.3 at any magnitude"
))
def test_monte_carlo_saturating_magnitude_finds_all_four():
    spec, anomaly, rng_range = fdi_comparison_setup(magnitude=1e3, duration_s=8.0)
    res = monte_carlo_compare(spec, anomaly, 3, seed=1, start_range=rng_range)
    assert res.mean_proposed == 4.0
