"""Acceptance checks, one test per criterion.

Each test writes a single ``[ACCEPT n] PASS|FAIL ...`` line to the terminal
and then asserts. Run just this file with

    pytest tests/test_acceptance.py -v
"""

import math
import time

import numpy as np
import pytest

from oracles import brute_lof, naive_dft
from pmu_quality.detector import DetectorConfig, StreamingDetector, run_stream
from pmu_quality.lof import batch_lof_scores
from pmu_quality.similarity import (
    SimilarityConfig,
    WindowView,
    dynamic_change_similarity,
    frequency_magnitude_similarity,
    frequency_phase_similarity,
    magnitude_distance_profile,
    phase_distance_profile,
    spectrum,
)
from pmu_quality.synth import (
    AnomalySpec,
    EventProfile,
    ScenarioSpec,
    equal_sigma_pair,
    fdi_comparison_setup,
    generate,
    inject,
    monte_carlo_compare,
    scenario,
)

RATE = 60.0
SIM = SimilarityConfig()


@pytest.fixture
def verdict(request):
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(number, ok, detail):
        line = f"[ACCEPT {number}] {'PASS' if ok else 'FAIL'} {detail}"
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        else:
            print(line)
        assert ok, line

    return emit


def _tone(k, amp=1.0, phase=0.0, n=80):
    t = np.arange(n)
    return amp * np.cos(2 * np.pi * k * t / n + phase)


def test_criterion_1_closed_form_kernels(verdict):
    a = WindowView(_tone(3), RATE)
    b = WindowView(_tone(3, amp=2.0), RATE)
    dcs = dynamic_change_similarity(a, b)

    # |H| = 10 at every in-band bin: channel j is 10x channel i
    x = np.random.default_rng(0).standard_normal(80)
    s = magnitude_distance_profile(spectrum(WindowView(x, RATE)), spectrum(WindowView(10 * x, RATE)), SIM)
    fms = frequency_magnitude_similarity(s)

    # phase pi at every in-band bin: channel j is -x
    p = phase_distance_profile(spectrum(WindowView(x, RATE)), spectrum(WindowView(-x, RATE)), SIM)
    fps = frequency_phase_similarity(p)

    errs = {
        "I_dcs(ratio 2)": abs(dcs - math.exp(-1.0)),
        "S(|H|=10)": max(np.max(np.abs(s.values - (1 - math.tanh(2.0)))), abs(fms - (1 - math.tanh(2.0)))),
        "A(pi)": max(np.max(np.abs(p.values - (1 - math.tanh(1.0)))), abs(fps - (1 - math.tanh(1.0)))),
    }
    worst = max(errs.values())
    verdict(1, worst <= 1e-12, "closed-form kernels: " + ", ".join(f"{k} err={v:.2e}" for k, v in errs.items()))


def test_criterion_2_dft_oracle(verdict):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        x = 60.0 + 0.01 * rng.standard_normal(80)
        sp = spectrum(WindowView(x, RATE))
        ref = np.array(naive_dft(x))
        got = sp.magnitude * np.exp(1j * sp.phase)
        worst = max(worst, float(np.max(np.abs(got - ref))))
    elapsed = time.perf_counter() - t0
    verdict(2, worst < 1e-9, f"DFT vs naive O(L^2) over 200 windows: max abs err={worst:.2e} ({elapsed:.2f}s incl. oracle)")


def test_criterion_3_equal_sigma_discriminability(verdict):
    a, b = equal_sigma_pair()
    wa, wb = WindowView(a, RATE), WindowView(b, RATE)
    dcs = dynamic_change_similarity(wa, wb)
    sa, sb = spectrum(wa), spectrum(wb)
    fms = frequency_magnitude_similarity(magnitude_distance_profile(sa, sb, SIM))
    fps = frequency_phase_similarity(phase_distance_profile(sa, sb, SIM))
    ok = dcs > 0.999 and min(fms, fps) < 0.7
    verdict(3, ok, f"equal-sigma pair: I_dcs={dcs:.6f} I_fms={fms:.4f} I_fps={fps:.4f}")


def test_criterion_4_event_no_false_alarms(verdict):
    t0 = time.perf_counter()
    flagged = {}
    for seed in range(20):
        matrix, _, _ = scenario("event", seed=seed)
        flagged[seed] = run_stream(matrix).n_flagged
    elapsed = time.perf_counter() - t0
    total = sum(flagged.values())
    bad = {s: n for s, n in flagged.items() if n}
    verdict(4, total == 0 and elapsed < 30,
            f"event scenario, 20 seeds x 20 channels: flagged samples={total} {bad or ''} ({elapsed:.1f}s)")


def test_criterion_5_spikes_and_repeated(verdict):
    t0 = time.perf_counter()
    matrix, labels, _ = scenario("normal", seed=0)
    target = int(np.flatnonzero(labels.any(axis=1))[0])
    report = run_stream(matrix)
    elapsed = time.perf_counter() - t0
    coverage = report.flags[target][labels[target]].mean()
    others = int(np.delete(report.flags, target, axis=0).sum())
    ok = coverage >= 0.9 and others == 0 and elapsed < 30
    verdict(5, ok, f"22 channels, spikes + repeated in {matrix.channel_ids[target]}: "
                   f"coverage={coverage:.3f}, flags elsewhere={others} ({elapsed:.1f}s)")


def test_criterion_6_fdi_comparison_ordering(verdict):
    t0 = time.perf_counter()
    spec, anomaly, start_range = fdi_comparison_setup(magnitude=(1.0, 4.0))
    unobvious = monte_carlo_compare(spec, anomaly, 100, seed=0, start_range=start_range)
    spec, anomaly, start_range = fdi_comparison_setup(magnitude=(3.0, 4.0))
    strong = monte_carlo_compare(spec, anomaly, 100, seed=1, start_range=start_range)
    elapsed = time.perf_counter() - t0
    margin = unobvious.mean_proposed - unobvious.mean_lof
    ok = margin >= 1.0 and strong.mean_proposed >= 3.0 and elapsed < 300
    verdict(6, ok, f"FDI in 4 of 20, 100 trials: [1,4]x sigma proposed={unobvious.mean_proposed:.2f} "
                   f"lof={unobvious.mean_lof:.2f} margin={margin:.2f}; [3,4]x sigma "
                   f"proposed={strong.mean_proposed:.2f} lof={strong.mean_lof:.2f} ({elapsed:.1f}s)")


def test_criterion_7_detector_properties(verdict):
    t0 = time.perf_counter()
    matrix, _ = generate(ScenarioSpec(n_channels=8, duration_s=25.0, event=EventProfile(start_s=5.0), seed=3))
    labels = None
    for anomaly in (
        AnomalySpec("spike", (1,), start=100, length=400, n_spikes=4, magnitude=(0.2, 0.5), random_sign=True, seed=3),
        AnomalySpec("repeated", (6,), start=700, length=200),
        AnomalySpec("fdi", (4,), start=1200, length=10, magnitude=0.5),
    ):
        matrix, labels = inject(matrix, anomaly, labels)
    cfg = DetectorConfig()
    offline = run_stream(matrix, cfg)
    rng = np.random.default_rng(7)

    mismatches = 0
    for _ in range(50):
        n_cuts = int(rng.integers(1, 40))
        cuts = np.sort(rng.choice(np.arange(1, matrix.n_samples), size=n_cuts, replace=False))
        det = StreamingDetector.from_config(cfg, matrix.n_channels)
        for part in np.split(matrix.values, cuts, axis=1):
            det.push(part)
        online = det.report()
        same = (np.array_equal(online.flags, offline.flags)
                and online.confirmed_windows == offline.confirmed_windows
                and np.allclose(online.trace, offline.trace, rtol=0, atol=1e-12))
        mismatches += not same

    zeta_ok = True
    prev = None
    for zeta in (0.1, 0.2, 0.3, 0.4, 0.5):
        flags = run_stream(matrix, DetectorConfig(zeta=zeta)).flags
        zeta_ok &= prev is None or bool(np.all(flags >= prev))
        prev = flags

    confirm_ok = True
    prev = None
    for confirm in (0, 5, 15, 30):
        flags = run_stream(matrix, DetectorConfig(confirm_windows=confirm)).flags
        confirm_ok &= prev is None or bool(np.all(flags <= prev))
        prev = flags

    perm_ok = True
    for _ in range(3):
        perm = rng.permutation(matrix.n_channels)
        permuted = run_stream(matrix.take(perm), cfg)
        perm_ok &= bool(np.array_equal(permuted.flags, offline.flags[perm]))

    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and zeta_ok and confirm_ok and perm_ok and offline.n_flagged > 0 and elapsed < 60
    verdict(7, ok, f"properties: partition mismatches={mismatches}/50, zeta-monotone={zeta_ok}, "
                   f"confirm-monotone={confirm_ok}, permutation-equivariant={perm_ok} ({elapsed:.1f}s)")


def test_criterion_8_lof_small_instances(verdict):
    rng = np.random.default_rng(8)
    worst = 0.0
    count = 0
    for n in range(3, 7):
        for k in range(1, n):
            for _ in range(25):
                if rng.random() < 0.3:
                    pts = rng.choice([0.0, 0.25, 1.0, 3.0], size=n)
                else:
                    pts = rng.standard_normal(n)
                got = batch_lof_scores(pts[None, :], k)[0]
                ref = np.array(brute_lof(list(pts), k))
                worst = max(worst, float(np.max(np.abs(got - ref) / np.maximum(1.0, np.abs(ref)))))
                count += 1
    verdict(8, worst < 1e-9, f"LOF vs brute force, {count} instances N<=6: max rel err={worst:.2e}")


def test_criterion_9_throughput(verdict):
    matrix, _, _ = scenario("event", seed=0, n_channels=22)
    det = StreamingDetector.from_config(DetectorConfig(), matrix.n_channels, keep_trace=False)
    t0 = time.perf_counter()
    n_windows = 0
    for lo in range(0, matrix.n_samples, 60):
        n_windows += det.push(matrix.values[:, lo:lo + 60]).window_starts.size
    elapsed = time.perf_counter() - t0
    duration = matrix.n_samples / RATE
    factor = duration / elapsed
    verdict(9, factor >= 100, f"N=22 stride 1: {n_windows / elapsed:.0f} windows/s, "
                              f"{factor:.0f}x real time ({duration:.0f}s of data in {elapsed:.2f}s)")
