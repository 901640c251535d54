"""
Command-line front end.

    pmu-quality detect   data.csv --out results/
    pmu-quality simulate --scenario fdi --seed 3 --out sim/
    pmu-quality inject   data.csv --kind spike --channels f10 --start 600 --out inj/
    pmu-quality compare  --trials 100 --magnitude 1,4
    pmu-quality bench    --channels 22

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from dataclasses import asdict, replace
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from pmu_quality.detector import DetectorConfig, StreamingDetector, run_stream
from pmu_quality.io import (
    DataError,
    canonical_json,
    fmt_float,
    read_csv,
    read_mask_csv,
    report_to_dict,
    write_csv,
    write_long_csv,
    write_mask_csv,
)
from pmu_quality.lof import LofConfig
from pmu_quality.similarity import SimilarityConfig
from pmu_quality.synth import (
    AnomalySpec,
    ScenarioSpec,
    fdi_comparison_setup,
    generate,
    inject,
    monte_carlo_compare,
    scenario,
)

logger = logging.getLogger("pmu_quality")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# Config keys understood in --config files, mirroring the flag names.
CONFIG_KEYS = (
    "window", "stride", "zeta", "confirm", "lambda", "epsilon", "weights", "band",
    "include_dc", "sample_rate", "flag_run", "lof_k", "lof_threshold",
)
DEFAULTS = {
    "window": 80, "stride": 1, "zeta": 0.3, "confirm": 15, "lambda": 10.0, "epsilon": 0.5,
    "weights": [0.3, 0.35, 0.35], "band": [0.0, 5.0], "include_dc": False,
    "sample_rate": 60.0, "flag_run": False, "lof_k": 3, "lof_threshold": 10.0,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _float_list(n: int):
    def parse(text: str) -> list[float]:
        parts = [p for p in text.split(",") if p.strip()]
        if len(parts) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise argparse.ArgumentTypeError(f"not numbers: {text!r}") from None

    return parse


def _range_or_value(text: str):
    parts = [float(p) for p in text.split(",")]
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return (parts[0], parts[1])
    raise argparse.ArgumentTypeError(f"expected a value or lo,hi: {text!r}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("detector configuration (flag > --config file > default)")
    g.add_argument("--config", type=Path, help="JSON file with configuration keys")
    g.add_argument("--window", type=int)
    g.add_argument("--stride", type=int)
    g.add_argument("--zeta", type=float)
    g.add_argument("--confirm", type=int)
    g.add_argument("--lambda", dest="lambda_", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--weights", type=_float_list(3), help="w_dcs,w_fms,w_fps")
    g.add_argument("--band", type=_float_list(2), help="lo,hi in Hz")
    g.add_argument("--include-dc", action="store_true", default=None)
    g.add_argument("--sample-rate", type=float)
    g.add_argument("--flag-run", action="store_true", default=None,
                   help="on confirmation flag the whole candidate run")
    g.add_argument("--lof-k", type=int)
    g.add_argument("--lof-threshold", type=float)


def effective_config(args) -> dict:
    """Merge built-in defaults, the --config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError(f"config {args.config} must be a JSON object")
        unknown = set(loaded) - set(CONFIG_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    flags = {
        "window": args.window, "stride": args.stride, "zeta": args.zeta, "confirm": args.confirm,
        "lambda": args.lambda_, "epsilon": args.epsilon, "weights": args.weights, "band": args.band,
        "include_dc": args.include_dc, "sample_rate": args.sample_rate, "flag_run": args.flag_run,
        "lof_k": args.lof_k, "lof_threshold": args.lof_threshold,
    }
    cfg.update({k: v for k, v in flags.items() if v is not None})
    return cfg


def build_configs(cfg: dict) -> tuple[DetectorConfig, LofConfig]:
    try:
        w = [float(x) for x in cfg["weights"]]
        lo, hi = (float(x) for x in cfg["band"])
        sim = SimilarityConfig(
            lam=float(cfg["lambda"]), epsilon=float(cfg["epsilon"]),
            w_dcs=w[0], w_fms=w[1], w_fps=w[2],
            band_low_hz=lo, band_high_hz=hi, include_dc=bool(cfg["include_dc"]),
        )
        det = DetectorConfig(
            sim=sim, window_len=int(cfg["window"]), stride=int(cfg["stride"]),
            zeta=float(cfg["zeta"]), confirm_windows=int(cfg["confirm"]),
            sample_rate_hz=float(cfg["sample_rate"]), flag_run=bool(cfg["flag_run"]),
        )
        lof = LofConfig(
            k_neighbors=int(cfg["lof_k"]), threshold=float(cfg["lof_threshold"]),
            window_len=det.window_len, stride=det.stride, confirm_windows=det.confirm_windows,
            sample_rate_hz=det.sample_rate_hz,
        )
    except (TypeError, ValueError, IndexError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    return det, lof


def _manifest(command: str, inputs, cfg: dict, outputs, seed=None) -> dict:
    return {
        "command": command,
        "tool_version": _version(),
        "inputs": [str(p) for p in inputs],
        "config": cfg,
        "seed": seed,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "outputs": [str(p) for p in outputs],
    }


def _emit(summary: dict, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(canonical_json(summary))
        return
    flat = {}
    for k, v in summary.items():
        if isinstance(v, dict):
            for k2, v2 in v.items():
                flat[f"{k}.{k2}"] = v2
        elif not isinstance(v, list):
            flat[k] = v
    keys = sorted(flat)
    sys.stdout.write(",".join(keys) + "\n")
    sys.stdout.write(",".join(fmt_float(flat[k]) if isinstance(flat[k], float) else str(flat[k]) for k in keys) + "\n")


def _channel_indices(names: str, channel_ids) -> tuple[int, ...]:
    out = []
    for name in names.split(","):
        name = name.strip()
        if name in channel_ids:
            out.append(channel_ids.index(name))
        elif name.isdigit() and 0 <= int(name) < len(channel_ids):
            out.append(int(name))
        else:
            raise UsageError(f"unknown channel {name!r}")
    return tuple(out)


# --------------------------------------------------------------------------- commands


def cmd_detect(args) -> int:
    cfg = effective_config(args)
    det_cfg, _ = build_configs(cfg)
    matrix = read_csv(args.input, sample_rate=det_cfg.sample_rate_hz)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            report = run_stream(matrix, det_cfg)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path, flags_path, long_path = out / "report.json", out / "flags.csv", out / "long.csv"
    body = report_to_dict(report, matrix)
    body["config"] = cfg
    body["input"] = Path(args.input).name
    body["tool_version"] = _version()
    report_path.write_text(canonical_json(body))
    write_mask_csv(flags_path, matrix.times, matrix.channel_ids, report.flags)
    write_long_csv(long_path, matrix, report.flags)
    (out / "manifest.json").write_text(
        canonical_json(_manifest("detect", [args.input], cfg, [report_path, flags_path, long_path]))
    )
    summary = {
        "n_channels": matrix.n_channels,
        "n_samples": matrix.n_samples,
        "n_flagged_samples": report.n_flagged,
        "flagged_channels": sorted(c for c, iv in report.flagged_intervals().items() if iv),
    }
    _emit(summary, args.format)
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    overrides = {"sample_rate_hz": args.sample_rate} if args.sample_rate else {}
    if args.channels:
        overrides["n_channels"] = args.channels
    if args.duration:
        overrides["duration_s"] = args.duration
    if args.scenario == "clean":
        spec = ScenarioSpec(seed=args.seed, **overrides)
        matrix, _ = generate(spec)
        labels = np.zeros(matrix.values.shape, dtype=bool)
    else:
        try:
            matrix, labels, spec = scenario(args.scenario, seed=args.seed, **overrides)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    data_path, label_path = out / "data.csv", out / "labels.csv"
    write_csv(data_path, matrix)
    write_mask_csv(label_path, matrix.times, matrix.channel_ids, labels)
    spec_dict = asdict(spec)
    (out / "manifest.json").write_text(
        canonical_json(_manifest("simulate", [], {"scenario": args.scenario, "spec": spec_dict},
                                 [data_path, label_path], seed=args.seed))
    )
    _emit({"n_channels": matrix.n_channels, "n_samples": matrix.n_samples,
           "n_labelled_samples": int(labels.sum())}, args.format)
    return EXIT_OK


def cmd_inject(args) -> int:
    matrix = read_csv(args.input)
    labels = None
    if args.labels:
        ids, labels = read_mask_csv(args.labels)
        if ids != list(matrix.channel_ids) or labels.shape != matrix.values.shape:
            raise DataError(f"{args.labels}: label mask does not match {args.input}")
    try:
        anomaly = AnomalySpec(
            kind=args.kind, channels=_channel_indices(args.channels, list(matrix.channel_ids)),
            start=args.start, length=args.length, magnitude=args.magnitude,
            relative_to_sigma=args.relative, n_spikes=args.n_spikes, shape=args.shape,
            random_sign=args.random_sign, seed=args.seed,
        )
        matrix, labels = inject(matrix, anomaly, labels)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "data.csv", matrix)
    write_mask_csv(out / "labels.csv", matrix.times, matrix.channel_ids, labels)
    _emit({"n_labelled_samples": int(labels.sum())}, args.format)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = effective_config(args)
    det_cfg, lof_cfg = build_configs(cfg)
    spec, anomaly, start_range = fdi_comparison_setup(
        magnitude=args.magnitude, n_channels=args.channels, duration_s=args.duration,
        sample_rate_hz=det_cfg.sample_rate_hz,
    )
    if args.random_sign:
        anomaly = replace(anomaly, random_sign=True)
    summary = monte_carlo_compare(
        spec, anomaly, args.trials, det_cfg, lof_cfg, seed=args.seed, start_range=start_range
    )
    result = {
        "trials": summary.trials,
        "n_targets": summary.n_targets,
        "mean_identified": {"proposed": summary.mean_proposed, "lof": summary.mean_lof},
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        body = summary.to_dict()
        body["config"] = cfg
        body["magnitude"] = args.magnitude
        (out / "compare.json").write_text(canonical_json(body))
    _emit(result, args.format)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = effective_config(args)
    det_cfg, _ = build_configs(cfg)
    spec = ScenarioSpec(n_channels=args.channels, duration_s=args.duration,
                        sample_rate_hz=det_cfg.sample_rate_hz, seed=args.seed)
    matrix, _ = generate(spec)
    det = StreamingDetector.from_config(det_cfg, matrix.n_channels, keep_trace=False)
    t0 = time.perf_counter()
    n_windows = 0
    for lo in range(0, matrix.n_samples, args.batch):
        n_windows += det.push(matrix.values[:, lo:lo + args.batch]).window_starts.size
    elapsed = time.perf_counter() - t0
    _emit({
        "n_channels": matrix.n_channels,
        "stride": det_cfg.stride,
        "windows": n_windows,
        "seconds": elapsed,
        "windows_per_second": n_windows / elapsed,
        "realtime_factor": args.duration / elapsed,
    }, args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pmu-quality", description="Low-quality PMU data detection")
    parser.add_argument("--version", action="version", version=_version())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--format", choices=["json", "csv"], default="json",
                       help="format of the summary printed to stdout")

    p = sub.add_parser("detect", help="run the detector on a CSV file")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="write a synthetic scenario CSV plus labels")
    p.add_argument("--scenario", choices=["clean", "normal", "event", "fdi"], default="event")
    p.add_argument("--channels", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("inject", help="inject an anomaly into a CSV file")
    p.add_argument("input", type=Path)
    p.add_argument("--labels", type=Path, help="existing label mask CSV to extend")
    p.add_argument("--kind", choices=["spike", "repeated", "fdi"], required=True)
    p.add_argument("--channels", required=True, help="comma-separated channel names or indices")
    p.add_argument("--start", type=int, required=True)
    p.add_argument("--length", type=int, default=10)
    p.add_argument("--magnitude", type=_range_or_value, default=1.0, help="value or lo,hi")
    p.add_argument("--relative", action="store_true", help="magnitude in units of local window std")
    p.add_argument("--n-spikes", type=int, default=1)
    p.add_argument("--shape", choices=["bias", "ramp"], default="bias")
    p.add_argument("--random-sign", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    common(p)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("compare", help="Monte-Carlo FDI comparison against the LOF baseline")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--magnitude", type=_range_or_value, default=(1.0, 4.0),
                   help="FDI magnitude in units of window std: value or lo,hi")
    p.add_argument("--random-sign", action="store_true")
    p.add_argument("--channels", type=int, default=20)
    p.add_argument("--duration", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    _add_config_flags(p)
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="measure detector throughput")
    p.add_argument("--channels", type=int, default=22)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--batch", type=int, default=60, help="samples per push")
    p.add_argument("--seed", type=int, default=0)
    _add_config_flags(p)
    common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
