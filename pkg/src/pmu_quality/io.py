"""CSV ingestion and deterministic serialisation of reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from pmu_quality.detector import DetectionReport
from pmu_quality.signals import SignalMatrix

TIME_TOLERANCE_S = 1e-9


class DataError(ValueError):
    """Input data is malformed or violates the CSV contract."""


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def read_csv(path, sample_rate: float | None = None) -> SignalMatrix:
    """Read ``time,<ch1>,<ch2>,...`` into a SignalMatrix.

    Time must be strictly increasing with uniform spacing (within 1 ns).
    When ``sample_rate`` is given the spacing must equal ``1/sample_rate``;
    otherwise the rate is taken from the time column.

    Raises:
        DataError: on a bad header, unparsable or non-finite cells, ragged
            rows, fewer than two channels, or irregular timestamps.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0].lower() != "time":
        raise DataError(f"{path}: first header column must be 'time', got {header[:1]}")
    channels = header[1:]
    if len(channels) < 2:
        raise DataError(f"{path}: need at least 2 channel columns, got {len(channels)}")
    if len(set(channels)) != len(channels):
        raise DataError(f"{path}: duplicate channel names in header")
    body = rows[1:]
    if len(body) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(body)}")

    data = np.empty((len(body), len(header)))
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{r}: expected {len(header)} cells, got {len(row)}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}:{r}: column {header[c]!r}: not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(
                    f"{path}:{r}: column {header[c]!r}: non-finite value {cell!r} (missing data is not supported)"
                )
            data[r - 2, c] = v

    t = data[:, 0]
    dt = np.diff(t)
    if np.any(dt <= 0):
        bad = int(np.flatnonzero(dt <= 0)[0]) + 3
        raise DataError(f"{path}:{bad}: time is not strictly increasing")
    step = 1.0 / sample_rate if sample_rate else (t[-1] - t[0]) / (t.size - 1)
    expected = t[0] + step * np.arange(t.size)
    off = np.abs(t - expected)
    if off.max() > TIME_TOLERANCE_S:
        bad = int(np.argmax(off)) + 2
        raise DataError(
            f"{path}:{bad}: timestamps are not uniformly spaced at {step!r} s "
            f"(off by {off.max():.3g} s)"
        )
    return SignalMatrix(data[:, 1:].T.copy(), 1.0 / step, channels, t0=float(t[0]))


def _write_rows(path, header, columns) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow(row)


def write_csv(path, matrix: SignalMatrix) -> None:
    """Write a SignalMatrix with 17 significant digits."""
    times = [fmt_float(t) for t in matrix.times]
    cols = [[fmt_float(v) for v in row] for row in matrix.values]
    _write_rows(path, ["time", *matrix.channel_ids], [times, *cols])


def write_mask_csv(path, times: np.ndarray, channel_ids, mask: np.ndarray) -> None:
    """Per-sample 0/1 mask in the same layout as the data CSV."""
    _write_rows(
        path,
        ["time", *channel_ids],
        [[fmt_float(t) for t in times], *[[str(int(v)) for v in row] for row in mask]],
    )


def read_mask_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    header = rows[0][1:]
    mask = np.array([[int(x) for x in r[1:]] for r in rows[1:]], dtype=bool).T
    return header, mask


def write_long_csv(path, matrix: SignalMatrix, flags: np.ndarray) -> None:
    """Plot-ready long format: ``time,channel,value,flagged``."""
    times = matrix.times
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "channel", "value", "flagged"])
        for c, cid in enumerate(matrix.channel_ids):
            for t, v, f in zip(times, matrix.values[c], flags[c]):
                w.writerow([fmt_float(t), cid, fmt_float(v), int(f)])


def canonical_json(obj, indent: int = 2) -> str:
    """JSON with sorted keys and every float written with 17 significant digits.

    Output is byte-identical for equal inputs.
    """
    pad = " " * indent

    def enc(o, level: int) -> str:
        if isinstance(o, bool) or o is None:
            return {True: "true", False: "false", None: "null"}[o]
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            if not math.isfinite(o):
                raise ValueError(f"cannot serialise non-finite float {o!r}")
            return fmt_float(o)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, np.ndarray):
            o = o.tolist()
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in o):
                return "[" + ", ".join(enc(x, level + 1) for x in o) + "]"
            inner = ",\n".join(pad * (level + 1) + enc(x, level + 1) for x in o)
            return "[\n" + inner + "\n" + pad * level + "]"
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = sorted((str(k), v) for k, v in o.items())
            inner = ",\n".join(
                f"{pad * (level + 1)}{enc(k, level + 1)}: {enc(v, level + 1)}" for k, v in items
            )
            return "{\n" + inner + "\n" + pad * level + "}"
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return enc(obj, 0) + "\n"


def report_to_dict(report: DetectionReport, matrix: SignalMatrix | None = None) -> dict:
    """JSON-ready view of a report: flagged intervals and the score trace."""
    intervals = report.flagged_intervals()
    out = {
        "channels": list(report.channel_ids),
        "n_samples": report.n_samples,
        "n_flagged_samples": report.n_flagged,
        "flagged_intervals": {
            cid: [{"start": a, "stop": b} for a, b in iv] for cid, iv in intervals.items()
        },
        "confirmed_windows": {
            cid: list(map(int, w)) for cid, w in zip(report.channel_ids, report.confirmed_windows)
        },
        "trace": {
            "window_starts": [int(s) for s in report.window_starts],
            "scores": {cid: report.trace[:, c].tolist() for c, cid in enumerate(report.channel_ids)},
        },
    }
    if matrix is not None:
        times = matrix.times
        for cid, iv in out["flagged_intervals"].items():
            for item in iv:
                item["t_start"] = float(times[item["start"]])
                item["t_stop"] = float(times[item["stop"] - 1])
    return out
