"""CSV waveform records and JSON reports."""
from __future__ import annotations

import hashlib
import io as _io
import json
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .dq import DqSignal, WaveformRecord
from .errors import RecordFormatError

SCHEMA_VERSION = 1
JITTER_TOL = 1e-9

ABC_COLUMNS = ("t", "ia", "ib", "ic")
DQ_COLUMNS = ("t", "id", "iq")

Record = Union[WaveformRecord, DqSignal]


def _num(v: float) -> str:
    return f"{v:.17g}"


def format_record(rec: Record, seed: Optional[int] = None) -> str:
    """Serialise to CSV text with a ``#`` metadata line and 17 significant digits."""
    if isinstance(rec, WaveformRecord):
        fmt, cols, data = "abc", ABC_COLUMNS, rec.samples
        fs, f0 = rec.fs, rec.nominal_freq
        n = len(rec)
    else:
        fmt, cols, data = "dq", DQ_COLUMNS, np.vstack([rec.xd, rec.xq])
        fs, f0 = 1.0 / rec.dt, rec.omega / (2 * math.pi)
        n = len(rec)
    head = f"# format={fmt} sample_rate_hz={_num(fs)} nominal_freq_hz={_num(f0)}"
    if seed is not None:
        head += f" seed={int(seed)}"
    lines = [head, ",".join(cols)]
    dt = 1.0 / fs
    for k in range(n):
        row = [_num(k * dt)] + [_num(v) for v in data[:, k]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_record(path, rec: Record, seed: Optional[int] = None) -> None:
    Path(path).write_text(format_record(rec, seed))


def _parse_header(line: str) -> dict:
    meta = {}
    for tok in line.lstrip("#").split():
        if "=" not in tok:
            continue
        k, v = tok.split("=", 1)
        meta[k.strip()] = v.strip()
    return meta


def parse_record(text: str, nominal_freq: Optional[float] = None,
                 fs: Optional[float] = None) -> Record:
    """Inverse of :func:`format_record`; validates layout and sampling.

    ``fs`` and ``nominal_freq`` override the header when given.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise RecordFormatError("empty record", step="parse")
    meta = {}
    while lines and lines[0].lstrip().startswith("#"):
        meta.update(_parse_header(lines.pop(0)))
    if not lines:
        raise RecordFormatError("record has no column header", step="parse")
    cols = tuple(c.strip().lower() for c in lines.pop(0).split(","))
    if cols == ABC_COLUMNS:
        kind = "abc"
    elif cols == DQ_COLUMNS:
        kind = "dq"
    else:
        raise RecordFormatError(f"unrecognised columns {cols}; expected {ABC_COLUMNS} or {DQ_COLUMNS}",
                                step="parse")
    if meta.get("format", kind) != kind:
        raise RecordFormatError(f"header says format={meta['format']} but columns are {kind}", step="parse")
    if len(lines) < 2:
        raise RecordFormatError("record needs at least 2 samples", step="parse")
    try:
        data = np.loadtxt(_io.StringIO("\n".join(lines)), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise RecordFormatError(f"malformed or missing cells: {exc}", step="parse") from None
    if data.shape[1] != len(cols):
        raise RecordFormatError(f"expected {len(cols)} columns, got {data.shape[1]}", step="parse")
    if not np.all(np.isfinite(data)):
        raise RecordFormatError("non-finite cell", step="parse")
    t = data[:, 0]
    steps = np.diff(t)
    dt = float(np.mean(steps))
    if not dt > 0 or np.max(np.abs(steps - dt)) > JITTER_TOL * dt + 1e-15 * np.max(np.abs(t)):
        raise RecordFormatError("non-uniform sampling in t column", step="parse")
    if fs is None and "sample_rate_hz" in meta:
        fs = float(meta["sample_rate_hz"])
    if fs is not None:
        if abs(fs * dt - 1.0) > 1e-6:
            raise RecordFormatError(f"t spacing {dt} disagrees with sample rate {fs}", step="parse")
        dt = 1.0 / fs
    if nominal_freq is None:
        nominal_freq = float(meta.get("nominal_freq_hz", 50.0))
    info = {k: v for k, v in meta.items() if k not in ("format",)}
    if kind == "abc":
        return WaveformRecord(dt=dt, samples=data[:, 1:].T.copy(), nominal_freq=nominal_freq, meta=info)
    return DqSignal(xd=data[:, 1].copy(), xq=data[:, 2].copy(), x0=np.zeros(len(t)),
                    omega=2 * math.pi * nominal_freq, dt=dt, meta=info)


def read_record(path, nominal_freq: Optional[float] = None, fs: Optional[float] = None) -> Record:
    text = Path(path).read_text()
    return parse_record(text, nominal_freq=nominal_freq, fs=fs)


def digest(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _finite(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite(obj.item())
    return obj


def build_report(reports, config: dict, input_digest: str, version: str) -> dict:
    return _finite({
        "schema_version": SCHEMA_VERSION,
        "tool_version": version,
        "input_digest": input_digest,
        "config": config,
        "axes": {r.axis: r.to_dict() for r in reports},
    })


def dumps_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_grid(path, grid: np.ndarray, df: float) -> None:
    """2-D grid as CSV: first row and column carry bin frequencies."""
    grid = np.asarray(grid, dtype=float)
    f = np.arange(grid.shape[0]) * df
    lines = ["f1\\f2," + ",".join(_num(v) for v in f[: grid.shape[1]])]
    for i in range(grid.shape[0]):
        lines.append(_num(f[i]) + "," + ",".join(_num(v) for v in grid[i]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_cube(path, cube: np.ndarray, df: float) -> None:
    """Canonical cells ``m <= n <= o`` of a symmetric cube as long-form CSV."""
    cube = np.asarray(cube, dtype=float)
    m, n, o = np.nonzero(cube)
    keep = (m <= n) & (n <= o)
    lines = ["f1,f2,f3,value"]
    for a, b, c in zip(m[keep], n[keep], o[keep]):
        lines.append(f"{_num(a * df)},{_num(b * df)},{_num(c * df)},{_num(cube[a, b, c])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_series(path, f: np.ndarray, values: np.ndarray, name: str) -> None:
    lines = [f"f,{name}"] + [f"{_num(a)},{_num(b)}" for a, b in zip(f, values)]
    Path(path).write_text("\n".join(lines) + "\n")
