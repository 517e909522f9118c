"""File formats: path CSVs, fBm and sample-set dumps, JSON reports, key-value configs.

All floats are written with 17 significant digits, so files round-trip
exactly and reports are byte-stable for a fixed configuration.

Binary dumps are little-endian. The fBm dump header is

    magic  8 bytes  b"CSFBM\\x00\\x00\\x00"
    version uint16
    H       float64
    d       uint32
    steps   uint32
    count   uint64
    seed    uint64

followed by the grid (``steps`` float64) and the samples
(``count * steps * d`` float64, C order). The sample-set dump uses magic
``b"CSLSIG\\x00\\x00"`` with header fields version, H, t, eps, d, N, steps,
count, seed, a uint8 flag for the presence of log weights, then the
``count * n`` samples and, if flagged, ``count`` log weights.
"""

from __future__ import annotations

import csv
import math
import struct
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .density import LogSigSampleSet
from .fbm import FbmBatch
from .signature import PLPath

__all__ = [
    "format_float",
    "dumps_json",
    "write_json",
    "write_path_csv",
    "read_path_csv",
    "write_fbm_csv",
    "write_fbm_binary",
    "read_fbm_binary",
    "write_samples_csv",
    "write_samples_binary",
    "read_samples_binary",
    "write_rows_csv",
    "read_config",
    "write_config",
]

FBM_MAGIC = b"CSFBM\x00\x00\x00"
SAMPLES_MAGIC = b"CSLSIG\x00\x00"
VERSION = 1
_FBM_HEADER = struct.Struct("<8sHdIIQQ")
_SAMPLES_HEADER = struct.Struct("<8sHdddIIIQQB")


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = "," if indent is None else ","
    if obj is None or obj is True or obj is False:
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [pad + _encode(str(k), indent, level + 1) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (Mapping, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[" + sep.join(pad + _encode(v, indent, level + 1) for v in obj) + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj, indent: int | None = 2) -> str:
    """JSON with 17-significant-digit floats; non-finite floats become ``null``."""
    return _encode(obj, indent, 0)


def write_json(obj, file) -> None:
    Path(file).write_text(dumps_json(obj) + "\n")


def write_path_csv(path: PLPath, file) -> None:
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i}" for i in range(1, path.d + 1)])
        for t, x in zip(path.times, path.values):
            w.writerow([format_float(t)] + [format_float(v) for v in x])


def read_path_csv(file) -> PLPath:
    with open(file, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{file}: empty path file")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    if d < 1 or header[0] != "t" or header[1:] != [f"x{i}" for i in range(1, d + 1)]:
        raise ValueError(f"{file}: header must be t,x1,...,xd, got {','.join(header)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{file}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != d + 1:
        raise ValueError(f"{file}: every row needs {d + 1} columns")
    return PLPath(data[:, 0], data[:, 1:])


def write_fbm_csv(batch: FbmBatch, file) -> None:
    """One row per (sample, grid point): ``sample,t,x1,...,xd``."""
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "t"] + [f"x{i}" for i in range(1, batch.d + 1)])
        for i, path in enumerate(batch.samples):
            for t, x in zip(batch.grid, path):
                w.writerow([i, format_float(t)] + [format_float(v) for v in x])


def write_fbm_binary(batch: FbmBatch, file) -> None:
    steps = batch.grid.size
    with open(file, "wb") as fh:
        fh.write(_FBM_HEADER.pack(FBM_MAGIC, VERSION, batch.H, batch.d, steps, batch.count,
                                  int(batch.seed) & 0xFFFFFFFFFFFFFFFF))
        fh.write(np.ascontiguousarray(batch.grid, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(batch.samples, dtype="<f8").tobytes())


def read_fbm_binary(file) -> FbmBatch:
    raw = Path(file).read_bytes()
    magic, version, H, d, steps, count, seed = _FBM_HEADER.unpack_from(raw)
    if magic != FBM_MAGIC or version != VERSION:
        raise ValueError(f"{file}: not a version-{VERSION} fBm dump")
    off = _FBM_HEADER.size
    grid = np.frombuffer(raw, "<f8", steps, off)
    samples = np.frombuffer(raw, "<f8", count * steps * d, off + 8 * steps).reshape(count, steps, d)
    return FbmBatch(H, grid.copy(), samples.copy(), seed)


def write_samples_csv(S: LogSigSampleSet, file, labels: Iterable[str] | None = None) -> None:
    labels = list(labels) if labels is not None else S.basis.labels
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(labels + (["log_weight"] if S.log_weights is not None else []))
        for i, row in enumerate(np.asarray(S.samples)):
            extra = [format_float(S.log_weights[i])] if S.log_weights is not None else []
            w.writerow([format_float(v) for v in row] + extra)


def write_samples_binary(S: LogSigSampleSet, file) -> None:
    flag = 1 if S.log_weights is not None else 0
    with open(file, "wb") as fh:
        fh.write(_SAMPLES_HEADER.pack(SAMPLES_MAGIC, VERSION, S.H, S.t, S.eps, S.d, S.N, S.steps, S.count,
                                      int(S.seed) & 0xFFFFFFFFFFFFFFFF, flag))
        fh.write(np.ascontiguousarray(S.samples, dtype="<f8").tobytes())
        if flag:
            fh.write(np.ascontiguousarray(S.log_weights, dtype="<f8").tobytes())


def read_samples_binary(file) -> LogSigSampleSet:
    raw = Path(file).read_bytes()
    magic, version, H, t, eps, d, N, steps, count, seed, flag = _SAMPLES_HEADER.unpack_from(raw)
    if magic != SAMPLES_MAGIC or version != VERSION:
        raise ValueError(f"{file}: not a version-{VERSION} sample dump")
    from .free_lie import build_hall_basis

    n = build_hall_basis(d, N).n
    off = _SAMPLES_HEADER.size
    samples = np.frombuffer(raw, "<f8", count * n, off).reshape(count, n).copy()
    logw = np.frombuffer(raw, "<f8", count, off + 8 * count * n).copy() if flag else None
    return LogSigSampleSet(H, t, d, N, steps, count, seed, samples, eps, logw)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_cell(x) for x in np.asarray(v).ravel().tolist())
    if v is None:
        return ""
    return str(v)


def write_rows_csv(rows: list[dict], file) -> None:
    """Flat CSV of report rows; columns in first-seen order, lists joined by ``;``."""
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([_cell(r.get(k)) for k in keys])


def read_config(file) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(file).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{file}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"{file}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def _config_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (list, tuple)):
        return ",".join(_config_value(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def write_config(config: Mapping, file) -> None:
    lines = [f"{k} = {_config_value(v)}" for k, v in config.items()]
    Path(file).write_text("\n".join(lines) + "\n")
