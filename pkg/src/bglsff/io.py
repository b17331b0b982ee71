"""CSV formats for curves, sweep metrics, trajectories and matrices.

Every file starts with a ``#`` preamble of ``key=value`` lines followed by a
header row and comma-separated data.  Floats are written with 17
significant digits, which round-trips IEEE doubles exactly.  Writes go to a
temporary file in the target directory and are moved into place atomically.
"""

from __future__ import annotations

import contextlib
import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ensemble import SffCurve
from .errors import InvalidArgumentError

CURVE_COLUMNS = ("t", "f_mean", "f_stderr", "n_ok")
METRICS_COLUMNS = ("parameter", "value", "t_d", "f_d", "t_p", "f_p", "ratio", "warnings")
TRAJECTORY_COLUMNS = ("t", "fidelity", "purity", "mean_energy", "trace_drift")
MATRIX_COLUMNS = ("row", "col", "re", "im")


class CsvParseError(InvalidArgumentError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return "" if x is None else str(x)


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise
    return path


def _render(preamble: dict, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    for key, value in preamble.items():
        text = fmt(value).replace("\n", " ")
        buf.write(f"# {key}={text}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def split_sections(text: str) -> tuple[str, str]:
    """``(preamble, data)`` where ``data`` starts at the header row."""
    lines = text.splitlines(keepends=True)
    n = 0
    while n < len(lines) and lines[n].startswith("#"):
        n += 1
    return "".join(lines[:n]), "".join(lines[n:])


def _parse(path, expected: Sequence[str] | None = None):
    path = Path(path)
    meta: dict[str, str] = {}
    header = None
    rows = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#"):
                if header is not None:
                    raise CsvParseError(path, lineno, "comment after the header row")
                body = line[1:].strip()
                if body:
                    if "=" not in body:
                        raise CsvParseError(path, lineno, "preamble line is not key=value")
                    key, value = body.split("=", 1)
                    meta[key.strip()] = value.strip()
                continue
            if not line.strip():
                continue
            fields = next(csv.reader([line]))
            if header is None:
                header = [f.strip() for f in fields]
                if expected is not None and tuple(header) != tuple(expected):
                    raise CsvParseError(path, lineno, f"expected columns {','.join(expected)}")
                continue
            if len(fields) != len(header):
                raise CsvParseError(path, lineno, f"expected {len(header)} fields, got {len(fields)}")
            rows.append((lineno, fields))
    if header is None:
        raise CsvParseError(path, 0, "missing header row")
    return meta, header, rows


def _floats(path, rows, ncols=None):
    out = []
    for lineno, fields in rows:
        try:
            out.append([float(f) for f in (fields if ncols is None else fields[:ncols])])
        except ValueError as exc:
            raise CsvParseError(path, lineno, f"not a number: {exc}") from None
    return np.array(out, dtype=float).reshape(len(out), -1)


def write_curve(path, curve: SffCurve, preamble: dict | None = None) -> Path:
    """Curve file: ``preamble`` (typically the resolved run config) then ``meta.*`` entries."""
    head = dict(preamble or {})
    head.update({f"meta.{k}": v for k, v in curve.metadata.items() if f"meta.{k}" not in head})
    n_ok = np.full(curve.times.size, curve.n_ok, dtype=np.int64)
    rows = zip(curve.times, curve.mean, curve.stderr, n_ok)
    return atomic_write_text(path, _render(head, CURVE_COLUMNS, rows))


def read_curve(path) -> tuple[SffCurve, dict]:
    meta, _, rows = _parse(path, CURVE_COLUMNS)
    data = _floats(path, rows)
    if data.size == 0:
        raise CsvParseError(path, 0, "no data rows")
    n_ok = int(data[0, 3])
    curve_meta = {k[5:]: v for k, v in meta.items() if k.startswith("meta.")}
    curve = SffCurve(times=data[:, 0], mean=data[:, 1], stderr=data[:, 2], n_ok=n_ok, metadata=curve_meta)
    return curve, meta


def write_metrics(path, rows: Iterable[dict], preamble: dict | None = None) -> Path:
    """One row per swept value: ``parameter, value, t_d, f_d, t_p, f_p, ratio, warnings``."""
    body = [[r.get(c, "") for c in METRICS_COLUMNS] for r in rows]
    return atomic_write_text(path, _render(preamble or {}, METRICS_COLUMNS, body))


def metrics_row(parameter: str, value, metrics=None, error: str | None = None) -> dict:
    if metrics is None:
        nan = float("nan")
        return dict(parameter=parameter, value=value, t_d=nan, f_d=nan, t_p=nan, f_p=nan,
                    ratio=nan, warnings=error or "failed")
    return dict(
        parameter=parameter,
        value=value,
        t_d=metrics.t_d,
        f_d=metrics.f_d,
        t_p=metrics.t_p,
        f_p=metrics.f_p,
        ratio=metrics.ratio,
        warnings=";".join(metrics.warnings),
    )


def read_metrics(path) -> tuple[list[dict], dict]:
    meta, _, rows = _parse(path, METRICS_COLUMNS)
    out = []
    for lineno, fields in rows:
        rec = dict(zip(METRICS_COLUMNS, fields))
        try:
            for key in METRICS_COLUMNS[1:-1]:
                rec[key] = float(rec[key])
        except ValueError as exc:
            raise CsvParseError(path, lineno, f"not a number: {exc}") from None
        out.append(rec)
    return out, meta


def write_trajectory(path, columns: dict, preamble: dict | None = None) -> Path:
    arrays = [np.asarray(columns[c], dtype=float) for c in TRAJECTORY_COLUMNS]
    return atomic_write_text(path, _render(preamble or {}, TRAJECTORY_COLUMNS, zip(*arrays)))


def read_trajectory(path) -> tuple[dict, dict]:
    meta, _, rows = _parse(path, TRAJECTORY_COLUMNS)
    data = _floats(path, rows)
    return {c: data[:, i] for i, c in enumerate(TRAJECTORY_COLUMNS)}, meta


def write_matrix(path, matrix: np.ndarray, preamble: dict | None = None) -> Path:
    """Long-format dump of a (complex) matrix: ``row, col, re, im``."""
    m = np.asarray(matrix)
    rows = ((i, j, m[i, j].real, m[i, j].imag) for i in range(m.shape[0]) for j in range(m.shape[1]))
    head = {"shape": f"{m.shape[0]}x{m.shape[1]}", **(preamble or {})}
    return atomic_write_text(path, _render(head, MATRIX_COLUMNS, rows))


def read_matrix(path) -> np.ndarray:
    meta, _, rows = _parse(path, MATRIX_COLUMNS)
    try:
        nr, nc = (int(x) for x in meta["shape"].split("x"))
    except (KeyError, ValueError):
        raise CsvParseError(path, 1, "missing or malformed shape entry") from None
    data = _floats(path, rows)
    out = np.zeros((nr, nc), dtype=complex)
    out[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2] + 1j * data[:, 3]
    return out


def sniff_kind(path) -> str:
    """``"curve"``, ``"metrics"`` or ``"trajectory"`` from the header row."""
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#") or not line.strip():
                continue
            header = tuple(f.strip() for f in next(csv.reader([line])))
            for kind, cols in (("curve", CURVE_COLUMNS), ("metrics", METRICS_COLUMNS),
                               ("trajectory", TRAJECTORY_COLUMNS)):
                if header == cols:
                    return kind
            raise CsvParseError(path, lineno, "unrecognised header row")
    raise CsvParseError(path, 0, "missing header row")
