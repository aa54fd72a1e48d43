"""Datasets, CSV ingestion and detrending."""

import csv
from dataclasses import dataclass, field
import json
import os
from pathlib import Path
import tempfile

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InputError

REGRESSOR_PREFIX = "x_"


@dataclass
class Dataset:
    """Multivariate series y (T, m) with aligned regressors x (T, m)."""

    series: np.ndarray
    regressors: np.ndarray = None
    labels: list = None
    sampling_interval: float = 2.0
    detrended: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.series = np.asarray(self.series, dtype=float)
        if self.series.ndim == 1:
            self.series = self.series[:, None]
        T, m = self.series.shape
        if self.regressors is None:
            self.regressors = np.ones((T, m))
        self.regressors = np.asarray(self.regressors, dtype=float)
        if self.regressors.ndim == 1:
            self.regressors = self.regressors[:, None]
        if self.regressors.shape != (T, m):
            raise InputError(f"regressors must have shape {(T, m)}, got {self.regressors.shape}")
        if self.labels is None:
            self.labels = [f"y{i + 1}" for i in range(m)]
        self.labels = [str(v) for v in self.labels]
        if len(self.labels) != m:
            raise InputError("need one label per series")
        for name, arr in (("series", self.series), ("regressors", self.regressors)):
            bad = np.argwhere(~np.isfinite(arr))
            if len(bad):
                r, c = bad[0]
                raise InputError(f"non-finite {name} value at row {r + 1}, column {c + 1}")

    @property
    def T(self):
        return self.series.shape[0]

    @property
    def m(self):
        return self.series.shape[1]


def atomic_write(path, write_fn, mode="w"):
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(value):
    """Shortest float text that round-trips exactly."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_table(path, columns):
    """Write a dict of equal-length columns as CSV."""
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]

    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])

    atomic_write(path, _write)


def read_table(path):
    """Read a CSV with a header into ``(header, rows)`` of strings."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            rows.append(row)
    return header, rows


def parse_numeric(path, header, rows, columns=None):
    columns = header if columns is None else columns
    for c in columns:
        if c not in header:
            raise InputError(f"{path}: missing column {c!r}")
    idx = [header.index(c) for c in columns]
    out = np.empty((len(rows), len(idx)))
    for r, row in enumerate(rows):
        for k, ci in enumerate(idx):
            cell = row[ci].strip()
            try:
                val = float(cell)
            except ValueError:
                raise InputError(f"{path}: non-numeric value {cell!r} at row {r + 2}, column {columns[k]!r}") from None
            if not np.isfinite(val):
                raise InputError(f"{path}: non-finite value {cell!r} at row {r + 2}, column {columns[k]!r}")
            out[r, k] = val
    return out


def load_csv(path, series=None, regressors=None):
    """Read a dataset CSV.

    Columns named ``x_<label>`` are regressors for series ``<label>``; a
    ``time`` column, if present, is ignored. ``series`` restricts and orders
    the series columns. Missing regressor columns default to ones. A sidecar
    ``<path>.meta.json`` is read when present.
    """
    path = Path(path)
    header, rows = read_table(path)
    if not rows:
        raise InputError(f"{path}: no data rows")
    if series is None:
        series = [h for h in header if not h.startswith(REGRESSOR_PREFIX) and h != "time"]
    if not series:
        raise InputError(f"{path}: no series columns")
    y = parse_numeric(path, header, rows, list(series))
    x = np.ones_like(y)
    reg_cols = regressors or [REGRESSOR_PREFIX + s for s in series]
    for k, c in enumerate(reg_cols):
        if c in header:
            x[:, k] = parse_numeric(path, header, rows, [c])[:, 0]
        elif regressors is not None:
            raise InputError(f"{path}: missing column {c!r}")
    meta = {}
    sidecar = path.with_name(path.name + ".meta.json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
    return Dataset(series=y, regressors=x, labels=list(series), sampling_interval=meta.get("sampling_interval", 2.0),
                   detrended=meta.get("detrended", False), metadata=meta.get("metadata", {}))


def save_csv(dataset, path):
    """Write ``dataset`` as CSV plus a ``.meta.json`` sidecar."""
    path = Path(path)
    cols = {}
    for k, label in enumerate(dataset.labels):
        cols[label] = dataset.series[:, k]
    for k, label in enumerate(dataset.labels):
        cols[REGRESSOR_PREFIX + label] = dataset.regressors[:, k]
    write_table(path, cols)
    meta = {"sampling_interval": dataset.sampling_interval, "detrended": dataset.detrended,
            "labels": dataset.labels, "metadata": dataset.metadata}
    atomic_write(path.with_name(path.name + ".meta.json"), lambda fh: json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def detrend_running_line(series, k=30):
    """Subtract a running-line fit: OLS on the k nearest time points.

    Near the edges the window is shifted inward so it always holds k points.
    """
    y = np.asarray(series, dtype=float)
    T = len(y)
    if not 3 <= k <= T:
        raise InputError(f"k must lie in [3, T={T}], got {k}")
    t = np.arange(T, dtype=float)
    start = np.clip(np.arange(T) - (k - 1) // 2, 0, T - k)
    tw = sliding_window_view(t, k)[start]
    yw = sliding_window_view(y, k)[start]
    tc = tw - tw.mean(axis=1, keepdims=True)
    ybar = yw.mean(axis=1)
    slope = np.sum(tc * yw, axis=1) / np.sum(tc * tc, axis=1)
    fitted = ybar + slope * (t - tw.mean(axis=1))
    return y - fitted


def standardize(series):
    """Zero mean, unit variance per column (constant columns are only centered)."""
    y = np.asarray(series, dtype=float)
    sd = y.std(axis=0)
    return (y - y.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def preprocess(dataset, k=30, detrend=True, scale=True):
    """Detrend each series, then standardize; the steps are noted in metadata."""
    y = dataset.series
    if detrend:
        y = np.column_stack([detrend_running_line(y[:, i], k) for i in range(dataset.m)])
    if scale:
        y = standardize(y)
    meta = dict(dataset.metadata, detrend_k=k if detrend else None, standardized=bool(scale))
    return Dataset(series=y, regressors=dataset.regressors.copy(), labels=list(dataset.labels),
                   sampling_interval=dataset.sampling_interval, detrended=dataset.detrended or detrend, metadata=meta)
