"""Modeling datasets, invertible min-max scaling and the synthetic target."""

import csv
import hashlib
import io
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SchemaError, ShapeError, SizeError

DEFAULT_COEFFICIENTS = (0.4, 0.1, 0.4, 0.1)
DEFAULT_NOISE_SD = 0.01
TARGET_NAME = "Y"


@dataclass(frozen=True)
class Dataset:
    feature_names: tuple
    X: np.ndarray
    y: np.ndarray | None = None
    target_name: str | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ShapeError(f"X must be 2-D, got shape {X.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if len(self.feature_names) != X.shape[1]:
            raise ShapeError(f"{len(self.feature_names)} names for {X.shape[1]} columns")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise SchemaError("feature names must be unique")
        if self.y is not None:
            y = np.array(self.y, dtype=float).reshape(-1)
            if y.shape[0] != X.shape[0]:
                raise ShapeError(f"y has {y.shape[0]} rows, X has {X.shape[0]}")
            object.__setattr__(self, "y", y)
            if self.target_name is None:
                object.__setattr__(self, "target_name", TARGET_NAME)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def with_target(self, y, name=TARGET_NAME):
        return Dataset(self.feature_names, self.X, y, name)

    def fingerprint(self):
        h = hashlib.sha256()
        h.update("\x1f".join(self.feature_names).encode())
        h.update(np.ascontiguousarray(self.X, dtype="<f8").tobytes())
        if self.y is not None:
            h.update((self.target_name or "").encode())
            h.update(np.ascontiguousarray(self.y, dtype="<f8").tobytes())
        return h.hexdigest()


def from_report_table(table, columns=None):
    columns = list(columns or table.columns)
    X = np.column_stack([np.asarray(table.column(c), dtype=float) for c in columns])
    return Dataset(columns, X)


@dataclass(frozen=True)
class Scaler:
    names: tuple
    mins: np.ndarray
    maxs: np.ndarray

    @property
    def constant_columns(self):
        return frozenset(int(i) for i in np.flatnonzero(self.mins == self.maxs))

    def to_dict(self):
        const = self.constant_columns
        return {
            "columns": [
                {"name": n, "min": float(lo), "max": float(hi), "constant": i in const}
                for i, (n, lo, hi) in enumerate(zip(self.names, self.mins, self.maxs))
            ]
        }

    @classmethod
    def from_dict(cls, obj):
        cols = obj["columns"]
        return cls(
            tuple(c["name"] for c in cols),
            np.array([c["min"] for c in cols], dtype=float),
            np.array([c["max"] for c in cols], dtype=float),
        )


def _columns(data):
    """Feature matrix with the target appended as a trailing column, if any."""
    if data.y is None:
        return data.X, list(data.feature_names)
    return np.column_stack([data.X, data.y]), [*data.feature_names, data.target_name]


def minmax_fit(data):
    M, names = _columns(data)
    if M.shape[0] < 1:
        raise SizeError("cannot fit a scaler on an empty dataset")
    if not np.all(np.isfinite(M)):
        raise DomainError("dataset contains non-finite values")
    return Scaler(tuple(names), M.min(axis=0), M.max(axis=0))


def _split(M, data):
    p = data.p
    y = M[:, p] if data.y is not None else None
    return Dataset(data.feature_names, M[:, :p], y, data.target_name)


def _check(scaler, data):
    M, names = _columns(data)
    if len(names) != len(scaler.names):
        raise ShapeError(f"scaler has {len(scaler.names)} columns, data has {len(names)}")
    return M


def minmax_apply(scaler, data):
    M = _check(scaler, data)
    span = scaler.maxs - scaler.mins
    const = span == 0
    out = (M - scaler.mins) / np.where(const, 1.0, span)
    out[:, const] = 0.0
    return _split(out, data)


def minmax_invert(scaler, data):
    M = _check(scaler, data)
    out = M * (scaler.maxs - scaler.mins) + scaler.mins
    return _split(out, data)


def synthesize_target(data, coefficients=DEFAULT_COEFFICIENTS, noise_sd=DEFAULT_NOISE_SD, seed=42):
    """Append Y = clip(X @ c + N(0, noise_sd^2), 0, 1), seeded."""
    c = np.asarray(coefficients, dtype=float)
    if c.shape != (data.p,):
        raise ShapeError(f"need {data.p} coefficients, got {c.size}")
    if not noise_sd >= 0:
        raise DomainError("noise_sd must be >= 0")
    y = data.X @ c
    if noise_sd > 0:
        y = y + np.random.default_rng(seed).normal(0.0, noise_sd, size=data.n)
    return data.with_target(np.clip(y, 0.0, 1.0))


def to_csv(data):
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    M, names = _columns(data)
    w.writerow(names)
    for row in M:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def parse_csv(text, target=TARGET_NAME):
    """Parse a dataset CSV; the column named ``target`` (if present) is y."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise SizeError("empty dataset file")
    header, body = rows[0], rows[1:]
    try:
        M = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise SchemaError(f"bad dataset CSV: {exc}") from None
    if target in header:
        j = header.index(target)
        feats = [h for i, h in enumerate(header) if i != j]
        return Dataset(feats, np.delete(M, j, axis=1), M[:, j], target)
    return Dataset(header, M)


def to_dict(data):
    out = {"feature_names": list(data.feature_names), "X": data.X.tolist()}
    if data.y is not None:
        out["target_name"] = data.target_name
        out["y"] = data.y.tolist()
    return out


def from_dict(obj):
    return Dataset(obj["feature_names"], obj["X"], obj.get("y"), obj.get("target_name"))
