"""Dataset manifests, CSV ingestion and synthetic streams.

Every emitted sample has a unit-norm feature vector and a label in ``[0, 1]``
(min-max scaled over the whole dataset). Samples stay in file order.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _random
from .errors import DataError, InvalidArgumentError
from .rf_features import gaussian_dictionary


@dataclass(frozen=True, eq=False)
class StreamSample:
    x: np.ndarray
    y: float


@dataclass(frozen=True)
class DatasetManifest:
    """Where a dataset lives and what shape it must have after cleaning.

    ``feature_count``/``sample_count`` of ``None`` skip the shape check;
    ``sha256`` of ``None`` skips drift detection. ``feature_columns`` of
    ``None`` means every column except the label.
    """

    name: str
    path: str
    feature_count: int | None = None
    sample_count: int | None = None
    label_column: int = -1
    delimiter: str = ","
    header: bool = False
    feature_columns: tuple | None = None
    skip_columns: tuple = ()
    missing_values: tuple = ()
    sha256: str | None = None
    source: str = ""
    normalization: str = "unit_norm_features+minmax_labels"

    @classmethod
    def from_file(cls, path):
        """Parse a ``key = value`` manifest; a relative ``path`` is resolved against the manifest."""
        path = Path(path)
        raw = {}
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value

        def ints(v):
            return tuple(int(s) for s in v.split(",") if s.strip()) if v else ()

        if "name" not in raw or "path" not in raw:
            raise DataError(f"{path}: manifest needs name and path")
        data_path = Path(raw["path"])
        if not data_path.is_absolute():
            data_path = path.parent / data_path
        delim = raw.get("delimiter", ",")
        delim = {"tab": "\t", "\\t": "\t", "semicolon": ";", "comma": ",", "space": " "}.get(delim, delim)
        return cls(
            name=raw["name"],
            path=str(data_path),
            feature_count=int(raw["feature_count"]) if raw.get("feature_count") else None,
            sample_count=int(raw["sample_count"]) if raw.get("sample_count") else None,
            label_column=int(raw.get("label_column", -1)),
            delimiter=delim,
            header=raw.get("header", "false").lower() in ("1", "true", "yes"),
            feature_columns=ints(raw["feature_columns"]) if raw.get("feature_columns") else None,
            skip_columns=ints(raw.get("skip_columns", "")),
            missing_values=tuple(float(s) for s in raw.get("missing_values", "").split(",") if s.strip()),
            sha256=raw.get("sha256") or None,
            source=raw.get("source", ""),
        )


@dataclass
class LoadReport:
    dropped_rows: list = field(default_factory=list)


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def normalize_rows(X, first_row=0):
    """Scale each row to unit l2 norm; zero rows are rejected with their index."""
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise DataError("zero-norm feature row cannot be normalized", row=int(bad[0]) + first_row)
    return X / norms[:, None]


def minmax_labels(y):
    """Map labels onto ``[0, 1]``; a constant label column becomes all zeros."""
    y = np.asarray(y, dtype=float)
    lo, hi = float(np.min(y)), float(np.max(y))
    if hi == lo:
        return np.zeros_like(y)
    return np.clip((y - lo) / (hi - lo), 0.0, 1.0)


def _to_samples(X, y):
    return [StreamSample(x, float(v)) for x, v in zip(X, y)]


def load_csv(manifest: DatasetManifest, report: LoadReport | None = None, check_hash=True):
    """Read, clean and normalize a manifest's CSV into a list of :class:`StreamSample`.

    Rows with a non-numeric cell or a configured missing-value sentinel are
    dropped (their indices go to ``report``). A row with the wrong number of
    cells is a parse error.
    """
    path = Path(manifest.path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    if check_hash and manifest.sha256 and file_sha256(path) != manifest.sha256:
        raise DataError(f"{path}: content hash differs from manifest (dataset drift)")
    report = report if report is not None else LoadReport()
    missing = set(manifest.missing_values)
    rows, labels = [], []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=manifest.delimiter, skipinitialspace=True)
        if manifest.header:
            next(reader, None)
        for idx, cells in enumerate(reader):
            if not cells or all(not c.strip() for c in cells):
                continue
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataError(f"expected {width} cells, found {len(cells)}", row=idx)
            try:
                values = [float(c) for c in cells]
            except ValueError:
                report.dropped_rows.append(idx)
                continue
            if any(math.isnan(v) or v in missing for v in values):
                report.dropped_rows.append(idx)
                continue
            label_col = manifest.label_column % width
            if manifest.feature_columns is not None:
                cols = [c % width for c in manifest.feature_columns]
            else:
                skip = {c % width for c in manifest.skip_columns} | {label_col}
                cols = [c for c in range(width) if c not in skip]
            rows.append([values[c] for c in cols])
            labels.append(values[label_col])
    if not rows:
        raise DataError(f"{path}: no usable rows")
    X = normalize_rows(np.array(rows))
    y = minmax_labels(np.array(labels))
    if manifest.feature_count is not None and X.shape[1] != manifest.feature_count:
        raise DataError(f"{manifest.name}: expected {manifest.feature_count} features, got {X.shape[1]}")
    if manifest.sample_count is not None and X.shape[0] != manifest.sample_count:
        raise DataError(f"{manifest.name}: expected {manifest.sample_count} samples, got {X.shape[0]}")
    return _to_samples(X, y)


@dataclass(frozen=True)
class SyntheticStream:
    """A synthetic dataset plus the ground truth behind it."""

    samples: list
    generating_sigma2: float
    generating_index: int | None
    seed: int

    def arrays(self):
        return np.array([s.x for s in self.samples]), np.array([s.y for s in self.samples])

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]


def synthetic_stream(generating_sigma2, noise_std, T, d, seed, n_centers=20, dictionary=None):
    """Labels from a random function in one Gaussian kernel's RKHS.

    ``f(x) = sum_m c_m exp(-|x - u_m|^2 / (2 sigma2))`` with unit-norm
    centres ``u_m`` and standard normal ``c_m``, plus Gaussian noise, then
    min-max scaled. Inputs are uniform on the unit sphere.
    ``generating_index`` is the position of ``generating_sigma2`` in
    ``dictionary`` (default: the 17-kernel dictionary), or ``None``.
    """
    if T < 1:
        raise InvalidArgumentError("T must be at least 1")
    if d < 1:
        raise InvalidArgumentError("d must be at least 1")
    rng = _random.generator(seed, _random.DATA)
    centers = normalize_rows(rng.standard_normal((n_centers, d)))
    coef = rng.standard_normal(n_centers)
    X = normalize_rows(rng.standard_normal((T, d)))
    sq = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    f = np.exp(-sq / (2.0 * generating_sigma2)) @ coef
    if noise_std:
        f = f + noise_std * rng.standard_normal(T)
    y = minmax_labels(f)
    dictionary = gaussian_dictionary() if dictionary is None else dictionary
    idx = next((i for i, k in enumerate(dictionary) if math.isclose(k.sigma2, generating_sigma2)), None)
    return SyntheticStream(_to_samples(X, y), float(generating_sigma2), idx, int(seed))
