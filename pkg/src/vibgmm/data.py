"""Dataset ingestion: IDX image files, CSV and binary feature matrices, and
a synthetic mixture generator with ground-truth labels.

Loaded feature arrays are marked read-only; training code receives the bare
feature matrix (never the labels) via ``Dataset.train_view()``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
VIBF_MAGIC = b"VIBF"
VIBF_VERSION = 1


class ParseError(ValueError):
    """Malformed dataset file."""


@dataclass
class Dataset:
    features: np.ndarray  # [n, n_x] float64, read-only
    labels: np.ndarray | None = None  # [n] int64, evaluation only
    name: str = ""
    normalization: dict | None = None

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != self.features.shape[0]:
            raise ParseError(
                f"{len(self.labels)} labels for {self.features.shape[0]} rows"
            )
        self.features.flags.writeable = False

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_x(self) -> int:
        return self.features.shape[1]

    def train_view(self) -> np.ndarray:
        """The label-free matrix handed to training."""
        return self.features


@dataclass
class SyntheticGmmSpec:
    k: int
    d: int
    means: np.ndarray  # [k, d]
    variances: np.ndarray  # [k, d]
    weights: np.ndarray  # [k]
    n: int
    seed: int = 0

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64).reshape(self.k, self.d)
        self.variances = np.broadcast_to(
            np.asarray(self.variances, dtype=np.float64), (self.k, self.d)
        ).copy()
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.variances.min() < 0:
            raise ValueError("variances must be non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-9 or self.weights.min() < 0:
            raise ValueError("weights must be a probability vector")


def generate_synthetic(spec: SyntheticGmmSpec) -> Dataset:
    """Draw a labeled sample from the specified mixture (labels are the
    generating components)."""
    rng = np.random.default_rng(spec.seed)
    labels = rng.choice(spec.k, size=spec.n, p=spec.weights)
    noise = rng.standard_normal((spec.n, spec.d))
    features = spec.means[labels] + np.sqrt(spec.variances[labels]) * noise
    return Dataset(features=features, labels=labels.astype(np.int64), name="synthetic")


def _read_exact(f, n, what, offset):
    raw = f.read(n)
    if len(raw) != n:
        raise ParseError(
            f"truncated file: wanted {n} bytes for {what} at byte offset {offset}"
        )
    return raw


def load_idx(images_path, labels_path=None) -> Dataset:
    """Load big-endian IDX image (and optional label) files. Pixels are
    scaled to [0, 1] and images flattened row-major."""
    with open(images_path, "rb") as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, "image magic", 0))
        if magic != IDX_IMAGES_MAGIC:
            raise ParseError(
                f"bad image magic 0x{magic:08x} at byte offset 0, "
                f"expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        n, rows, cols_ = struct.unpack(">III", _read_exact(f, 12, "image dims", 4))
        payload = _read_exact(f, n * rows * cols_, "pixel data", 16)
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    features = pixels.reshape(n, rows * cols_)

    labels = None
    if labels_path is not None:
        with open(labels_path, "rb") as f:
            (magic,) = struct.unpack(">I", _read_exact(f, 4, "label magic", 0))
            if magic != IDX_LABELS_MAGIC:
                raise ParseError(
                    f"bad label magic 0x{magic:08x} at byte offset 0, "
                    f"expected 0x{IDX_LABELS_MAGIC:08x}"
                )
            (n_labels,) = struct.unpack(">I", _read_exact(f, 4, "label count", 4))
            if n_labels != n:
                raise ParseError(f"{n_labels} labels for {n} images")
            raw = _read_exact(f, n_labels, "label data", 8)
        labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)

    return Dataset(features=features, labels=labels, name="idx")


def standardize(features):
    """Per-dimension zero-mean unit-variance scaling; returns the scaled
    matrix plus the record needed to undo it."""
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (features - mean) / std, {"mean": mean, "std": std}


def destandardize(features, record):
    return features * record["std"] + record["mean"]


def load_csv(path, header=False, label_column=False) -> Dataset:
    """Load a rectangular numeric CSV. With ``header``, a final column named
    ``label`` is treated as labels; ``label_column`` forces the final column
    to be labels regardless of header."""
    rows = []
    labels = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        names = None
        if header:
            names = next(reader, None)
            if names is None:
                raise ParseError("empty CSV file")
            if names and names[-1].strip().lower() == "label":
                label_column = True
        width = None
        for i, row in enumerate(reader):
            lineno = i + (2 if header else 1)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(
                    f"ragged CSV: row {lineno} has {len(row)} cells, expected {width}"
                )
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise ParseError(f"non-numeric cell in CSV row {lineno}") from None
            if label_column:
                labels.append(int(values[-1]))
                values = values[:-1]
            rows.append(values)
    if not rows:
        raise ParseError("CSV contains no data rows")
    features = np.asarray(rows, dtype=np.float64)
    return Dataset(
        features=features,
        labels=np.asarray(labels, dtype=np.int64) if label_column else None,
        name="csv",
    )


def save_vibf(path, features, labels=None):
    """Write the binary feature format: magic, version u32, N u64, n_x u64,
    float64 LE row-major payload, then an optional u32 label block."""
    features = np.ascontiguousarray(features, dtype=np.float64)
    with open(path, "wb") as f:
        f.write(VIBF_MAGIC)
        f.write(struct.pack("<I", VIBF_VERSION))
        f.write(struct.pack("<QQ", features.shape[0], features.shape[1]))
        f.write(features.tobytes())
        if labels is not None:
            f.write(np.asarray(labels, dtype="<u4").tobytes())


def load_vibf(path) -> Dataset:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic", 0) != VIBF_MAGIC:
            raise ParseError(f"bad magic at byte offset 0, expected {VIBF_MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version", 4))
        if version != VIBF_VERSION:
            raise ParseError(f"unsupported version {version}")
        n, n_x = struct.unpack("<QQ", _read_exact(f, 16, "dimensions", 8))
        payload = _read_exact(f, 8 * n * n_x, "feature payload", 24)
        rest = f.read()
    features = np.frombuffer(payload, dtype="<f8").reshape(n, n_x).copy()
    labels = None
    if rest:
        if len(rest) != 4 * n:
            raise ParseError(
                f"label block is {len(rest)} bytes at offset {24 + 8 * n * n_x}, "
                f"expected {4 * n}"
            )
        labels = np.frombuffer(rest, dtype="<u4").astype(np.int64)
    return Dataset(features=features, labels=labels, name="vibf")


def load_feature_matrix(path, fmt, header=False, label_column=False,
                        scale=False) -> Dataset:
    """Dispatch loader for feature-matrix formats ('csv' or 'vibf'), with
    optional per-dimension standardization recorded on the dataset."""
    if fmt == "csv":
        ds = load_csv(path, header=header, label_column=label_column)
    elif fmt == "vibf":
        ds = load_vibf(path)
    else:
        raise ValueError(f"unknown feature format {fmt!r}")
    if scale:
        scaled, record = standardize(ds.features)
        ds = Dataset(features=scaled, labels=ds.labels, name=ds.name,
                     normalization=record)
    return ds
