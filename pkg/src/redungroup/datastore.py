"""Dataset container, z-score normalization, splitting, and CSV ingestion.

A Dataset is a T x M matrix of channel readings (muscle lengths, meters)
plus the channel ids. Normalization is per channel over all rows with the
population standard deviation; constant channels are zeroed and flagged
instead of rejected, since recorded logs can contain stuck sensors.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParseError, ValidationError

CONSTANT_STD_EPS = 1e-9


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel mean/std used to z-score a dataset and to undo it."""

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # boolean mask of channels with std < CONSTANT_STD_EPS

    def to_json(self) -> str:
        return json.dumps(
            {
                "mean": self.mean.tolist(),
                "std": self.std.tolist(),
                "constant": self.constant.astype(int).tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "NormalizationStats":
        doc = json.loads(text)
        return cls(
            mean=np.asarray(doc["mean"], dtype=float),
            std=np.asarray(doc["std"], dtype=float),
            constant=np.asarray(doc["constant"], dtype=bool),
        )


@dataclass(frozen=True)
class Dataset:
    """Immutable T x M matrix of channel values with channel ids."""

    values: np.ndarray
    muscle_ids: tuple[int, ...]
    normalized: bool = False
    stats: NormalizationStats | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValidationError(f"dataset values must be 2-D, got shape {values.shape}")
        t, m = values.shape
        if t < 1:
            raise ValidationError("dataset needs at least one row")
        if m != len(self.muscle_ids):
            raise ValidationError(
                f"{m} columns but {len(self.muscle_ids)} muscle ids"
            )
        if len(set(self.muscle_ids)) != len(self.muscle_ids):
            raise ValidationError("duplicate muscle ids")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "muscle_ids", tuple(self.muscle_ids))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]


def normalize(dataset: Dataset) -> tuple[Dataset, NormalizationStats]:
    """Z-score every channel over all rows (population std).

    Channels whose std is below ``CONSTANT_STD_EPS`` become all-zero and
    are flagged in the returned stats. Raises if the dataset is already
    normalized, which guards against accidental double normalization.
    """
    if dataset.normalized:
        raise ValidationError("dataset is already normalized")
    mean = dataset.values.mean(axis=0)
    std = dataset.values.std(axis=0)  # population std
    constant = std < CONSTANT_STD_EPS
    safe_std = np.where(constant, 1.0, std)
    values = (dataset.values - mean) / safe_std
    values[:, constant] = 0.0
    stats = NormalizationStats(mean=mean, std=std, constant=constant)
    out = Dataset(values=values, muscle_ids=dataset.muscle_ids, normalized=True, stats=stats)
    return out, stats


def denormalize(dataset: Dataset, stats: NormalizationStats) -> Dataset:
    """Invert :func:`normalize`. Constant channels recover their mean."""
    if not dataset.normalized:
        raise ValidationError("dataset is not normalized")
    safe_std = np.where(stats.constant, 1.0, stats.std)
    values = dataset.values * safe_std + stats.mean
    return Dataset(values=values, muscle_ids=dataset.muscle_ids, normalized=False)


def split_train_test(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random row-level partition, deterministic per seed.

    Train side gets round(T * train_fraction) rows; an empty side is an
    error.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    t = dataset.n_rows
    n_train = int(t * train_fraction + 0.5)
    if n_train == 0 or n_train == t:
        raise ValidationError(
            f"train_fraction {train_fraction} leaves an empty side for {t} rows"
        )
    perm = np.random.default_rng(seed).permutation(t)
    train = replace(dataset, values=dataset.values[perm[:n_train]])
    test = replace(dataset, values=dataset.values[perm[n_train:]])
    return train, test


def subsample(dataset: Dataset, n: int, seed: int) -> Dataset:
    """Pick n rows uniformly without replacement, deterministic per seed."""
    if not 1 <= n <= dataset.n_rows:
        raise ValidationError(f"cannot subsample {n} of {dataset.n_rows} rows")
    idx = np.random.default_rng(seed).choice(dataset.n_rows, size=n, replace=False)
    return replace(dataset, values=dataset.values[idx])


def select_channels(dataset: Dataset, muscle_ids) -> Dataset:
    """Column-select the requested channels, preserving the given order."""
    pos = {mid: i for i, mid in enumerate(dataset.muscle_ids)}
    try:
        cols = [pos[mid] for mid in muscle_ids]
    except KeyError as e:
        raise ValidationError(f"unknown muscle id {e.args[0]}") from None
    return Dataset(
        values=dataset.values[:, cols],
        muscle_ids=tuple(muscle_ids),
        normalized=dataset.normalized,
    )


def export_lengths_csv(dataset: Dataset, path) -> None:
    """Write the dataset as CSV: header row of muscle ids, one sample per row.

    Floats are written with 17 significant digits so the round trip is
    lossless for finite doubles.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.muscle_ids)
        for row in dataset.values:
            writer.writerow([f"{v:.17g}" for v in row])


def import_lengths_csv(path) -> Dataset:
    """Read a dataset written by :func:`export_lengths_csv`.

    Errors name the offending row/column (1-based, header is row 1).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        try:
            ids = [int(c) for c in header]
        except ValueError:
            raise ParseError(f"{path}: header must contain integer muscle ids", row=1) from None
        if len(set(ids)) != len(ids):
            raise ParseError(f"{path}: duplicate muscle ids in header", row=1)
        rows = []
        for r, cells in enumerate(reader, start=2):
            if len(cells) != len(ids):
                raise ParseError(
                    f"{path}: expected {len(ids)} cells, found {len(cells)}", row=r
                )
            parsed = []
            for c, cell in enumerate(cells, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ParseError(f"{path}: non-numeric cell {cell!r}", row=r, column=c) from None
            rows.append(parsed)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return Dataset(values=np.array(rows, dtype=float), muscle_ids=tuple(ids))


def export_distance_matrix(matrix: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix:
            writer.writerow([f"{v:.17g}" for v in row])


def import_distance_matrix(path, expected_size: int | None = None) -> np.ndarray:
    """Read a square distance matrix CSV (no header).

    The result is symmetrized as (D + D.T) / 2 with the diagonal forced
    to zero; asymmetry beyond 1e-6 is reported as a warning. A non-square
    file, or one whose size disagrees with ``expected_size``, is an error.
    """
    rows = []
    with open(path, newline="") as fh:
        for r, cells in enumerate(csv.reader(fh), start=1):
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise ParseError(f"{path}: non-numeric cell", row=r) from None
    d = np.array(rows, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValidationError(f"{path}: distance matrix must be square, got {d.shape}")
    if expected_size is not None and d.shape[0] != expected_size:
        raise ValidationError(
            f"{path}: distance matrix is {d.shape[0]}x{d.shape[0]}, expected {expected_size}"
        )
    asym = np.max(np.abs(d - d.T)) if d.size else 0.0
    if asym > 1e-6:
        warnings.warn(f"{path}: distance matrix asymmetric by {asym:.3g}; symmetrizing")
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    return d
